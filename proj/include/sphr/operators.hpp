#pragma once

#include "sphr/core.hpp"

#include <memory>

namespace sphr {

// Immutable FFT-chain imaging operator. Holds the six unit-modulus phase
// matrices and reusable FFT plans for the azimuth/range transforms.
// Shareable across threads; image/inverse_image allocate their own buffers.
class OperatorPlan {
  public:
    // Throws UsageError when the pulse does not fit the fast-time window or
    // params are non-physical.
    OperatorPlan(const RadarParams& radar, int n_azimuth, int n_range);
    ~OperatorPlan();

    OperatorPlan(const OperatorPlan&) = delete;
    OperatorPlan& operator=(const OperatorPlan&) = delete;

    int n_azimuth() const { return na_; }
    int n_range() const { return nr_; }
    const RadarParams& radar() const { return radar_; }

    // Phase-multiplier stages, all unit modulus. Indices: deramping,
    // ramping, differential RCMC, range MF + bulk RCMC, azimuth MF,
    // residual carrier correction.
    const ComplexImage& theta(int k) const { return theta_[k]; }

    // Orthonormal transforms along one axis, in place.
    void fft_azimuth(ComplexImage& z, bool inverse) const;
    void fft_range(ComplexImage& z, bool inverse) const;

  private:
    int na_ = 0, nr_ = 0;
    RadarParams radar_;
    ComplexImage theta_[6];
    struct Plans;
    std::unique_ptr<Plans> plans_;

    void build_thetas();
};

// Focused scene estimate from an echo: the nine-stage forward chain
// (deramp, azimuth FFT, ramp, azimuth FFT, differential RCMC, range FFT,
// range MF + bulk RCMC, inverse range FFT, azimuth MF + carrier, inverse
// azimuth FFT).
ComplexImage image(const OperatorPlan& plan, const ComplexImage& echo);

// Synthesized echo from a scene: the conjugate, stage-reversed chain.
// Exactly inverts image() and is simultaneously its adjoint, since every
// stage is a unitary FFT or a unit-modulus Hadamard multiply.
ComplexImage inverse_image(const OperatorPlan& plan, const ComplexImage& scene);

// Zeroes dropped azimuth rows / range columns, keeps the rest unchanged.
ComplexImage apply_mask(const SamplingMask& mask, const ComplexImage& echo);

// Brute-force observation matrix for small grids, the validation oracle for
// the fast chain. Rows indexed by (slow time, fast time) pairs, columns by
// scene pixels (row-major p * Nr + q).
struct DenseObservation {
    int n_azimuth = 0;
    int n_range = 0;
    RadarParams radar;
    std::vector<cplx> phi; // (Na*Nr) x (Na*Nr), row-major

    std::size_t dim() const { return std::size_t(n_azimuth) * n_range; }
    const cplx& at(std::size_t r, std::size_t c) const { return phi[r * dim() + c]; }

    // y = Phi x (scene -> echo samples)
    ComplexImage apply(const ComplexImage& scene) const;
    // x = Phi^H y (echo -> matched-filter image)
    ComplexImage apply_adjoint(const ComplexImage& echo) const;
};

// Materializes Phi; capped at Na*Nr <= 1024 pixels (32x32).
DenseObservation build_dense_observation(const RadarParams& radar,
                                         int n_azimuth, int n_range);

} // namespace sphr
