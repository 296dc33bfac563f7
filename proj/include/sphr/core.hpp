#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sphr {

using cplx = std::complex<double>;

// Error taxonomy, mapped to process exit codes by the CLI:
// UsageError -> 2, DataError -> 3, DivergenceError -> 4.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Row-major complex grid. Rows index azimuth (or scene rows), cols index
// range (or scene cols), so range-direction FFTs run on contiguous memory.
struct ComplexImage {
    int rows = 0;
    int cols = 0;
    std::vector<cplx> data;

    ComplexImage() = default;
    ComplexImage(int r, int c) : rows(r), cols(c), data(std::size_t(r) * c) {}

    cplx& at(int i, int j) { return data[std::size_t(i) * cols + j]; }
    const cplx& at(int i, int j) const { return data[std::size_t(i) * cols + j]; }
    std::size_t size() const { return data.size(); }
};

// Row-major real grid with the same layout convention.
struct RealGrid {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    RealGrid() = default;
    RealGrid(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(std::size_t(r) * c, fill) {}

    double& at(int i, int j) { return data[std::size_t(i) * cols + j]; }
    const double& at(int i, int j) const { return data[std::size_t(i) * cols + j]; }
    std::size_t size() const { return data.size(); }
};

RealGrid magnitude(const ComplexImage& img);

double frobenius(const ComplexImage& img);
double frobenius(const RealGrid& g);
double median_of(const RealGrid& g);

// Platform and waveform geometry. All quantities SI.
struct RadarParams {
    double velocity = 150.0;          // v_t, m/s
    double track_length = 1.0e4;      // X_I, m; synthetic-aperture extent
    double scene_length = 1.0e4;      // X, m; ground-scene extent
    double pulse_width = 1.0e-7;      // T_p, s
    double wavelength = 0.03;         // m
    double chirp_rate = 1.5e15;       // K_r, Hz/s
    double sliding_factor = 0.0;      // A in [0,1]; 0 selects spotlight geometry
    double nearest_range = 1.0e4;     // R0, m; slant range at aperture center
    double light_speed = 299792458.0; // m/s
    double prf = 32.0;                // Hz
    double sample_rate = 2.0e8;       // f_s, Hz

    // Optional override of the slant-range history R(t_m); when empty the
    // hyperbolic model sqrt(R0^2 + (v t)^2) is used.
    std::function<double(double)> slant_range_fn;

    double slant_range(double t_m) const;

    // Throws UsageError on non-physical values (non-positive quantities,
    // sliding factor outside [0,1]).
    void validate() const;

    // The sampled pulse must fit the fast-time window: T_p * f_s <= n_range.
    void validate_for_grid(int n_azimuth, int n_range) const;
};

// Azimuth/range downsampling selectors. The per-pixel indicator is the
// product of the two keep flags; it carries no solver weighting, which is
// applied downstream where the ADMM penalty is known.
struct SamplingMask {
    std::vector<std::uint8_t> azimuth_keep;
    std::vector<std::uint8_t> range_keep;

    bool full() const;
    double indicator(int i, int j) const {
        return (azimuth_keep[i] && range_keep[j]) ? 1.0 : 0.0;
    }
    // DSR = 1 - kept_az/Na * kept_rg/Nr, computed exactly from counts.
    double downsampling_rate() const;

    static SamplingMask all_kept(int n_azimuth, int n_range);
};

// Per-layer solver scalars. The learnable set of one ADMM layer.
struct LayerParams {
    double rho = 0.5;         // ADMM penalty, in (0,1)
    double lambda_nltv = 0.0; // nonnegative
    double tau = 0.2;         // Chambolle step, positive (clamped at use site)
    double delta = 0.0;       // GMC threshold, positive
    double theta = 4.0;       // GMC coefficient, > 1

    // Throws UsageError when any range invariant is violated.
    void validate() const;
};

// Binary persistence: magic "SPHC" | version u32 LE | rows u32 LE |
// cols u32 LE | rows*cols interleaved (re, im) f32 LE, row-major.
// On-disk precision is f32; in-memory computation stays f64.
inline constexpr std::uint32_t kImageFormatVersion = 1;

void write_image(const ComplexImage& img, const std::string& path);
ComplexImage read_image(const std::string& path);

// 8-bit binary PGM (P5) export used for magnitude renderings.
void write_pgm(const RealGrid& g, const std::string& path);

// Appends one run manifest as a JSON file next to the command outputs.
// `payload` must be a serialized JSON object; written atomically.
void write_text_file(const std::string& path, const std::string& payload);

inline constexpr const char* kToolVersion = "1.0.0";

} // namespace sphr
