#include "sphr/operators.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>

namespace sphr {
namespace {

constexpr double kPi = 3.14159265358979323846;

// FFTW's planner is not thread-safe; plan creation/destruction is serialized.
// Execution through the new-array API is safe without the lock.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// DFT sample frequencies in natural FFT order: k/n*fs for the first half,
// negative tail after.
std::vector<double> fft_freqs(int n, double fs) {
    std::vector<double> f(n);
    for (int k = 0; k < n; ++k) {
        int kk = (k < (n + 1) / 2) ? k : k - n;
        f[k] = fs * double(kk) / double(n);
    }
    return f;
}

struct Grids {
    std::vector<double> tm; // slow time, s
    std::vector<double> s;  // fast time relative to the window center, s
    std::vector<double> xp; // scene azimuth positions, m
    std::vector<double> rq; // scene slant-range gates, m
    double dx = 0.0, dr = 0.0;
};

Grids make_grids(const RadarParams& P, int na, int nr) {
    Grids g;
    g.tm.resize(na);
    g.xp.resize(na);
    g.dx = P.wavelength * P.nearest_range * P.prf / (2.0 * P.velocity * na);
    for (int m = 0; m < na; ++m) {
        g.tm[m] = double(m - na / 2) / P.prf;
        g.xp[m] = double(m - na / 2) * g.dx;
    }
    g.s.resize(nr);
    g.rq.resize(nr);
    g.dr = P.light_speed / (2.0 * P.sample_rate);
    for (int k = 0; k < nr; ++k) {
        g.s[k] = double(k - nr / 2) / P.sample_rate;
        g.rq[k] = P.nearest_range + double(k - nr / 2) * g.dr;
    }
    return g;
}

cplx expi(double phase) { return cplx(std::cos(phase), std::sin(phase)); }

} // namespace

struct OperatorPlan::Plans {
    fftw_plan azi_fwd = nullptr, azi_bwd = nullptr;
    fftw_plan rng_fwd = nullptr, rng_bwd = nullptr;

    ~Plans() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        for (fftw_plan p : {azi_fwd, azi_bwd, rng_fwd, rng_bwd})
            if (p) fftw_destroy_plan(p);
    }
};

OperatorPlan::OperatorPlan(const RadarParams& radar, int n_azimuth, int n_range)
    : na_(n_azimuth), nr_(n_range), radar_(radar) {
    if (na_ < 2 || nr_ < 2)
        throw UsageError("grid must be at least 2x2");
    radar_.validate();
    radar_.validate_for_grid(na_, nr_);
    build_thetas();

    plans_ = std::make_unique<Plans>();
    ComplexImage scratch(na_, nr_);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data.data());
    int n_rng[1] = {nr_};
    int n_azi[1] = {na_};
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard<std::mutex> lock(planner_mutex());
    plans_->rng_fwd = fftw_plan_many_dft(1, n_rng, na_, buf, nullptr, 1, nr_,
                                         buf, nullptr, 1, nr_, FFTW_FORWARD, flags);
    plans_->rng_bwd = fftw_plan_many_dft(1, n_rng, na_, buf, nullptr, 1, nr_,
                                         buf, nullptr, 1, nr_, FFTW_BACKWARD, flags);
    plans_->azi_fwd = fftw_plan_many_dft(1, n_azi, nr_, buf, nullptr, nr_, 1,
                                         buf, nullptr, nr_, 1, FFTW_FORWARD, flags);
    plans_->azi_bwd = fftw_plan_many_dft(1, n_azi, nr_, buf, nullptr, nr_, 1,
                                         buf, nullptr, nr_, 1, FFTW_BACKWARD, flags);
    if (!plans_->rng_fwd || !plans_->rng_bwd || !plans_->azi_fwd || !plans_->azi_bwd)
        throw UsageError("FFT planning failed");
}

OperatorPlan::~OperatorPlan() = default;

void OperatorPlan::fft_azimuth(ComplexImage& z, bool inverse) const {
    auto* buf = reinterpret_cast<fftw_complex*>(z.data.data());
    fftw_execute_dft(inverse ? plans_->azi_bwd : plans_->azi_fwd, buf, buf);
    double scale = 1.0 / std::sqrt(double(na_));
    for (cplx& v : z.data) v *= scale;
}

void OperatorPlan::fft_range(ComplexImage& z, bool inverse) const {
    auto* buf = reinterpret_cast<fftw_complex*>(z.data.data());
    fftw_execute_dft(inverse ? plans_->rng_bwd : plans_->rng_fwd, buf, buf);
    double scale = 1.0 / std::sqrt(double(nr_));
    for (cplx& v : z.data) v *= scale;
}

void OperatorPlan::build_thetas() {
    const RadarParams& P = radar_;
    Grids g = make_grids(P, na_, nr_);

    std::vector<double> rhyp(na_);
    for (int m = 0; m < na_; ++m) rhyp[m] = P.slant_range(g.tm[m]);

    for (auto& t : theta_) t = ComplexImage(na_, nr_);

    // Stage 0: deramp to the reference track history.
    for (int m = 0; m < na_; ++m) {
        cplx v = expi(4.0 * kPi * rhyp[m] / P.wavelength);
        for (int k = 0; k < nr_; ++k) theta_[0].at(m, k) = v;
    }

    // Stage 1: quadratic re-ramp over azimuth frequency.
    std::vector<double> fa = fft_freqs(na_, P.prf);
    double ka = 2.0 * P.velocity * P.velocity / (P.wavelength * P.nearest_range);
    for (int m = 0; m < na_; ++m) {
        cplx v = expi(kPi * fa[m] * fa[m] / ka);
        for (int k = 0; k < nr_; ++k) theta_[1].at(m, k) = v;
    }

    // After two forward azimuth FFTs rows carry the time axis reversed
    // modulo the grid; later stages index through that map.
    std::vector<int> rev(na_);
    for (int m = 0; m < na_; ++m) rev[m] = (na_ - m) % na_;

    // Stage 2: differential range-cell migration, gate taken from fast time.
    for (int m = 0; m < na_; ++m) {
        double tmr = g.tm[rev[m]];
        double rhr = rhyp[rev[m]];
        for (int k = 0; k < nr_; ++k) {
            double rs = P.nearest_range + P.light_speed * g.s[k] / 2.0;
            double rho_s = std::sqrt(rs * rs + P.velocity * tmr * P.velocity * tmr);
            double mu = 2.0 * (rho_s - rs - (rhr - P.nearest_range)) / P.light_speed;
            theta_[2].at(m, k) = expi(2.0 * kPi * P.chirp_rate * mu * g.s[k]);
        }
    }

    // Stage 3: range compression against the exact sampled chirp spectrum,
    // plus the bulk migration of the reference history. The (-1)^k factor
    // centers the compressed pulse in the shifted fast-time window.
    std::vector<cplx> chirp(nr_, cplx(0.0, 0.0));
    for (int k = 0; k < nr_; ++k)
        if (std::abs(g.s[k]) <= P.pulse_width / 2.0)
            chirp[k] = expi(kPi * P.chirp_rate * g.s[k] * g.s[k]);
    std::vector<cplx> cs(nr_);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_plan p = fftw_plan_dft_1d(nr_,
                                       reinterpret_cast<fftw_complex*>(chirp.data()),
                                       reinterpret_cast<fftw_complex*>(cs.data()),
                                       FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!p) throw UsageError("FFT planning failed");
        fftw_execute(p);
        fftw_destroy_plan(p);
    }
    std::vector<double> fr = fft_freqs(nr_, P.sample_rate);
    for (int m = 0; m < na_; ++m) {
        double dtau = 2.0 * (rhyp[rev[m]] - P.nearest_range) / P.light_speed;
        for (int k = 0; k < nr_; ++k) {
            double mf_ph = -std::arg(cs[k]) + kPi * double(k);
            theta_[3].at(m, k) = expi(mf_ph + 2.0 * kPi * fr[k] * dtau);
        }
    }

    // Stage 4: per-gate azimuth matched-filter refinement (depth of focus).
    for (int m = 0; m < na_; ++m) {
        double tmr = g.tm[rev[m]];
        double rhr = rhyp[rev[m]];
        for (int k = 0; k < nr_; ++k) {
            double rho_q = std::sqrt(g.rq[k] * g.rq[k] +
                                     P.velocity * tmr * P.velocity * tmr);
            theta_[4].at(m, k) = expi(4.0 * kPi *
                                      (rho_q - g.rq[k] - rhr + P.nearest_range) /
                                      P.wavelength);
        }
    }

    // Stage 5: residual per-gate carrier; the (-1)^m centers the azimuth
    // spectrum so targets land on their scene rows.
    for (int m = 0; m < na_; ++m) {
        double sgn = (m % 2 == 0) ? 1.0 : -1.0;
        for (int k = 0; k < nr_; ++k) {
            theta_[5].at(m, k) =
                sgn * expi(4.0 * kPi * (g.rq[k] - P.nearest_range) / P.wavelength);
        }
    }
}

namespace {

void hadamard(ComplexImage& z, const ComplexImage& t) {
    for (std::size_t i = 0; i < z.size(); ++i) z.data[i] *= t.data[i];
}

void hadamard_conj(ComplexImage& z, const ComplexImage& t) {
    for (std::size_t i = 0; i < z.size(); ++i) z.data[i] *= std::conj(t.data[i]);
}

void check_dims(const OperatorPlan& plan, const ComplexImage& z, const char* what) {
    if (z.rows != plan.n_azimuth() || z.cols != plan.n_range())
        throw UsageError(std::string(what) + ": dimension mismatch");
}

} // namespace

ComplexImage image(const OperatorPlan& plan, const ComplexImage& echo) {
    check_dims(plan, echo, "image");
    ComplexImage z = echo;
    hadamard(z, plan.theta(0));
    plan.fft_azimuth(z, false);
    hadamard(z, plan.theta(1));
    plan.fft_azimuth(z, false);
    hadamard(z, plan.theta(2));
    plan.fft_range(z, false);
    hadamard(z, plan.theta(3));
    plan.fft_range(z, true);
    hadamard(z, plan.theta(4));
    hadamard(z, plan.theta(5));
    plan.fft_azimuth(z, true);
    return z;
}

ComplexImage inverse_image(const OperatorPlan& plan, const ComplexImage& scene) {
    check_dims(plan, scene, "inverse_image");
    ComplexImage z = scene;
    plan.fft_azimuth(z, false);
    hadamard_conj(z, plan.theta(5));
    hadamard_conj(z, plan.theta(4));
    plan.fft_range(z, false);
    hadamard_conj(z, plan.theta(3));
    plan.fft_range(z, true);
    hadamard_conj(z, plan.theta(2));
    plan.fft_azimuth(z, true);
    hadamard_conj(z, plan.theta(1));
    plan.fft_azimuth(z, true);
    hadamard_conj(z, plan.theta(0));
    return z;
}

ComplexImage apply_mask(const SamplingMask& mask, const ComplexImage& echo) {
    if (int(mask.azimuth_keep.size()) != echo.rows ||
        int(mask.range_keep.size()) != echo.cols)
        throw UsageError("apply_mask: mask/echo dimension mismatch");
    ComplexImage out = echo;
    for (int i = 0; i < echo.rows; ++i)
        for (int j = 0; j < echo.cols; ++j)
            out.at(i, j) *= mask.indicator(i, j);
    return out;
}

ComplexImage DenseObservation::apply(const ComplexImage& scene) const {
    if (scene.rows != n_azimuth || scene.cols != n_range)
        throw UsageError("dense apply: dimension mismatch");
    ComplexImage y(n_azimuth, n_range);
    std::size_t n = dim();
    for (std::size_t r = 0; r < n; ++r) {
        cplx acc(0.0, 0.0);
        for (std::size_t c = 0; c < n; ++c) acc += at(r, c) * scene.data[c];
        y.data[r] = acc;
    }
    return y;
}

ComplexImage DenseObservation::apply_adjoint(const ComplexImage& echo) const {
    if (echo.rows != n_azimuth || echo.cols != n_range)
        throw UsageError("dense adjoint: dimension mismatch");
    ComplexImage x(n_azimuth, n_range);
    std::size_t n = dim();
    for (std::size_t c = 0; c < n; ++c) {
        cplx acc(0.0, 0.0);
        for (std::size_t r = 0; r < n; ++r) acc += std::conj(at(r, c)) * echo.data[r];
        x.data[c] = acc;
    }
    return x;
}

DenseObservation build_dense_observation(const RadarParams& radar,
                                         int n_azimuth, int n_range) {
    if (std::size_t(n_azimuth) * n_range > 1024)
        throw UsageError("dense observation capped at 1024 scene pixels");
    radar.validate();
    radar.validate_for_grid(n_azimuth, n_range);

    DenseObservation d;
    d.n_azimuth = n_azimuth;
    d.n_range = n_range;
    d.radar = radar;
    std::size_t n = d.dim();
    d.phi.assign(n * n, cplx(0.0, 0.0));

    const RadarParams& P = radar;
    Grids g = make_grids(P, n_azimuth, n_range);
    double xscene = n_azimuth * g.dx;
    double win = double(n_range) / P.sample_rate;

    for (int p = 0; p < n_azimuth; ++p) {
        for (int q = 0; q < n_range; ++q) {
            std::size_t col = std::size_t(p) * n_range + q;
            for (int ma = 0; ma < n_azimuth; ++ma) {
                if (std::abs(P.sliding_factor * P.velocity * g.tm[ma] - g.xp[p]) >
                    xscene / 2.0 + 1e-12)
                    continue;
                double dxa = g.xp[p] - P.velocity * g.tm[ma];
                double r = std::sqrt(g.rq[q] * g.rq[q] + dxa * dxa);
                double tau = 2.0 * (r - P.nearest_range) / P.light_speed;
                for (int mr = 0; mr < n_range; ++mr) {
                    // circular fast-time window: pulse repetition wraps the
                    // envelope instead of truncating it
                    double st = g.s[mr] - tau;
                    double stw = std::fmod(st + win / 2.0, win);
                    if (stw < 0) stw += win;
                    stw -= win / 2.0;
                    if (std::abs(stw) > P.pulse_width / 2.0) continue;
                    double ph = -4.0 * kPi * r / P.wavelength +
                                kPi * P.chirp_rate * stw * stw;
                    d.phi[(std::size_t(ma) * n_range + mr) * n + col] = expi(ph);
                }
            }
        }
    }
    return d;
}

} // namespace sphr
