#include "sphr/unrolled.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace sphr {

void NetworkParams::validate() const {
    if (layers.empty()) throw UsageError("network needs at least one layer");
    for (const LayerParams& l : layers) l.validate();
}

NetworkParams default_network(int depth, double scale) {
    if (depth < 1) throw UsageError("network depth must be at least 1");
    if (!(scale >= 0.0)) throw UsageError("scale must be nonnegative");
    LayerParams l;
    l.rho = 0.5;
    l.tau = 0.2;
    l.lambda_nltv = 0.05 * scale;
    l.delta = std::max(0.1 * scale, 1e-12); // delta must stay positive
    l.theta = 4.0;
    NetworkParams p;
    p.layers.assign(std::size_t(depth), l);
    return p;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw UsageError("epochs must be nonnegative");
    if (batch_size < 1) throw UsageError("batch_size must be at least 1");
    if (!(spsa_step > 0.0)) throw UsageError("spsa_step must be positive");
    if (!(spsa_perturb > 0.0)) throw UsageError("spsa_perturb must be positive");
    if (!(step_decay >= 0.0) || !(perturb_decay >= 0.0))
        throw UsageError("decay exponents must be nonnegative");
}

ComplexImage forward(const NetworkParams& params, const ComplexImage& echo,
                     const OperatorPlan& plan, const SamplingMask& mask) {
    params.validate();
    SolverConfig cfg;
    cfg.layers = params.depth();
    cfg.params = params.layers;
    cfg.mode = SolverMode::NLTV_NC;
    cfg.fixed_depth = true;
    cfg.stop_tol = 0.0;
    return admm_solve(echo, plan, mask, cfg).first;
}

double loss(const std::vector<ComplexImage>& outputs,
            const std::vector<RealGrid>& labels) {
    if (outputs.empty()) throw UsageError("loss needs at least one pair");
    if (outputs.size() != labels.size())
        throw UsageError("loss: output/label count mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        const ComplexImage& x = outputs[i];
        const RealGrid& l = labels[i];
        if (x.rows != l.rows || x.cols != l.cols)
            throw UsageError("loss: output/label dimension mismatch");
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            double d = std::abs(x.data[k]) - l.data[k];
            num += d * d;
            den += l.data[k] * l.data[k];
        }
        if (den == 0.0) throw DataError("loss: zero-norm label");
        acc += num / (den * double(x.size()));
    }
    return acc / double(outputs.size());
}

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

// Inverse of softplus on positive inputs; nonpositive inputs map to the
// bottom of the representable range.
double softplus_inv(double y) {
    if (!(y > 0.0)) return -745.0;
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

double logit(double p) {
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    return std::log(p / (1.0 - p));
}

// Layer order (rho, lambda, tau, delta, theta), matching the checkpoint.
constexpr int kPerLayer = 5;

} // namespace

std::vector<double> to_unconstrained(const NetworkParams& p) {
    std::vector<double> z(p.layers.size() * kPerLayer);
    for (std::size_t t = 0; t < p.layers.size(); ++t) {
        const LayerParams& l = p.layers[t];
        z[t * kPerLayer + 0] = logit(l.rho);
        z[t * kPerLayer + 1] = softplus_inv(l.lambda_nltv);
        z[t * kPerLayer + 2] = softplus_inv(l.tau);
        z[t * kPerLayer + 3] = softplus_inv(l.delta);
        z[t * kPerLayer + 4] = softplus_inv(l.theta - 1.0);
    }
    return z;
}

// Every unconstrained vector maps to feasible layers: the floors keep the
// open-interval and strict-positivity invariants intact even where the
// smooth maps would underflow.
NetworkParams from_unconstrained(const std::vector<double>& z) {
    if (z.empty() || z.size() % kPerLayer != 0)
        throw UsageError("unconstrained vector length must be a positive multiple of 5");
    NetworkParams p;
    p.layers.resize(z.size() / kPerLayer);
    for (std::size_t t = 0; t < p.layers.size(); ++t) {
        LayerParams& l = p.layers[t];
        l.rho = std::clamp(sigmoid(z[t * kPerLayer + 0]), 1e-12, 1.0 - 1e-12);
        l.lambda_nltv = softplus(z[t * kPerLayer + 1]);
        l.tau = std::max(softplus(z[t * kPerLayer + 2]), 1e-12);
        l.delta = std::max(softplus(z[t * kPerLayer + 3]), 1e-12);
        l.theta = 1.0 + std::max(softplus(z[t * kPerLayer + 4]), 1e-12);
    }
    return p;
}

std::pair<NetworkParams, std::vector<double>> train(
    const std::vector<TrainSample>& data, const OperatorPlan& plan,
    const TrainConfig& cfg, const NetworkParams& init) {
    cfg.validate();
    init.validate();
    if (data.empty()) throw UsageError("train needs at least one sample");
    for (const TrainSample& s : data) {
        if (s.echo.rows != plan.n_azimuth() || s.echo.cols != plan.n_range())
            throw UsageError("train: echo dimensions do not match the plan");
        if (s.label.rows != s.echo.rows || s.label.cols != s.echo.cols)
            throw UsageError("train: label dimensions do not match the echo");
    }
    if (cfg.epochs == 0) return {init, {}};

    std::vector<double> z = to_unconstrained(init);
    const std::size_t dim = z.size();
    std::mt19937_64 rng(cfg.seed);

    // batch loss at a candidate parameter vector; the per-sample terms are
    // independent forward passes
    auto batch_loss = [&](const std::vector<double>& zc,
                          const std::vector<std::size_t>& idx,
                          std::size_t lo, std::size_t hi) {
        NetworkParams p = from_unconstrained(zc);
        double acc = 0.0;
        for (std::size_t b = lo; b < hi; ++b) {
            const TrainSample& s = data[idx[b]];
            ComplexImage out = forward(p, s.echo, plan, s.mask);
            double num = 0.0, den = 0.0;
            for (std::size_t k = 0; k < out.size(); ++k) {
                double d = std::abs(out.data[k]) - s.label.data[k];
                num += d * d;
                den += s.label.data[k] * s.label.data[k];
            }
            if (den == 0.0) throw DataError("train: zero-norm label");
            acc += num / (den * double(out.size()));
        }
        return acc / double(hi - lo);
    };

    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<double> history;
    history.reserve(std::size_t(cfg.epochs));
    std::vector<double> best_z = z;
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<double> delta(dim), zp(dim), zm(dim);
    std::uint64_t step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // seeded in-place shuffle; self-contained so the draw sequence is
        // fixed by the engine alone
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[std::size_t(rng() % i)]);

        double epoch_acc = 0.0;
        std::size_t epoch_steps = 0;
        for (std::size_t lo = 0; lo < data.size();
             lo += std::size_t(cfg.batch_size)) {
            std::size_t hi =
                std::min(data.size(), lo + std::size_t(cfg.batch_size));
            double ck =
                cfg.spsa_perturb / std::pow(double(step + 1), cfg.perturb_decay);
            double ak = cfg.spsa_step / std::pow(double(step + 1), cfg.step_decay);
            for (std::size_t d = 0; d < dim; ++d) {
                delta[d] = (rng() & 1u) ? 1.0 : -1.0;
                zp[d] = z[d] + ck * delta[d];
                zm[d] = z[d] - ck * delta[d];
            }
            double lp, lm;
            try {
                lp = batch_loss(zp, idx, lo, hi);
                lm = batch_loss(zm, idx, lo, hi);
            } catch (const DivergenceError& e) {
                throw DivergenceError("SPSA evaluation diverged at epoch " +
                                      std::to_string(epoch + 1) + ", step " +
                                      std::to_string(step + 1) + ": " + e.what());
            }
            if (!std::isfinite(lp) || !std::isfinite(lm))
                throw DivergenceError(
                    "non-finite SPSA loss at epoch " + std::to_string(epoch + 1) +
                    ", step " + std::to_string(step + 1) + " (probe losses " +
                    std::to_string(lp) + ", " + std::to_string(lm) + ")");

            double probe = 0.5 * (lp + lm);
            if (probe < best_loss) {
                best_loss = probe;
                best_z = z;
            }
            epoch_acc += probe;
            ++epoch_steps;

            double g = (lp - lm) / (2.0 * ck);
            for (std::size_t d = 0; d < dim; ++d) z[d] -= ak * g / delta[d];
            ++step;
        }
        history.push_back(epoch_acc / double(epoch_steps));
    }
    return {from_unconstrained(best_z), history};
}

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32_le(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xFF);
    os.write(b, 4);
}

std::uint32_t get_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

void put_f64_le(std::ostream& os, double d) {
    std::uint64_t u;
    std::memcpy(&u, &d, 8);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((u >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

double get_f64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
    double d;
    std::memcpy(&d, &u, 8);
    return d;
}

} // namespace

void save_checkpoint(const NetworkParams& params, const std::string& path) {
    params.validate();
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw DataError("cannot open for writing: " + tmp);
        os.write("SPHP", 4);
        put_u32_le(os, kCheckpointVersion);
        put_u32_le(os, std::uint32_t(params.layers.size()));
        for (const LayerParams& l : params.layers) {
            put_f64_le(os, l.rho);
            put_f64_le(os, l.lambda_nltv);
            put_f64_le(os, l.tau);
            put_f64_le(os, l.delta);
            put_f64_le(os, l.theta);
        }
        if (!os) throw DataError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("atomic rename failed for: " + path);
}

NetworkParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SPHP", 4) != 0)
        throw DataError("bad magic in checkpoint: " + path);
    std::uint32_t version = get_u32_le(is);
    if (!is) throw DataError("checkpoint truncated: " + path);
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version in: " + path);
    std::uint32_t depth = get_u32_le(is);
    if (!is) throw DataError("checkpoint truncated: " + path);
    if (depth == 0 || depth > (1u << 20))
        throw DataError("implausible depth in checkpoint: " + path);
    NetworkParams p;
    p.layers.resize(depth);
    for (LayerParams& l : p.layers) {
        l.rho = get_f64_le(is);
        l.lambda_nltv = get_f64_le(is);
        l.tau = get_f64_le(is);
        l.delta = get_f64_le(is);
        l.theta = get_f64_le(is);
    }
    if (!is) throw DataError("checkpoint truncated: " + path);
    try {
        p.validate();
    } catch (const UsageError& e) {
        throw DataError("checkpoint parameter out of range in " + path + ": " +
                        e.what());
    }
    return p;
}

std::string loss_history_csv(const std::vector<double>& history) {
    std::ostringstream os;
    os << "epoch,mean_loss\n";
    char buf[64];
    for (std::size_t i = 0; i < history.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, history[i]);
        os << buf;
    }
    return os.str();
}

} // namespace sphr
