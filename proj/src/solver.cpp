#include "sphr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace sphr {

namespace {

int branch_count(SolverMode mode) {
    return mode == SolverMode::NLTV_NC ? 2 : 1;
}

RealGrid soft_threshold(const RealGrid& b, double delta) {
    RealGrid out(b.rows, b.cols);
    for (std::size_t k = 0; k < b.size(); ++k) {
        double v = b.data[k];
        double m = std::abs(v) - delta;
        out.data[k] = m > 0.0 ? (v > 0.0 ? m : -m) : 0.0;
    }
    return out;
}

double grid_norm(const RealGrid& g) {
    double s = 0.0;
    for (double v : g.data) s += v * v;
    return std::sqrt(s);
}

double diff_norm2(const RealGrid& a, const RealGrid& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        double d = a.data[k] - b.data[k];
        s += d * d;
    }
    return s;
}

} // namespace

void SolverConfig::validate() const {
    if (layers < 1) throw UsageError("solver needs at least one layer");
    if (params.empty())
        throw UsageError("solver params missing");
    if (params.size() != 1 && int(params.size()) != layers)
        throw UsageError("params must hold one entry or one per layer");
    for (const LayerParams& p : params) p.validate();
    nltv.validate();
    if (stop_tol < 0.0) throw UsageError("stop_tol must be >= 0");
    if (inner_iters < 1) throw UsageError("inner_iters must be >= 1");
    if (h_anneal_end <= 0.0 || h_anneal_end > 1.0)
        throw UsageError("h_anneal_end must lie in (0, 1]");
}

const LayerParams& SolverConfig::layer(int t) const {
    return params.size() == 1 ? params[0] : params[std::size_t(t)];
}

ComplexImage x_update(const SolverState& state, const OperatorPlan& plan,
                      const ComplexImage& echo, const SamplingMask& mask,
                      double rho, SolverMode mode) {
    const int na = plan.n_azimuth(), nr = plan.n_range();
    if (echo.rows != na || echo.cols != nr || state.X.rows != na ||
        state.X.cols != nr)
        throw UsageError("x_update dims mismatch");
    if (!(rho > 0.0 && rho < 1.0))
        throw UsageError("rho must lie in (0, 1)");

    const int b = branch_count(mode);

    // Magnitude-domain consensus pull-back, re-phased with the current X.
    ComplexImage pull{na, nr};
    for (std::size_t k = 0; k < pull.data.size(); ++k) {
        double sum = state.Z2.data[k] - state.D2.data[k];
        if (b == 2) sum += state.Z1.data[k] - state.D1.data[k];
        double mag = std::abs(state.X.data[k]);
        cplx phase = mag > 0.0 ? state.X.data[k] / mag : cplx(1.0, 0.0);
        pull.data[k] = rho * sum * phase;
    }

    ComplexImage ec = inverse_image(plan, pull);
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nr; ++j) {
            double kept = mask.indicator(i, j);
            double gamma = 1.0 / (kept + b * rho);
            ec.at(i, j) = gamma * (kept * echo.at(i, j) + ec.at(i, j));
        }
    return image(plan, ec);
}

std::pair<ComplexImage, SolverState> admm_solve(const ComplexImage& echo,
                                                const OperatorPlan& plan,
                                                const SamplingMask& mask,
                                                const SolverConfig& cfg) {
    cfg.validate();
    const int na = plan.n_azimuth(), nr = plan.n_range();
    if (echo.rows != na || echo.cols != nr)
        throw UsageError("echo dims do not match the plan");

    const bool nc = cfg.mode == SolverMode::NLTV_NC;
    bool use_nltv = false;
    if (nc)
        for (const LayerParams& p : cfg.params)
            if (p.lambda_nltv > 0.0) use_nltv = true;

    SolverState st;
    ComplexImage masked = apply_mask(mask, echo);
    st.X = image(plan, masked);
    RealGrid M = magnitude(st.X);
    st.input_scale = grid_norm(M);
    if (!std::isfinite(st.input_scale))
        throw DivergenceError("input echo images to a non-finite field");
    st.Z1 = M;
    st.Z2 = M;
    st.D1 = RealGrid(na, nr, 0.0);
    st.D2 = RealGrid(na, nr, 0.0);

    NLTVConfig ncfg = cfg.nltv;
    if (use_nltv) {
        st.h0 = bandwidth_estimate(M);
        ncfg.filter_h = st.h0;
        st.weights = compute_weights(M, ncfg);
        st.P.assign(std::size_t(st.weights.edges()), 0.0);
    }

    const double diverge_at = 1e6 * std::max(st.input_scale, 1e-300);

    for (int t = 0; t < cfg.layers; ++t) {
        const LayerParams& p = cfg.layer(t);
        ComplexImage Xprev = st.X;
        RealGrid Z1prev = st.Z1, Z2prev = st.Z2;

        st.X = x_update(st, plan, echo, mask, p.rho, cfg.mode);
        M = magnitude(st.X);
        const double m_norm = grid_norm(M);
        if (!(m_norm <= diverge_at)) // non-finite norms abort too
            throw DivergenceError("iterate norm exceeded 1e6x input scale");

        if (nc) {
            if (use_nltv) {
                double frac = cfg.layers > 1 ? double(t) / (cfg.layers - 1) : 0.0;
                ncfg.filter_h = st.h0 * std::pow(cfg.h_anneal_end, frac);
                NLWeights next = compute_weights(M, ncfg);
                st.P = carry_dual(st.P, st.weights, next);
                st.weights = std::move(next);
                RealGrid v(na, nr);
                for (std::size_t k = 0; k < v.size(); ++k)
                    v.data[k] = M.data[k] + st.D1.data[k];
                st.Z1 = nltv_prox(v, p.lambda_nltv, p.tau, st.weights, st.P,
                                  cfg.inner_iters);
            } else {
                for (std::size_t k = 0; k < st.Z1.size(); ++k)
                    st.Z1.data[k] = std::abs(M.data[k] + st.D1.data[k]);
            }
            for (std::size_t k = 0; k < st.D1.size(); ++k)
                st.D1.data[k] += M.data[k] - st.Z1.data[k];
        }

        RealGrid v2(na, nr);
        for (std::size_t k = 0; k < v2.size(); ++k)
            v2.data[k] = M.data[k] + st.D2.data[k];
        st.Z2 = cfg.mode == SolverMode::L1 ? soft_threshold(v2, p.delta)
                                           : gmc_threshold(v2, p.delta, p.theta);
        for (std::size_t k = 0; k < st.D2.size(); ++k)
            st.D2.data[k] += M.data[k] - st.Z2.data[k];

        double primal2 = diff_norm2(M, st.Z2);
        double dual2 = diff_norm2(st.Z2, Z2prev);
        if (nc) {
            primal2 += diff_norm2(M, st.Z1);
            dual2 += diff_norm2(st.Z1, Z1prev);
        }
        st.primal_history.push_back(std::sqrt(primal2));
        st.dual_history.push_back(p.rho * std::sqrt(dual2));

        // Diagnostic objective: masked data fit + the active penalty scales.
        ComplexImage resid = inverse_image(plan, st.X);
        double fit = 0.0;
        for (int i = 0; i < na; ++i)
            for (int j = 0; j < nr; ++j)
                if (mask.indicator(i, j) > 0.0)
                    fit += std::norm(echo.at(i, j) - resid.at(i, j));
        double obj = 0.5 * fit;
        if (use_nltv && p.lambda_nltv > 0.0)
            obj += p.lambda_nltv * nltv_energy(M, st.weights);
        for (double m : M.data) obj += p.delta * std::abs(m);
        st.objective_history.push_back(obj);

        st.iteration = t + 1;

        if (!cfg.fixed_depth && cfg.stop_tol > 0.0) {
            double num = 0.0, den = 0.0;
            for (std::size_t k = 0; k < st.X.data.size(); ++k) {
                num += std::norm(st.X.data[k] - Xprev.data[k]);
                den += std::norm(Xprev.data[k]);
            }
            if (den > 0.0 && std::sqrt(num / den) < cfg.stop_tol) break;
        }
    }
    ComplexImage out = st.X;
    return {std::move(out), std::move(st)};
}

std::pair<double, double> residuals(const SolverState& state) {
    if (state.iteration < 1 || state.primal_history.empty())
        throw UsageError("residuals requested before the first iteration");
    return {state.primal_history.back(), state.dual_history.back()};
}

std::string residual_csv(const SolverState& state) {
    std::ostringstream os;
    os << "iteration,primal,dual,objective\n";
    os << std::setprecision(10);
    for (std::size_t i = 0; i < state.primal_history.size(); ++i)
        os << (i + 1) << "," << state.primal_history[i] << ","
           << state.dual_history[i] << "," << state.objective_history[i]
           << "\n";
    return os.str();
}

} // namespace sphr
