#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sphr/core.hpp"
#include "sphr/datagen.hpp"
#include "sphr/operators.hpp"
#include "sphr/solver.hpp"

#include <cmath>
#include <complex>
#include <random>
#include <sstream>
#include <vector>

using namespace sphr;

namespace {

RadarParams small_grid_params() {
    RadarParams p;
    p.pulse_width = 6e-8;
    p.chirp_rate = 2.5e15;
    return p;
}

[[maybe_unused]] double cnorm(const ComplexImage& x) {
    double s = 0.0;
    for (const cplx& v : x.data) s += std::norm(v);
    return std::sqrt(s);
}

double rel_err(const ComplexImage& a, const ComplexImage& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.data.size(); ++k) {
        num += std::norm(a.data[k] - b.data[k]);
        den += std::norm(b.data[k]);
    }
    return std::sqrt(num / den);
}

LayerParams identity_params() {
    LayerParams p;
    p.rho = 0.5;
    p.lambda_nltv = 0.0;
    p.delta = 1e-300; // firm threshold is exact identity this far below data scale
    p.theta = 4.0;
    p.tau = 0.2;
    return p;
}

// Dense complex linear solve by Gaussian elimination with partial pivoting.
std::vector<cplx> dense_solve(std::vector<cplx> A, std::vector<cplx> b, int n) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[r * n + col]) > std::abs(A[piv * n + col])) piv = r;
        if (piv != col) {
            for (int c = 0; c < n; ++c) std::swap(A[col * n + c], A[piv * n + c]);
            std::swap(b[col], b[piv]);
        }
        cplx d = A[col * n + col];
        REQUIRE(std::abs(d) > 0.0);
        for (int r = col + 1; r < n; ++r) {
            cplx f = A[r * n + col] / d;
            if (f == cplx(0.0, 0.0)) continue;
            for (int c = col; c < n; ++c) A[r * n + c] -= f * A[col * n + c];
            b[r] -= f * b[col];
        }
    }
    std::vector<cplx> x(n);
    for (int r = n - 1; r >= 0; --r) {
        cplx acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= A[r * n + c] * x[c];
        x[r] = acc / A[r * n + r];
    }
    return x;
}

} // namespace

TEST_CASE("solver config validation") {
    SolverConfig cfg;
    cfg.params.push_back(identity_params());
    CHECK_NOTHROW(cfg.validate());

    SolverConfig bad = cfg;
    bad.layers = 0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = cfg;
    bad.params.clear();
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = cfg;
    bad.params.assign(3, identity_params()); // layers = 50
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = cfg;
    bad.inner_iters = 0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = cfg;
    bad.h_anneal_end = 0.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = cfg;
    bad.params[0].rho = 1.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("x_update degenerates to the matched filter as rho vanishes") {
    OperatorPlan plan(small_grid_params(), 16, 16);
    SceneSpec spec;
    spec.rows = spec.cols = 16;
    spec.max_size = 8;
    spec.seed = 1;
    ComplexImage echo = make_echo(plan, make_scene(spec).scene);

    SolverState st;
    st.X = ComplexImage{16, 16};
    st.Z1 = RealGrid(16, 16, 0.0);
    st.Z2 = RealGrid(16, 16, 0.0);
    st.D1 = RealGrid(16, 16, 0.0);
    st.D2 = RealGrid(16, 16, 0.0);
    SamplingMask full = SamplingMask::all_kept(16, 16);

    ComplexImage out = x_update(st, plan, echo, full, 1e-9, SolverMode::NLTV_NC);
    ComplexImage mf = image(plan, echo);
    CHECK(rel_err(out, mf) < 1e-6);

    CHECK_THROWS_AS(x_update(st, plan, echo, full, 0.0, SolverMode::NLTV_NC),
                    UsageError);
    CHECK_THROWS_AS(x_update(st, plan, echo, full, 1.0, SolverMode::NLTV_NC),
                    UsageError);
}

TEST_CASE("x_update pull-back path: zero echo with constant auxiliaries") {
    OperatorPlan plan(small_grid_params(), 16, 16);
    const double c = 0.7, rho = 0.4;
    SolverState st;
    st.X = ComplexImage{16, 16}; // zero: the re-phasing falls back to unity
    st.Z1 = RealGrid(16, 16, c);
    st.Z2 = RealGrid(16, 16, c);
    st.D1 = RealGrid(16, 16, 0.0);
    st.D2 = RealGrid(16, 16, 0.0);
    ComplexImage zero_echo{16, 16};
    SamplingMask full = SamplingMask::all_kept(16, 16);

    ComplexImage out =
        x_update(st, plan, zero_echo, full, rho, SolverMode::NLTV_NC);
    const double expect = 2.0 * rho * c / (1.0 + 2.0 * rho);
    for (const cplx& v : out.data) {
        CHECK(v.real() == doctest::Approx(expect).epsilon(1e-10));
        CHECK(std::abs(v.imag()) < 1e-12);
    }
}

TEST_CASE("x_update agrees with the dense normal-equation minimizer") {
    const int n = 16, dim = n * n;
    RadarParams rp = small_grid_params();
    OperatorPlan plan(rp, n, n);

    // Dense matrix of the observation operator, column by column. Solving
    // the regularized normal equation with it is an independent check of
    // the closed-form diagonal solve inside x_update.
    std::vector<cplx> Phi(std::size_t(dim) * dim);
    for (int c = 0; c < dim; ++c) {
        ComplexImage e{n, n};
        e.data[c] = cplx(1.0, 0.0);
        ComplexImage col = inverse_image(plan, e);
        for (int r = 0; r < dim; ++r) Phi[std::size_t(r) * dim + c] = col.data[r];
    }

    SceneSpec spec;
    spec.rows = spec.cols = n;
    spec.max_size = 8;
    spec.seed = 9;
    Scene sc = make_scene(spec);
    ComplexImage y = make_echo(plan, sc.scene);
    y = add_noise(y, 10.0, 5);

    SamplingMask mask = make_mask(n, n, 0.125, 0.125, 3);
    ComplexImage ym = apply_mask(mask, y);

    SolverState st;
    st.X = image(plan, ym);
    RealGrid M = magnitude(st.X);
    st.Z1 = M;
    st.Z2 = M;
    st.D1 = RealGrid(n, n, 0.0);
    st.D2 = RealGrid(n, n, 0.0);
    // Perturb the auxiliaries so the consensus term is not a fixed point.
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ud(-0.2, 0.2);
    for (std::size_t k = 0; k < M.size(); ++k) {
        st.Z1.data[k] = std::max(0.0, st.Z1.data[k] * (1.0 + ud(rng)));
        st.Z2.data[k] = std::max(0.0, st.Z2.data[k] * (1.0 + ud(rng)));
        st.D1.data[k] = 0.1 * ud(rng);
        st.D2.data[k] = 0.1 * ud(rng);
    }
    const double rho = 0.5;

    ComplexImage fast = x_update(st, plan, y, mask, rho, SolverMode::NLTV_NC);

    // Oracle: (Phi^H M Phi + 2 rho I) x = Phi^H M y + rho sum(Z - D) phase
    std::vector<double> mrow(dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) mrow[i * n + j] = mask.indicator(i, j);
    auto phi = [&](int r, int c) { return Phi[std::size_t(r) * dim + c]; };
    std::vector<cplx> A(std::size_t(dim) * dim, cplx(0.0, 0.0));
    for (int c1 = 0; c1 < dim; ++c1)
        for (int c2 = 0; c2 < dim; ++c2) {
            cplx acc(0.0, 0.0);
            for (int r = 0; r < dim; ++r)
                if (mrow[r] > 0.0) acc += std::conj(phi(r, c1)) * phi(r, c2);
            A[std::size_t(c1) * dim + c2] = acc;
        }
    for (int c = 0; c < dim; ++c) A[std::size_t(c) * dim + c] += 2.0 * rho;
    std::vector<cplx> rhs(dim);
    for (int c = 0; c < dim; ++c) {
        cplx acc(0.0, 0.0);
        for (int r = 0; r < dim; ++r)
            if (mrow[r] > 0.0) acc += std::conj(phi(r, c)) * y.data[r];
        double sum = (st.Z1.data[c] - st.D1.data[c]) +
                     (st.Z2.data[c] - st.D2.data[c]);
        double mag = std::abs(st.X.data[c]);
        cplx phase = mag > 0.0 ? st.X.data[c] / mag : cplx(1.0, 0.0);
        rhs[c] = acc + rho * sum * phase;
    }
    std::vector<cplx> xstar = dense_solve(std::move(A), std::move(rhs), dim);

    ComplexImage oracle{n, n};
    oracle.data.assign(xstar.begin(), xstar.end());
    CHECK(rel_err(fast, oracle) < 5e-2);
}

TEST_CASE("identity proxes leave the matched-filter warm start fixed") {
    OperatorPlan plan(small_grid_params(), 24, 24);
    SceneSpec spec;
    spec.rows = spec.cols = 24;
    spec.max_size = 10;
    spec.seed = 2;
    ComplexImage echo = make_echo(plan, make_scene(spec).scene);
    echo = add_noise(echo, 5.0, 11);
    SamplingMask full = SamplingMask::all_kept(24, 24);
    ComplexImage mf = image(plan, echo);

    for (SolverMode mode : {SolverMode::NLTV_NC, SolverMode::L1}) {
        SolverConfig cfg;
        cfg.layers = 3;
        cfg.params.push_back(identity_params());
        cfg.mode = mode;
        cfg.stop_tol = 0.0;
        auto [X, st] = admm_solve(echo, plan, full, cfg);
        CHECK(rel_err(X, mf) < 1e-12);
        auto [primal, dual] = residuals(st);
        CHECK(primal < 1e-10);
        CHECK(dual < 1e-10);
    }
}

TEST_CASE("multiplier update is exactly D += |X| - Z after one layer") {
    OperatorPlan plan(small_grid_params(), 16, 16);
    SceneSpec spec;
    spec.rows = spec.cols = 16;
    spec.max_size = 8;
    spec.seed = 6;
    ComplexImage echo = make_echo(plan, make_scene(spec).scene);
    echo = add_noise(echo, 5.0, 3);
    SamplingMask full = SamplingMask::all_kept(16, 16);

    SolverConfig cfg;
    cfg.layers = 1;
    LayerParams p = identity_params();
    p.lambda_nltv = 0.0;
    p.delta = 0.05;
    cfg.params.push_back(p);
    cfg.stop_tol = 0.0;

    auto [X, st] = admm_solve(echo, plan, full, cfg);
    RealGrid M = magnitude(X);
    for (std::size_t k = 0; k < M.size(); ++k) {
        CHECK(st.D2.data[k] ==
              doctest::Approx(M.data[k] - st.Z2.data[k]).epsilon(1e-14));
        CHECK(st.D1.data[k] ==
              doctest::Approx(M.data[k] - st.Z1.data[k]).epsilon(1e-14));
    }
    auto [primal, dual] = residuals(st);
    CHECK(primal > 0.0); // thresholding bites, so the split is not stationary
}

TEST_CASE("L1 mode applies an exact soft threshold") {
    OperatorPlan plan(small_grid_params(), 16, 16);
    SceneSpec spec;
    spec.rows = spec.cols = 16;
    spec.max_size = 8;
    spec.seed = 8;
    ComplexImage echo = make_echo(plan, make_scene(spec).scene);
    SamplingMask full = SamplingMask::all_kept(16, 16);

    SolverConfig cfg;
    cfg.layers = 1;
    LayerParams p = identity_params();
    p.delta = 0.07;
    cfg.params.push_back(p);
    cfg.mode = SolverMode::L1;
    cfg.stop_tol = 0.0;

    auto [X, st] = admm_solve(echo, plan, full, cfg);
    RealGrid M = magnitude(X);
    for (std::size_t k = 0; k < M.size(); ++k) {
        double v = M.data[k] + 0.0; // D2 was zero entering the layer
        double want = v > p.delta ? v - p.delta : 0.0;
        CHECK(st.Z2.data[k] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("masked point target: peak survives, aliasing energy drops") {
    const int n = 32;
    OperatorPlan plan(RadarParams{}, n, n);
    ComplexImage scene{n, n};
    scene.at(12, 19) = cplx(1.0, 0.0);
    ComplexImage echo = inverse_image(plan, scene);
    SamplingMask mask = make_mask(n, n, 0.2, 0.0, 4);
    ComplexImage ym = apply_mask(mask, echo);
    ComplexImage mf = image(plan, ym);

    SolverConfig cfg;
    cfg.layers = 10;
    cfg.fixed_depth = true;
    LayerParams p;
    p.rho = 0.5;
    p.lambda_nltv = 0.0; // isolated point: thresholding does the work
    p.tau = 0.2;
    p.delta = 0.05;
    p.theta = 4.0;
    cfg.params.push_back(p);
    auto [X, st] = admm_solve(ym, plan, mask, cfg);

    RealGrid M = magnitude(X);
    int pi = 0, pj = 0;
    double peak = -1.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (M.at(i, j) > peak) {
                peak = M.at(i, j);
                pi = i;
                pj = j;
            }
    CHECK(pi == 12);
    CHECK(pj == 19);

    auto off_peak = [&](const RealGrid& g) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != 12 || j != 19) s += g.at(i, j) * g.at(i, j);
        return s;
    };
    RealGrid Mf = magnitude(mf);
    CHECK(off_peak(M) < off_peak(Mf));
    CHECK(off_peak(M) < 0.2 * off_peak(Mf));
}

TEST_CASE("classic stop tolerance halts a stationary run early") {
    OperatorPlan plan(small_grid_params(), 16, 16);
    SceneSpec spec;
    spec.rows = spec.cols = 16;
    spec.max_size = 8;
    spec.seed = 4;
    ComplexImage echo = make_echo(plan, make_scene(spec).scene);
    SamplingMask full = SamplingMask::all_kept(16, 16);

    SolverConfig cfg;
    cfg.layers = 40;
    cfg.params.push_back(identity_params()); // fixed point: change is zero
    cfg.stop_tol = 1e-4;
    auto [X, st] = admm_solve(echo, plan, full, cfg);
    CHECK(st.iteration == 1);

    cfg.fixed_depth = true;
    auto [X2, st2] = admm_solve(echo, plan, full, cfg);
    CHECK(st2.iteration == 40);
}

TEST_CASE("residual machinery: histories, csv, preconditions") {
    SolverState empty;
    CHECK_THROWS_AS(residuals(empty), UsageError);

    OperatorPlan plan(small_grid_params(), 16, 16);
    SceneSpec spec;
    spec.rows = spec.cols = 16;
    spec.max_size = 8;
    spec.seed = 12;
    ComplexImage echo = make_echo(plan, make_scene(spec).scene);
    echo = add_noise(echo, 5.0, 2);
    SamplingMask full = SamplingMask::all_kept(16, 16);

    SolverConfig cfg;
    cfg.layers = 5;
    cfg.fixed_depth = true;
    LayerParams p = identity_params();
    p.delta = 0.05;
    p.lambda_nltv = 0.02;
    cfg.params.push_back(p);
    cfg.inner_iters = 5;
    auto [X, st] = admm_solve(echo, plan, full, cfg);
    CHECK(st.primal_history.size() == 5);
    CHECK(st.dual_history.size() == 5);
    CHECK(st.objective_history.size() == 5);
    for (double v : st.objective_history) CHECK(std::isfinite(v));

    std::string csv = residual_csv(st);
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    CHECK(line == "iteration,primal,dual,objective");
    int rows = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 5);
}

TEST_CASE("non-finite input aborts with a divergence error") {
    OperatorPlan plan(small_grid_params(), 16, 16);
    ComplexImage echo{16, 16};
    echo.at(0, 0) = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
    SamplingMask full = SamplingMask::all_kept(16, 16);
    SolverConfig cfg;
    cfg.layers = 2;
    cfg.params.push_back(identity_params());
    CHECK_THROWS_AS(admm_solve(echo, plan, full, cfg), DivergenceError);
}

TEST_CASE("layer-varying parameters are consumed in order") {
    OperatorPlan plan(small_grid_params(), 16, 16);
    SceneSpec spec;
    spec.rows = spec.cols = 16;
    spec.max_size = 8;
    spec.seed = 13;
    ComplexImage echo = make_echo(plan, make_scene(spec).scene);
    echo = add_noise(echo, 5.0, 6);
    SamplingMask full = SamplingMask::all_kept(16, 16);

    SolverConfig cfg;
    cfg.layers = 3;
    cfg.fixed_depth = true;
    for (int t = 0; t < 3; ++t) {
        LayerParams p = identity_params();
        p.delta = 0.01 * (t + 1);
        cfg.params.push_back(p);
    }
    auto [Xv, stv] = admm_solve(echo, plan, full, cfg);

    // A fixed-parameter run with the LAST layer's delta differs: the
    // schedule matters, so earlier layers were not using the same params.
    SolverConfig fixed = cfg;
    fixed.params.assign(1, cfg.params[2]);
    auto [Xf, stf] = admm_solve(echo, plan, full, fixed);
    CHECK(rel_err(Xv, Xf) > 1e-8);
}
