#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sphr/core.hpp"
#include "sphr/operators.hpp"

#include <random>

using namespace sphr;

namespace {

ComplexImage random_image(int rows, int cols, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    ComplexImage z(rows, cols);
    for (cplx& v : z.data) v = cplx(nd(rng), nd(rng));
    return z;
}

cplx inner(const ComplexImage& a, const ComplexImage& b) {
    cplx acc(0.0, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        acc += std::conj(a.data[i]) * b.data[i];
    return acc;
}

double rel_err(const ComplexImage& got, const ComplexImage& want) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        num += std::norm(got.data[i] - want.data[i]);
        den += std::norm(want.data[i]);
    }
    return std::sqrt(num / den);
}

RadarParams small_grid_params() {
    RadarParams p;
    p.pulse_width = 6e-8;   // 12 samples at fs, fits a 16-bin window
    p.chirp_rate = 2.5e15;  // keeps the compressed pulse sharp
    return p;
}

} // namespace

TEST_CASE("round trip is the identity to machine precision") {
    RadarParams p;
    OperatorPlan plan(p, 64, 64);
    ComplexImage x = random_image(64, 64, 101);
    ComplexImage rt = image(plan, inverse_image(plan, x));
    CHECK(rel_err(rt, x) < 1e-12);
    ComplexImage rt2 = inverse_image(plan, image(plan, x));
    CHECK(rel_err(rt2, x) < 1e-12);
}

TEST_CASE("synthesis is the exact adjoint of imaging") {
    RadarParams p;
    OperatorPlan plan(p, 32, 48);
    ComplexImage x = random_image(32, 48, 7);
    ComplexImage y = random_image(32, 48, 8);
    cplx lhs = inner(x, image(plan, y));
    cplx rhs = inner(inverse_image(plan, x), y);
    CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-12);
}

TEST_CASE("both directions preserve energy") {
    RadarParams p;
    OperatorPlan plan(p, 48, 32);
    ComplexImage x = random_image(48, 32, 55);
    CHECK(frobenius(inverse_image(plan, x)) == doctest::Approx(frobenius(x)).epsilon(1e-12));
    CHECK(frobenius(image(plan, x)) == doctest::Approx(frobenius(x)).epsilon(1e-12));
}

TEST_CASE("imaging is linear") {
    RadarParams p;
    OperatorPlan plan(p, 16, 32);
    ComplexImage a = random_image(16, 32, 1);
    ComplexImage b = random_image(16, 32, 2);
    cplx alpha(0.3, -1.1);
    ComplexImage combo(16, 32);
    for (std::size_t i = 0; i < combo.size(); ++i)
        combo.data[i] = alpha * a.data[i] + b.data[i];
    ComplexImage lhs = image(plan, combo);
    ComplexImage ia = image(plan, a);
    ComplexImage ib = image(plan, b);
    for (std::size_t i = 0; i < lhs.size(); ++i)
        ib.data[i] += alpha * ia.data[i];
    CHECK(rel_err(lhs, ib) < 1e-12);
}

TEST_CASE("pulse-window validation rejects too-small grids") {
    RadarParams p; // Tp*fs = 20 > 16
    CHECK_THROWS_AS(OperatorPlan(p, 16, 16), UsageError);
    CHECK_NOTHROW(OperatorPlan(small_grid_params(), 16, 16));
}

TEST_CASE("identical parameters give bitwise-identical images") {
    RadarParams p = small_grid_params();
    OperatorPlan plan_a(p, 16, 16);
    OperatorPlan plan_b(p, 16, 16);
    ComplexImage y = random_image(16, 16, 99);
    ComplexImage ia = image(plan_a, y);
    ComplexImage ib = image(plan_b, y);
    for (std::size_t i = 0; i < ia.size(); ++i)
        CHECK(ia.data[i] == ib.data[i]);
}

TEST_CASE("dimension mismatches are usage errors") {
    RadarParams p;
    OperatorPlan plan(p, 32, 32);
    ComplexImage wrong(16, 32);
    CHECK_THROWS_AS(image(plan, wrong), UsageError);
    CHECK_THROWS_AS(inverse_image(plan, wrong), UsageError);
    SamplingMask m = SamplingMask::all_kept(16, 16);
    CHECK_THROWS_AS(apply_mask(m, wrong), UsageError);
}

TEST_CASE("mask zeroes dropped rows and columns only") {
    ComplexImage y = random_image(8, 8, 3);
    SamplingMask m = SamplingMask::all_kept(8, 8);
    m.azimuth_keep[2] = 0;
    m.range_keep[5] = 0;
    ComplexImage z = apply_mask(m, y);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            if (i == 2 || j == 5)
                CHECK(z.at(i, j) == cplx(0.0, 0.0));
            else
                CHECK(z.at(i, j) == y.at(i, j));
        }
}

TEST_CASE("dense observation matrix: adjoint consistency and column norms") {
    RadarParams p = small_grid_params();
    DenseObservation d = build_dense_observation(p, 16, 16);
    ComplexImage x = random_image(16, 16, 11);
    ComplexImage y = random_image(16, 16, 12);
    cplx lhs = inner(y, d.apply(x));
    cplx rhs = inner(d.apply_adjoint(y), x);
    CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-12);

    // circular pulse envelope keeps every column at equal energy
    std::size_t n = d.dim();
    double cmin = 1e300, cmax = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += std::norm(d.at(r, c));
        acc = std::sqrt(acc);
        cmin = std::min(cmin, acc);
        cmax = std::max(cmax, acc);
    }
    CHECK((cmax - cmin) / cmax < 0.05);
}

TEST_CASE("dense observation is capped at 1024 pixels") {
    RadarParams p;
    CHECK_THROWS_AS(build_dense_observation(p, 64, 64), UsageError);
    CHECK_NOTHROW(build_dense_observation(p, 32, 32));
}

TEST_CASE("point targets focus onto their own pixel") {
    RadarParams p = small_grid_params();
    const int n = 16;
    DenseObservation d = build_dense_observation(p, n, n);
    OperatorPlan plan(p, n, n);
    int pts[6][2] = {{8, 8}, {11, 6}, {2, 3}, {13, 14}, {1, 8}, {8, 1}};
    for (auto& pt : pts) {
        ComplexImage e(n, n);
        e.at(pt[0], pt[1]) = cplx(1.0, 0.0);
        ComplexImage img = image(plan, d.apply(e));
        int bi = -1, bj = -1;
        double best = -1.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (std::abs(img.at(i, j)) > best) {
                    best = std::abs(img.at(i, j));
                    bi = i; bj = j;
                }
        CHECK(bi == pt[0]);
        CHECK(bj == pt[1]);
    }
}

TEST_CASE("chain image matches the dense matched filter on random scenes") {
    RadarParams p = small_grid_params();
    const int n = 16;
    DenseObservation d = build_dense_observation(p, n, n);
    OperatorPlan plan(p, n, n);
    for (unsigned seed : {21u, 22u, 23u, 24u, 25u}) {
        ComplexImage x = random_image(n, n, seed);
        ComplexImage y = d.apply(x);
        RealGrid mf = magnitude(d.apply_adjoint(y));
        RealGrid ch = magnitude(image(plan, y));
        double dot = 0.0;
        for (std::size_t i = 0; i < mf.size(); ++i) dot += mf.data[i] * ch.data[i];
        double corr = dot / (frobenius(mf) * frobenius(ch));
        CHECK(corr > 0.95);
    }
}
