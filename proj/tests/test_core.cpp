#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sphr/core.hpp"

#include <cstdio>
#include <fstream>

using namespace sphr;

TEST_CASE("median: odd, even, constant") {
    RealGrid g(1, 5);
    double vals[5] = {5.0, 1.0, 3.0, 2.0, 4.0};
    for (int j = 0; j < 5; ++j) g.at(0, j) = vals[j];
    CHECK(median_of(g) == doctest::Approx(3.0));

    RealGrid e(2, 2);
    e.at(0, 0) = 1.0; e.at(0, 1) = 2.0; e.at(1, 0) = 3.0; e.at(1, 1) = 10.0;
    CHECK(median_of(e) == doctest::Approx(2.5));

    RealGrid c(3, 3, 7.0);
    CHECK(median_of(c) == doctest::Approx(7.0));
}

TEST_CASE("magnitude and frobenius agree with direct sums") {
    ComplexImage z(2, 3);
    double acc = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) {
            z.at(i, j) = cplx(i + 1.0, j - 1.0);
            acc += std::norm(z.at(i, j));
        }
    RealGrid m = magnitude(z);
    CHECK(m.at(1, 2) == doctest::Approx(std::sqrt(4.0 + 1.0)));
    CHECK(frobenius(z) == doctest::Approx(std::sqrt(acc)));
    CHECK(frobenius(m) == doctest::Approx(std::sqrt(acc)));
}

TEST_CASE("image file round trip preserves values to f32 precision") {
    ComplexImage z(5, 4);
    for (std::size_t i = 0; i < z.size(); ++i)
        z.data[i] = cplx(std::sin(0.7 * i) * 1e3, std::cos(1.3 * i) * 1e-3);
    const char* path = "tmp_roundtrip.sphc";
    write_image(z, path);
    ComplexImage r = read_image(path);
    REQUIRE(r.rows == 5);
    REQUIRE(r.cols == 4);
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(r.data[i].real() == doctest::Approx(z.data[i].real()).epsilon(1e-6));
        CHECK(r.data[i].imag() == doctest::Approx(z.data[i].imag()).epsilon(1e-6));
    }
    std::remove(path);
}

TEST_CASE("image file header is 16 bytes plus 8 bytes per pixel") {
    ComplexImage z(1, 1);
    z.at(0, 0) = cplx(1.0, -2.0);
    const char* path = "tmp_onepixel.sphc";
    write_image(z, path);
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    CHECK(long(f.tellg()) == 24);
    f.seekg(0);
    char magic[4];
    f.read(magic, 4);
    CHECK(std::string(magic, 4) == "SPHC");
    std::remove(path);
}

TEST_CASE("reader rejects bad magic, truncation, absent file") {
    const char* path = "tmp_bad.sphc";
    {
        std::ofstream f(path, std::ios::binary);
        f.write("NOPE\0\0\0\0", 8);
    }
    CHECK_THROWS_AS(read_image(path), DataError);
    ComplexImage z(2, 2);
    write_image(z, path);
    {
        // chop the last pixel
        std::ifstream in(path, std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(all.data(), std::streamsize(all.size() - 8));
    }
    CHECK_THROWS_AS(read_image(path), DataError);
    std::remove(path);
    CHECK_THROWS_AS(read_image(path), DataError);
}

TEST_CASE("pgm writer emits valid 8-bit P5, clamping display levels") {
    RealGrid g(2, 2);
    g.at(0, 0) = -3.0; g.at(0, 1) = 1.4; g.at(1, 0) = 2.0; g.at(1, 1) = 300.0;
    const char* path = "tmp_img.pgm";
    write_pgm(g, path);
    std::ifstream f(path, std::ios::binary);
    std::string tok;
    f >> tok;
    CHECK(tok == "P5");
    int w, h, maxv;
    f >> w >> h >> maxv;
    CHECK(w == 2);
    CHECK(h == 2);
    CHECK(maxv == 255);
    f.get(); // single whitespace after header
    unsigned char px[4];
    f.read(reinterpret_cast<char*>(px), 4);
    CHECK(int(px[0]) == 0);   // clamped from below
    CHECK(int(px[1]) == 1);   // rounded
    CHECK(int(px[3]) == 255); // clamped from above
    std::remove(path);
}

TEST_CASE("radar validation accepts defaults, rejects non-physical values") {
    RadarParams p;
    CHECK_NOTHROW(p.validate());
    RadarParams bad = p;
    bad.prf = 0.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = p;
    bad.sliding_factor = 1.5;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = p;
    bad.wavelength = -1.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("pulse must fit the fast-time window") {
    RadarParams p; // Tp*fs = 20 samples
    CHECK_NOTHROW(p.validate_for_grid(32, 32));
    CHECK_THROWS_AS(p.validate_for_grid(16, 16), UsageError);
    RadarParams small = p;
    small.pulse_width = 6e-8; // 12 samples
    CHECK_NOTHROW(small.validate_for_grid(16, 16));
}

TEST_CASE("slant range uses hyperbolic model unless overridden") {
    RadarParams p;
    double t = 0.25;
    double want = std::sqrt(p.nearest_range * p.nearest_range +
                            p.velocity * t * p.velocity * t);
    CHECK(p.slant_range(t) == doctest::Approx(want));
    p.slant_range_fn = [](double) { return 42.0; };
    CHECK(p.slant_range(t) == doctest::Approx(42.0));
}

TEST_CASE("sampling mask indicator and downsampling rate") {
    SamplingMask m = SamplingMask::all_kept(4, 5);
    CHECK(m.full());
    CHECK(m.downsampling_rate() == doctest::Approx(0.0));
    CHECK(m.indicator(2, 3) == 1.0);
    m.azimuth_keep[1] = 0;
    m.range_keep[0] = 0;
    CHECK_FALSE(m.full());
    CHECK(m.indicator(1, 3) == 0.0);
    CHECK(m.indicator(2, 0) == 0.0);
    CHECK(m.indicator(2, 3) == 1.0);
    // DSR = 1 - (3/4)*(4/5)
    CHECK(m.downsampling_rate() == doctest::Approx(1.0 - 0.75 * 0.8));
}

TEST_CASE("layer parameter invariants") {
    LayerParams lp;
    lp.lambda_nltv = 0.1;
    lp.delta = 0.05;
    CHECK_NOTHROW(lp.validate());
    LayerParams bad = lp;
    bad.rho = 1.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = lp;
    bad.rho = 0.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = lp;
    bad.lambda_nltv = -1e-9;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = lp;
    bad.theta = 1.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = lp;
    bad.delta = 0.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad = lp;
    bad.tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("atomic text write leaves no temp file behind") {
    const char* path = "tmp_manifest.json";
    write_text_file(path, "{\"k\":1}\n");
    std::ifstream f(path);
    std::string got((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
    CHECK(got == "{\"k\":1}\n");
    std::remove(path);
}
