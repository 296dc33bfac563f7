#include "sphr/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace sphr {

RealGrid magnitude(const ComplexImage& img) {
    RealGrid out(img.rows, img.cols);
    for (std::size_t i = 0; i < img.size(); ++i) out.data[i] = std::abs(img.data[i]);
    return out;
}

double frobenius(const ComplexImage& img) {
    double s = 0.0;
    for (const cplx& v : img.data) s += std::norm(v);
    return std::sqrt(s);
}

double frobenius(const RealGrid& g) {
    double s = 0.0;
    for (double v : g.data) s += v * v;
    return std::sqrt(s);
}

double median_of(const RealGrid& g) {
    if (g.data.empty()) throw DataError("median of empty grid");
    std::vector<double> tmp(g.data);
    std::size_t mid = tmp.size() / 2;
    std::nth_element(tmp.begin(), tmp.begin() + mid, tmp.end());
    double hi = tmp[mid];
    if (tmp.size() % 2 == 1) return hi;
    double lo = *std::max_element(tmp.begin(), tmp.begin() + mid);
    return 0.5 * (lo + hi);
}

double RadarParams::slant_range(double t_m) const {
    if (slant_range_fn) return slant_range_fn(t_m);
    return std::sqrt(nearest_range * nearest_range + velocity * velocity * t_m * t_m);
}

void RadarParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw UsageError(std::string("radar parameter must be positive: ") + name);
    };
    positive(velocity, "velocity");
    positive(track_length, "track_length");
    positive(scene_length, "scene_length");
    positive(pulse_width, "pulse_width");
    positive(wavelength, "wavelength");
    positive(chirp_rate, "chirp_rate");
    positive(nearest_range, "nearest_range");
    positive(light_speed, "light_speed");
    positive(prf, "prf");
    positive(sample_rate, "sample_rate");
    if (!(sliding_factor >= 0.0 && sliding_factor <= 1.0))
        throw UsageError("sliding_factor must lie in [0,1]");
}

void RadarParams::validate_for_grid(int n_azimuth, int n_range) const {
    validate();
    if (n_azimuth <= 0 || n_range <= 0)
        throw UsageError("grid dimensions must be positive");
    if (pulse_width * sample_rate > double(n_range))
        throw UsageError("pulse does not fit the fast-time window: T_p * f_s > N_r");
}

bool SamplingMask::full() const {
    auto all = [](const std::vector<std::uint8_t>& v) {
        return std::all_of(v.begin(), v.end(), [](std::uint8_t k) { return k != 0; });
    };
    return all(azimuth_keep) && all(range_keep);
}

double SamplingMask::downsampling_rate() const {
    auto count = [](const std::vector<std::uint8_t>& v) {
        return double(std::count_if(v.begin(), v.end(),
                                    [](std::uint8_t k) { return k != 0; }));
    };
    double fa = count(azimuth_keep) / double(azimuth_keep.size());
    double fr = count(range_keep) / double(range_keep.size());
    return 1.0 - fa * fr;
}

SamplingMask SamplingMask::all_kept(int n_azimuth, int n_range) {
    SamplingMask m;
    m.azimuth_keep.assign(std::size_t(n_azimuth), 1);
    m.range_keep.assign(std::size_t(n_range), 1);
    return m;
}

void LayerParams::validate() const {
    if (!(rho > 0.0 && rho < 1.0)) throw UsageError("rho must lie in (0,1)");
    if (!(lambda_nltv >= 0.0)) throw UsageError("lambda_nltv must be nonnegative");
    if (!(tau > 0.0)) throw UsageError("tau must be positive");
    if (!(delta > 0.0)) throw UsageError("delta must be positive");
    if (!(theta > 1.0)) throw UsageError("theta must exceed 1");
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw DataError("image file truncated in header");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

} // namespace

void write_image(const ComplexImage& img, const std::string& path) {
    if (img.rows <= 0 || img.cols <= 0)
        throw UsageError("cannot write image with non-positive dimensions");
    if (img.data.size() != std::size_t(img.rows) * img.cols)
        throw DataError("image data length inconsistent with dimensions");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path);
    os.write("SPHC", 4);
    put_u32(os, kImageFormatVersion);
    put_u32(os, std::uint32_t(img.rows));
    put_u32(os, std::uint32_t(img.cols));
    std::vector<float> buf(img.size() * 2);
    for (std::size_t i = 0; i < img.size(); ++i) {
        buf[2 * i] = float(img.data[i].real());
        buf[2 * i + 1] = float(img.data[i].imag());
    }
    os.write(reinterpret_cast<const char*>(buf.data()),
             std::streamsize(buf.size() * sizeof(float)));
    if (!os) throw DataError("write failed: " + path);
}

ComplexImage read_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SPHC", 4) != 0)
        throw DataError("bad magic in image file: " + path);
    std::uint32_t version = get_u32(is);
    if (version != kImageFormatVersion)
        throw DataError("unsupported image format version in: " + path);
    std::uint32_t rows = get_u32(is);
    std::uint32_t cols = get_u32(is);
    if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
        throw DataError("implausible dimensions in image file: " + path);
    ComplexImage img{int(rows), int(cols)};
    std::vector<float> buf(img.size() * 2);
    is.read(reinterpret_cast<char*>(buf.data()),
            std::streamsize(buf.size() * sizeof(float)));
    if (std::size_t(is.gcount()) != buf.size() * sizeof(float))
        throw DataError("image payload truncated: " + path);
    for (std::size_t i = 0; i < img.size(); ++i) {
        img.data[i] = cplx(buf[2 * i], buf[2 * i + 1]);
        if (!std::isfinite(buf[2 * i]) || !std::isfinite(buf[2 * i + 1]))
            throw DataError("non-finite sample in image file: " + path);
    }
    return img;
}

void write_pgm(const RealGrid& g, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << "P5\n" << g.cols << " " << g.rows << "\n255\n";
    std::vector<unsigned char> row(std::size_t(g.cols));
    for (int i = 0; i < g.rows; ++i) {
        for (int j = 0; j < g.cols; ++j) {
            double v = std::clamp(g.at(i, j), 0.0, 255.0);
            row[std::size_t(j)] = static_cast<unsigned char>(std::lround(v));
        }
        os.write(reinterpret_cast<const char*>(row.data()), g.cols);
    }
    if (!os) throw DataError("write failed: " + path);
}

void write_text_file(const std::string& path, const std::string& payload) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw DataError("cannot open for writing: " + tmp);
        os << payload;
        if (!os) throw DataError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("atomic rename failed for: " + path);
}

} // namespace sphr
