#include "sphr/metrics.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace sphr {

namespace {
constexpr double kLookFactor = 0.5227;

void region_stats(const RealGrid& img, const Region& reg, double& mu,
                  double& sigma) {
    reg.validate(img.rows, img.cols);
    double acc = 0.0;
    for (int i = reg.row0; i < reg.row0 + reg.rows; ++i)
        for (int j = reg.col0; j < reg.col0 + reg.cols; ++j)
            acc += img.at(i, j);
    mu = acc / reg.area();
    double var = 0.0;
    for (int i = reg.row0; i < reg.row0 + reg.rows; ++i)
        for (int j = reg.col0; j < reg.col0 + reg.cols; ++j) {
            double d = img.at(i, j) - mu;
            var += d * d;
        }
    sigma = std::sqrt(var / reg.area());
}

void check_dims(const RealGrid& a, const RealGrid& b, const char* what) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw UsageError(std::string(what) + ": dimension mismatch");
}
} // namespace

void Region::validate(int img_rows, int img_cols) const {
    if (rows <= 0 || cols <= 0 || row0 < 0 || col0 < 0 ||
        row0 + rows > img_rows || col0 + cols > img_cols)
        throw UsageError("region out of image bounds");
    if (area() < 16) throw UsageError("region area must be at least 16 pixels");
}

double enl(const RealGrid& img, const Region& reg) {
    double mu, sigma;
    region_stats(img, reg, mu, sigma);
    if (sigma == 0.0) return std::numeric_limits<double>::infinity();
    double r = kLookFactor * mu / sigma;
    return r * r;
}

double radiometric_resolution(const RealGrid& img, const Region& reg) {
    double mu, sigma;
    region_stats(img, reg, mu, sigma);
    if (mu <= 0.0) throw DataError("radiometric resolution of a zero-mean region");
    return 10.0 * std::log10((kLookFactor * mu + sigma) / (kLookFactor * mu));
}

namespace {
double gradient_sum(const RealGrid& g) {
    double acc = 0.0;
    for (int i = 0; i + 1 < g.rows; ++i)
        for (int j = 0; j + 1 < g.cols; ++j) {
            double dh = g.at(i, j + 1) - g.at(i, j);
            double dv = g.at(i + 1, j) - g.at(i, j);
            acc += std::sqrt(dh * dh + dv * dv);
        }
    return acc;
}
} // namespace

double esi(const RealGrid& recon, const RealGrid& label) {
    check_dims(recon, label, "esi");
    double den = gradient_sum(label);
    if (den == 0.0) throw DataError("label has zero gradient energy");
    return gradient_sum(recon) / den;
}

double psnr(const RealGrid& recon, const RealGrid& label) {
    check_dims(recon, label, "psnr");
    double peak2 = 0.0, err = 0.0;
    for (std::size_t k = 0; k < recon.size(); ++k) {
        peak2 = std::max(peak2, recon.data[k] * recon.data[k]);
        double d = recon.data[k] - label.data[k];
        err += d * d;
    }
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak2 / err);
}

double psnr_conventional(const RealGrid& recon, const RealGrid& label) {
    check_dims(recon, label, "psnr");
    double peak = 0.0, err = 0.0;
    for (std::size_t k = 0; k < recon.size(); ++k) {
        peak = std::max(peak, std::abs(label.data[k]));
        double d = recon.data[k] - label.data[k];
        err += d * d;
    }
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    double mse = err / double(recon.size());
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const RealGrid& a, const RealGrid& b) {
    check_dims(a, b, "ssim");
    double peak = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        peak = std::max({peak, std::abs(a.data[k]), std::abs(b.data[k])});
    double scale = (peak > 0.0) ? 1.0 / peak : 1.0;

    const double n = double(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        ma += a.data[k] * scale;
        mb += b.data[k] * scale;
    }
    ma /= n;
    mb /= n;
    double va = 0.0, vb = 0.0, cov = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        double da = a.data[k] * scale - ma;
        double db = b.data[k] * scale - mb;
        va += da * da;
        vb += db * db;
        cov += da * db;
    }
    va /= n;
    vb /= n;
    cov /= n;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    return ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
           ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

std::string metric_cell(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

} // namespace sphr
