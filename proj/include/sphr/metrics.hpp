#pragma once

#include "sphr/core.hpp"

#include <string>

namespace sphr {

// Rectangular uniform-region selector for speckle statistics.
struct Region {
    int row0 = 0;
    int col0 = 0;
    int rows = 0;
    int cols = 0;

    int area() const { return rows * cols; }
    // Throws UsageError unless strictly inside the image with area >= 16.
    void validate(int img_rows, int img_cols) const;
};

// Equivalent number of looks (0.5227 * mean / stddev)^2 over the region.
// A constant region returns +infinity.
double enl(const RealGrid& img, const Region& reg);

// Radiometric resolution 10*log10((0.5227*mu + sigma) / (0.5227*mu)) in dB.
// Throws DataError on a zero-mean region.
double radiometric_resolution(const RealGrid& img, const Region& reg);

// Edge saving index: ratio of summed gradient magnitudes
// sqrt(dh^2 + dv^2), reconstruction over label. Throws DataError when the
// label has no gradient energy.
double esi(const RealGrid& recon, const RealGrid& label);

// Peak-form PSNR: 10*log10(max(recon^2) / ||recon - label||_F^2), the
// error energy left unnormalized by pixel count. Identical inputs give
// +infinity.
double psnr(const RealGrid& recon, const RealGrid& label);

// Conventional PSNR for comparability: 10*log10(peak(label)^2 / MSE),
// clearly separated from the peak-form variant above.
double psnr_conventional(const RealGrid& recon, const RealGrid& label);

// Global single-window SSIM with C1 = 0.01^2, C2 = 0.03^2 on images jointly
// normalized by their common maximum (dynamic range L = 1).
double ssim(const RealGrid& a, const RealGrid& b);

// CSV cell formatting: finite values with full precision, infinities as
// the sentinel "inf".
std::string metric_cell(double v);

} // namespace sphr
