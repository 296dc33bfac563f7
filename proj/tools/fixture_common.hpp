// Shared evaluation fixture: randomized distributed-target scenes plus a
// deterministic uniform calibration patch whose interior serves as the
// uniform region for ENL / radiometric measurements. Used by the tuning
// harness and the acceptance runner so both see identical scenes.
#pragma once

#include "sphr/datagen.hpp"
#include "sphr/metrics.hpp"

#include <cmath>
#include <cstdint>
#include <optional>

namespace fixture {

inline sphr::SceneSpec scene_spec(std::uint64_t seed) {
    sphr::SceneSpec s;
    s.rows = s.cols = 128;
    s.min_targets = 6;
    s.max_targets = 10;
    s.min_size = 16;
    s.max_size = 48;
    s.min_reflectivity = 0.2;
    s.max_reflectivity = 1.0;
    s.background = 0.05;
    s.seed = seed;
    return s;
}

// Calibration patch: 34x34 uniform block of reflectivity 0.2 stamped over
// the random scene at a fixed location, with per-pixel phases drawn from
// the scene seed. Dim enough that single-look speckle keeps its ENL near 1.
constexpr int kPatchRow = 8, kPatchCol = 86, kPatchSize = 34;
constexpr double kPatchLevel = 0.2;

inline void stamp_patch(sphr::Scene& sc, std::uint64_t seed) {
    std::uint64_t s = seed ^ 0xA076'1D64'78BD'642Full;
    for (int i = kPatchRow; i < kPatchRow + kPatchSize; ++i)
        for (int j = kPatchCol; j < kPatchCol + kPatchSize; ++j) {
            s += 0x9E3779B97F4A7C15ull;
            std::uint64_t z = s;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
            z ^= z >> 31;
            double u = double(z >> 11) * 0x1.0p-53;
            double ph = 2.0 * 3.14159265358979323846 * u;
            sc.label.at(i, j) = kPatchLevel;
            sc.scene.at(i, j) = std::polar(kPatchLevel, ph);
        }
}

// 24x24 interior of the calibration patch (5px inset from its border).
inline sphr::Region patch_region() {
    return sphr::Region{kPatchRow + 5, kPatchCol + 5, 24, 24};
}

// First 24x24 all-background window (6px margin, stride 4), if any.
inline std::optional<sphr::Region> background_region(const sphr::RealGrid& label,
                                                     double bg) {
    const int W = 24, margin = 6, stride = 4;
    for (int i = margin; i + W <= label.rows - margin; i += stride)
        for (int j = margin; j + W <= label.cols - margin; j += stride) {
            bool ok = true;
            for (int a = i; a < i + W && ok; ++a)
                for (int b = j; b < j + W && ok; ++b)
                    if (label.at(a, b) != bg) ok = false;
            if (ok) return sphr::Region{i, j, W, W};
        }
    return std::nullopt;
}

} // namespace fixture
