#pragma once

// Synthetic data generation: piecewise-constant reflectivity scenes with
// coherent random phase, echo synthesis through the inverse imaging chain,
// receiver noise injection, random sampling masks, and a line-oriented
// on-disk dataset layout shared by the CLI tools.

#include "sphr/core.hpp"
#include "sphr/operators.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sphr {

// Recipe for one random scene. All randomness flows from `seed`.
struct SceneSpec {
    int rows = 128;
    int cols = 128;

    int min_targets = 3;
    int max_targets = 6;

    bool rectangles = true;
    bool disks = true;
    bool strips = true;

    // Per-axis extent of a target footprint, in pixels.
    int min_size = 8;
    int max_size = 48;

    double min_reflectivity = 0.2;
    double max_reflectivity = 1.0;

    double background = 0.05;

    std::uint64_t seed = 0;

    void validate() const;
};

struct Scene {
    ComplexImage scene; // label modulated by per-pixel uniform random phase
    RealGrid label;     // piecewise-constant magnitude ground truth
};

// Deterministic scene synthesis: same spec (seed included) gives a
// bit-identical result.
Scene make_scene(const SceneSpec& spec);

// Echo synthesis is exactly the inverse imaging chain.
ComplexImage make_echo(const OperatorPlan& plan, const ComplexImage& scene);

// Adds circular complex Gaussian noise scaled so that the realized
// signal-to-noise energy ratio equals snr_db exactly. An infinite snr_db
// returns the echo unchanged; a zero echo is a data error.
ComplexImage add_noise(const ComplexImage& echo, double snr_db,
                       std::uint64_t seed);

// Uniformly random kept sets with the exact requested per-axis cardinality:
// drop counts are round(drop * n). Fractions live in [0, 1).
SamplingMask make_mask(int n_azimuth, int n_range, double az_drop,
                       double rg_drop, std::uint64_t seed);

// Dataset directory layout:
//   root/scenes/NNNN.sphc   complex scene
//   root/labels/NNNN.sphc   real label stored with zero imaginary part
//   root/echoes/NNNN.sphc   echo after noise and mask
//   root/manifest.txt       key=value lines (global config + per-item seeds)
struct DatasetConfig {
    std::string root;
    int count = 20;
    SceneSpec scene;      // per-item seeds are derived from scene.seed
    double snr_db = 5.0;  // +inf keeps echoes clean
    double az_drop = 0.0;
    double rg_drop = 0.0;
    RadarParams radar;
    int threads = 1;
};

struct DatasetItem {
    int index = 0;
    std::uint64_t scene_seed = 0;
    std::uint64_t noise_seed = 0;
    std::uint64_t mask_seed = 0;
};

struct DatasetManifest {
    int count = 0;
    int rows = 0;
    int cols = 0;
    double snr_db = 0.0;
    double az_drop = 0.0;
    double rg_drop = 0.0;
    double downsampling_rate = 0.0; // dropped fraction, from actual counts
    std::vector<DatasetItem> items;
};

// Generates scenes/labels/echoes and the manifest. Returns the manifest.
// Items are independent and processed in parallel when threads > 1.
DatasetManifest write_dataset(const DatasetConfig& cfg);

DatasetManifest read_manifest(const std::string& root);

// Path of item i inside a dataset subdirectory ("scenes", "labels", "echoes").
std::string item_path(const std::string& root, const std::string& kind, int i);

// Rebuilds the sampling mask an item's echo was recorded through.
SamplingMask item_mask(const DatasetManifest& mf, const DatasetItem& item);

// Stable per-item stream derivation from a base seed (splitmix64 step).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

} // namespace sphr
