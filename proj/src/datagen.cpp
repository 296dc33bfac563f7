#include "sphr/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace sphr {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

// Chooses k distinct indices out of n (partial Fisher-Yates), marks them 0.
std::vector<std::uint8_t> keep_vector(int n, int drop, std::mt19937_64& rng) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    std::vector<std::uint8_t> keep(n, 1);
    for (int i = 0; i < drop; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
        keep[idx[i]] = 0;
    }
    return keep;
}

enum class Kind { Rectangle, Disk, Strip };

void paint_rect(RealGrid& g, int r0, int c0, int h, int w, double level) {
    for (int i = r0; i < r0 + h; ++i)
        for (int j = c0; j < c0 + w; ++j) g.at(i, j) = level;
}

} // namespace

void SceneSpec::validate() const {
    if (rows <= 0 || cols <= 0) throw UsageError("scene dims must be positive");
    if (min_targets < 0 || max_targets < min_targets)
        throw UsageError("target count range is empty");
    if (!rectangles && !disks && !strips)
        throw UsageError("at least one target kind must be enabled");
    if (min_size < 1 || max_size < min_size)
        throw UsageError("target size range is empty");
    if (max_size > std::min(rows, cols))
        throw UsageError("max target size exceeds scene dims");
    if (min_reflectivity <= 0.0 || max_reflectivity < min_reflectivity)
        throw UsageError("reflectivity range is empty or nonpositive");
    if (background < 0.0) throw UsageError("background level must be >= 0");
}

Scene make_scene(const SceneSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);

    RealGrid label(spec.rows, spec.cols, spec.background);

    std::vector<Kind> kinds;
    if (spec.rectangles) kinds.push_back(Kind::Rectangle);
    if (spec.disks) kinds.push_back(Kind::Disk);
    if (spec.strips) kinds.push_back(Kind::Strip);

    std::uniform_int_distribution<int> count_d(spec.min_targets, spec.max_targets);
    std::uniform_int_distribution<int> size_d(spec.min_size, spec.max_size);
    std::uniform_real_distribution<double> refl_d(spec.min_reflectivity,
                                                  spec.max_reflectivity);

    const int n_targets = count_d(rng);
    for (int t = 0; t < n_targets; ++t) {
        std::uniform_int_distribution<int> kind_d(0, int(kinds.size()) - 1);
        const Kind kind = kinds[kind_d(rng)];
        if (kind == Kind::Rectangle) {
            int h = size_d(rng), w = size_d(rng);
            std::uniform_int_distribution<int> r_d(0, spec.rows - h);
            std::uniform_int_distribution<int> c_d(0, spec.cols - w);
            int r0 = r_d(rng), c0 = c_d(rng);
            paint_rect(label, r0, c0, h, w, refl_d(rng));
        } else if (kind == Kind::Disk) {
            int d = size_d(rng);
            int r = std::max(1, d / 2);
            std::uniform_int_distribution<int> r_d(r, spec.rows - 1 - r);
            std::uniform_int_distribution<int> c_d(r, spec.cols - 1 - r);
            int ci = r_d(rng), cj = c_d(rng);
            double level = refl_d(rng);
            for (int i = ci - r; i <= ci + r; ++i)
                for (int j = cj - r; j <= cj + r; ++j)
                    if ((i - ci) * (i - ci) + (j - cj) * (j - cj) <= r * r)
                        label.at(i, j) = level;
        } else {
            int len = size_d(rng);
            int thick = std::max(1, spec.min_size / 3);
            std::uniform_int_distribution<int> t_d(1, thick);
            int th = t_d(rng);
            std::uniform_int_distribution<int> coin(0, 1);
            if (coin(rng) == 0) {
                std::uniform_int_distribution<int> r_d(0, spec.rows - th);
                std::uniform_int_distribution<int> c_d(0, spec.cols - len);
                int r0 = r_d(rng), c0 = c_d(rng);
                paint_rect(label, r0, c0, th, len, refl_d(rng));
            } else {
                std::uniform_int_distribution<int> r_d(0, spec.rows - len);
                std::uniform_int_distribution<int> c_d(0, spec.cols - th);
                int r0 = r_d(rng), c0 = c_d(rng);
                paint_rect(label, r0, c0, len, th, refl_d(rng));
            }
        }
    }

    // Coherent speckle source: unit-modulus random phase on every pixel,
    // drawn in row-major order after all targets are placed.
    ComplexImage scene{spec.rows, spec.cols};
    std::uniform_real_distribution<double> phase_d(0.0, 1.0);
    for (std::size_t k = 0; k < label.size(); ++k) {
        double ph = 2.0 * kPi * phase_d(rng);
        scene.data[k] = label.data[k] * cplx(std::cos(ph), std::sin(ph));
    }
    return Scene{std::move(scene), std::move(label)};
}

ComplexImage make_echo(const OperatorPlan& plan, const ComplexImage& scene) {
    return inverse_image(plan, scene);
}

ComplexImage add_noise(const ComplexImage& echo, double snr_db,
                       std::uint64_t seed) {
    if (std::isinf(snr_db) && snr_db > 0) return echo;
    double signal = 0.0;
    for (const cplx& v : echo.data) signal += std::norm(v);
    if (signal == 0.0) throw DataError("cannot set an SNR on a zero echo");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<cplx> noise(echo.data.size());
    double energy = 0.0;
    for (cplx& v : noise) {
        double re = nd(rng), im = nd(rng);
        v = cplx(re, im);
        energy += re * re + im * im;
    }
    // Exact-energy scaling: the realized ratio equals snr_db to roundoff.
    const double scale =
        std::sqrt(signal / (energy * std::pow(10.0, snr_db / 10.0)));
    ComplexImage out = echo;
    for (std::size_t k = 0; k < out.data.size(); ++k)
        out.data[k] += scale * noise[k];
    return out;
}

SamplingMask make_mask(int n_azimuth, int n_range, double az_drop,
                       double rg_drop, std::uint64_t seed) {
    if (n_azimuth <= 0 || n_range <= 0)
        throw UsageError("mask dims must be positive");
    if (az_drop < 0.0 || az_drop >= 1.0 || rg_drop < 0.0 || rg_drop >= 1.0)
        throw UsageError("drop fractions must lie in [0, 1)");
    const int drop_az = int(std::lround(az_drop * n_azimuth));
    const int drop_rg = int(std::lround(rg_drop * n_range));
    std::mt19937_64 rng(seed);
    SamplingMask mask;
    mask.azimuth_keep = keep_vector(n_azimuth, drop_az, rng);
    mask.range_keep = keep_vector(n_range, drop_rg, rng);
    return mask;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + (stream + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string item_path(const std::string& root, const std::string& kind, int i) {
    std::ostringstream os;
    os << root << "/" << kind << "/" << std::setw(4) << std::setfill('0') << i
       << ".sphc";
    return os.str();
}

DatasetManifest write_dataset(const DatasetConfig& cfg) {
    if (cfg.count < 0) throw UsageError("dataset count must be >= 0");
    cfg.scene.validate();
    const int na = cfg.scene.rows, nr = cfg.scene.cols;
    OperatorPlan plan(cfg.radar, na, nr);

    for (const char* kind : {"scenes", "labels", "echoes"})
        fs::create_directories(fs::path(cfg.root) / kind);

    DatasetManifest mf;
    mf.count = cfg.count;
    mf.rows = na;
    mf.cols = nr;
    mf.snr_db = cfg.snr_db;
    mf.az_drop = cfg.az_drop;
    mf.rg_drop = cfg.rg_drop;
    const int kept_az = na - int(std::lround(cfg.az_drop * na));
    const int kept_rg = nr - int(std::lround(cfg.rg_drop * nr));
    mf.downsampling_rate =
        1.0 - (double(kept_az) / na) * (double(kept_rg) / nr);
    for (int i = 0; i < cfg.count; ++i) {
        DatasetItem it;
        it.index = i;
        it.scene_seed = derive_seed(cfg.scene.seed, 3 * std::uint64_t(i));
        it.noise_seed = derive_seed(cfg.scene.seed, 3 * std::uint64_t(i) + 1);
        it.mask_seed = derive_seed(cfg.scene.seed, 3 * std::uint64_t(i) + 2);
        mf.items.push_back(it);
    }

    auto build_item = [&](const DatasetItem& it) {
        SceneSpec spec = cfg.scene;
        spec.seed = it.scene_seed;
        Scene sc = make_scene(spec);
        ComplexImage echo = make_echo(plan, sc.scene);
        if (!(std::isinf(cfg.snr_db) && cfg.snr_db > 0))
            echo = add_noise(echo, cfg.snr_db, it.noise_seed);
        if (cfg.az_drop > 0.0 || cfg.rg_drop > 0.0) {
            SamplingMask mask =
                make_mask(na, nr, cfg.az_drop, cfg.rg_drop, it.mask_seed);
            echo = apply_mask(mask, echo);
        }
        ComplexImage label_c{na, nr};
        for (std::size_t k = 0; k < sc.label.size(); ++k)
            label_c.data[k] = cplx(sc.label.data[k], 0.0);
        write_image(sc.scene, item_path(cfg.root, "scenes", it.index));
        write_image(label_c, item_path(cfg.root, "labels", it.index));
        write_image(echo, item_path(cfg.root, "echoes", it.index));
    };

    const int workers = std::max(1, std::min(cfg.threads, cfg.count));
    if (workers <= 1) {
        for (const DatasetItem& it : mf.items) build_item(it);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int i = w; i < cfg.count; i += workers)
                    build_item(mf.items[i]);
            });
        for (std::thread& t : pool) t.join();
    }

    std::ostringstream os;
    os << "format=1\n";
    os << "tool_version=" << kToolVersion << "\n";
    os << "count=" << mf.count << "\n";
    os << "rows=" << mf.rows << "\n";
    os << "cols=" << mf.cols << "\n";
    os << "snr_db=" << format_double(mf.snr_db) << "\n";
    os << "az_drop=" << format_double(mf.az_drop) << "\n";
    os << "rg_drop=" << format_double(mf.rg_drop) << "\n";
    os << "downsampling_rate=" << format_double(mf.downsampling_rate) << "\n";
    for (const DatasetItem& it : mf.items) {
        std::ostringstream tag;
        tag << "item." << std::setw(4) << std::setfill('0') << it.index;
        os << tag.str() << ".scene_seed=" << it.scene_seed << "\n";
        os << tag.str() << ".noise_seed=" << it.noise_seed << "\n";
        os << tag.str() << ".mask_seed=" << it.mask_seed << "\n";
    }
    write_text_file(cfg.root + "/manifest.txt", os.str());
    return mf;
}

DatasetManifest read_manifest(const std::string& root) {
    std::ifstream in(root + "/manifest.txt");
    if (!in) throw DataError("cannot open manifest: " + root + "/manifest.txt");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("malformed manifest line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw DataError("manifest missing key: " + key);
        return it->second;
    };
    DatasetManifest mf;
    mf.count = std::stoi(need("count"));
    mf.rows = std::stoi(need("rows"));
    mf.cols = std::stoi(need("cols"));
    mf.snr_db = std::stod(need("snr_db"));
    mf.az_drop = std::stod(need("az_drop"));
    mf.rg_drop = std::stod(need("rg_drop"));
    mf.downsampling_rate = std::stod(need("downsampling_rate"));
    for (int i = 0; i < mf.count; ++i) {
        std::ostringstream tag;
        tag << "item." << std::setw(4) << std::setfill('0') << i;
        DatasetItem it;
        it.index = i;
        it.scene_seed = std::stoull(need(tag.str() + ".scene_seed"));
        it.noise_seed = std::stoull(need(tag.str() + ".noise_seed"));
        it.mask_seed = std::stoull(need(tag.str() + ".mask_seed"));
        mf.items.push_back(it);
    }
    return mf;
}

SamplingMask item_mask(const DatasetManifest& mf, const DatasetItem& item) {
    return make_mask(mf.rows, mf.cols, mf.az_drop, mf.rg_drop, item.mask_seed);
}

} // namespace sphr
