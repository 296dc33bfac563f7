// Parameter exploration harness for the classic solver profiles. Not a test:
// prints metric rows for hand inspection while choosing shipped defaults.

#include "sphr/core.hpp"
#include "sphr/datagen.hpp"
#include "sphr/metrics.hpp"
#include "sphr/operators.hpp"
#include "sphr/solver.hpp"

#include "fixture_common.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <string>
#include <thread>
#include <vector>

using namespace sphr;

namespace {

struct Row {
    std::uint64_t seed = 0;
    double enl_csa = 0, enl_nc = 0, enl_l1 = 0;
    double gamma_nc = 0, psnr_csa = 0, psnr_nc = 0, esi_nc = 0;
    double secs = 0;
    bool ok = false;
};

struct Cfg {
    double lam_s, ds, hend, rho;
    int iters, inner;
    bool masked;
    double l1_ds;
    double theta = 4.0;
};

Row run_seed(const OperatorPlan& plan, const Cfg& c, std::uint64_t seed) {
    Row r;
    r.seed = seed;
    Scene sc = make_scene(fixture::scene_spec(seed));
    fixture::stamp_patch(sc, seed);
    auto reg = std::optional<Region>(fixture::patch_region());
    ComplexImage echo = make_echo(plan, sc.scene);
    echo = add_noise(echo, 5.0, derive_seed(seed, 1));
    SamplingMask mask = c.masked
                            ? make_mask(128, 128, 0.1, 0.1, derive_seed(seed, 2))
                            : SamplingMask::all_kept(128, 128);
    ComplexImage ym = apply_mask(mask, echo);
    RealGrid csa = magnitude(image(plan, ym));
    double med = median_of(csa);

    auto t0 = std::chrono::steady_clock::now();
    SolverConfig nc;
    nc.layers = c.iters;
    nc.mode = SolverMode::NLTV_NC;
    nc.stop_tol = 0.0;
    nc.inner_iters = c.inner;
    nc.h_anneal_end = c.hend;
    LayerParams p;
    p.rho = c.rho;
    p.lambda_nltv = c.lam_s * med;
    p.tau = 0.2;
    p.delta = c.ds * med;
    p.theta = c.theta;
    nc.params.push_back(p);
    auto [Xn, stn] = admm_solve(ym, plan, mask, nc);
    r.secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                 .count();

    SolverConfig l1;
    l1.layers = c.iters;
    l1.mode = SolverMode::L1;
    l1.stop_tol = 0.0;
    LayerParams q = p;
    q.lambda_nltv = 0.0;
    q.delta = c.l1_ds * med;
    l1.params.assign(1, q);
    auto [Xl, stl] = admm_solve(ym, plan, mask, l1);

    RealGrid Mn = magnitude(Xn), Ml = magnitude(Xl);
    r.enl_csa = enl(csa, *reg);
    r.enl_nc = enl(Mn, *reg);
    r.enl_l1 = enl(Ml, *reg);
    r.gamma_nc = radiometric_resolution(Mn, *reg);
    r.psnr_csa = psnr(csa, sc.label);
    r.psnr_nc = psnr(Mn, sc.label);
    r.esi_nc = esi(Mn, sc.label);
    r.ok = true;
    return r;
}

void run_cfg(const OperatorPlan& plan, const Cfg& c,
             const std::vector<std::uint64_t>& seeds) {
    std::vector<Row> rows(seeds.size());
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < seeds.size(); ++k)
        pool.emplace_back([&, k] { rows[k] = run_seed(plan, c, seeds[k]); });
    for (auto& t : pool) t.join();

    double ec_min = 1e300, ec_max = -1e300, en_min = 1e300, en_mean = 0;
    double el_max = -1e300, g_max = -1e300, dp_min = 1e300, dp_mean = 0;
    double ratio_min = 1e300, secs = 0;
    int n = 0;
    const bool verbose = std::getenv("TUNE_VERBOSE") != nullptr;
    for (const Row& r : rows) {
        if (!r.ok) continue;
        if (verbose)
            std::printf("  seed %3llu | csa %.2f nc %7.1f l1 %.2f g %.2f "
                        "dPSNR %+.2f esi %.3f\n",
                        (unsigned long long)r.seed, r.enl_csa, r.enl_nc,
                        r.enl_l1, r.gamma_nc, r.psnr_nc - r.psnr_csa, r.esi_nc);
        ++n;
        ec_min = std::min(ec_min, r.enl_csa);
        ec_max = std::max(ec_max, r.enl_csa);
        en_min = std::min(en_min, r.enl_nc);
        en_mean += r.enl_nc;
        el_max = std::max(el_max, r.enl_l1);
        g_max = std::max(g_max, r.gamma_nc);
        double dp = r.psnr_nc - r.psnr_csa;
        dp_min = std::min(dp_min, dp);
        dp_mean += dp;
        ratio_min = std::min(ratio_min, r.enl_nc / r.enl_l1);
        secs += r.secs;
    }
    if (n == 0) {
        std::printf("no valid seeds\n");
        return;
    }
    en_mean /= n;
    dp_mean /= n;
    std::printf("%s lam%.2f ds%.2f l1ds%.2f hend%.2f rho%.2f it%d in%d | "
                "csaENL [%.2f,%.2f] ncENL min %.1f mean %.1f l1ENL max %.2f "
                "ratio_min %.1f gmax %.2f | dPSNR min %+.2f mean %+.2f | %.1fs/sc\n",
                c.masked ? "mask" : "full", c.lam_s, c.ds, c.l1_ds, c.hend,
                c.rho, c.iters, c.inner, ec_min, ec_max, en_min, en_mean,
                el_max, ratio_min, g_max, dp_min, dp_mean, secs / n);
    std::fflush(stdout);
}

} // namespace

int main(int argc, char** argv) {
    RadarParams rp;
    OperatorPlan plan(rp, 128, 128);
    std::vector<std::uint64_t> seeds = {11, 23, 37, 51};
    if (const char* env = std::getenv("TUNE_SEEDS")) {
        seeds.clear();
        for (const char* p = env; *p;) {
            seeds.push_back(std::strtoull(p, const_cast<char**>(&p), 10));
            while (*p == ',' || *p == ' ') ++p;
        }
    }
    bool masked = argc > 1 && std::strcmp(argv[1], "masked") == 0;

    if (argc > 7) { // single config: lam ds l1ds hend rho iters inner [theta]
        Cfg c{};
        c.masked = masked;
        c.lam_s = std::atof(argv[2]);
        c.ds = std::atof(argv[3]);
        c.l1_ds = std::atof(argv[4]);
        c.hend = std::atof(argv[5]);
        c.rho = std::atof(argv[6]);
        c.iters = std::atoi(argv[7]);
        c.inner = argc > 8 ? std::atoi(argv[8]) : 10;
        c.theta = argc > 9 ? std::atof(argv[9]) : 4.0;
        run_cfg(plan, c, seeds);
        return 0;
    }

    // default exploration grid
    for (double lam : {0.5, 1.0, 1.75})
        for (double ds : {0.25, 0.4})
            for (double hend : {1.0, 0.12}) {
                Cfg c{lam, ds, hend, 0.9, 50, 10, masked, ds};
                run_cfg(plan, c, seeds);
            }
    return 0;
}
