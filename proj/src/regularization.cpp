#include "sphr/regularization.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace sphr {

void NLTVConfig::validate() const {
    if (patch_size <= 0 || patch_size % 2 == 0)
        throw UsageError("patch_size must be odd and positive");
    if (search_radius <= 0)
        throw UsageError("search_radius must be positive");
    if (gaussian_sigma <= 0.0)
        throw UsageError("gaussian_sigma must be positive");
    if (filter_h <= 0.0)
        throw UsageError("filter_h must be positive");
    int window = 2 * search_radius + 1;
    if (neighbors_kept <= 0 || neighbors_kept > window * window - 1)
        throw UsageError("neighbors_kept must fit the search window");
}

double NLWeights::max_degree() const {
    std::vector<double> deg(pixels(), 0.0);
    for (std::size_t e = 0; e < edges(); ++e)
        deg[std::size_t(i_of[e])] += sw[e] * sw[e];
    double m = 0.0;
    for (double d : deg) m = std::max(m, d);
    return m;
}

double bandwidth_estimate(const RealGrid& mag) {
    const int h = mag.rows, w = mag.cols;
    RealGrid lap(h, w);
    double peak = 0.0;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double c = mag.at(i, j);
            peak = std::max(peak, c);
            lap.at(i, j) = -4.0 * c + mag.at((i + 1) % h, j) +
                           mag.at((i + h - 1) % h, j) + mag.at(i, (j + 1) % w) +
                           mag.at(i, (j + w - 1) % w);
        }
    double med = median_of(lap);
    RealGrid dev(h, w);
    for (std::size_t k = 0; k < lap.size(); ++k)
        dev.data[k] = std::abs(lap.data[k] - med);
    double mad = median_of(dev);
    return std::max(1.4826 * mad, 1e-8 * std::max(1.0, peak));
}

namespace {

// separable circularly-wrapped Gaussian smoothing of the squared-difference
// field. Circular boundaries match the circular shift that formed the field,
// so the smoothed distance of a pixel pair is the same translate whichever
// endpoint anchors it; compute_weights leans on that to evaluate each
// opposite-offset pair once. Single precision: the field feeds a K-nearest
// selection and an exp() weight, both insensitive at float granularity.
void gaussian_filter(const std::vector<float>& in, std::vector<float>& out,
                     std::vector<float>& tmp, int h, int w,
                     const std::vector<float>& g1) {
    const int taps = int(g1.size());
    const int r = taps / 2;
    // the guide-size check upstream guarantees taps <= min(h, w), so a
    // single conditional wrap is enough everywhere
    auto wrap = [](int idx, int n) {
        if (idx < 0) return idx + n;
        if (idx >= n) return idx - n;
        return idx;
    };
    if (taps > 32) { // oversized patch kernels take the simple path
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                float acc = 0.0f;
                for (int t = -r; t <= r; ++t)
                    acc += g1[std::size_t(t + r)] *
                           in[std::size_t(wrap(i + t, h)) * w + j];
                tmp[std::size_t(i) * w + j] = acc;
            }
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                float acc = 0.0f;
                for (int t = -r; t <= r; ++t)
                    acc += g1[std::size_t(t + r)] *
                           tmp[std::size_t(i) * w + wrap(j + t, w)];
                out[std::size_t(i) * w + j] = acc;
            }
        return;
    }
    if (taps == 5) { // the default patch width; fixed trip count vectorizes
        const float k0 = g1[0], k1 = g1[1], k2 = g1[2], k3 = g1[3], k4 = g1[4];
        for (int i = 0; i < h; ++i) {
            const float* __restrict a = in.data() + std::size_t(wrap(i - 2, h)) * w;
            const float* __restrict b = in.data() + std::size_t(wrap(i - 1, h)) * w;
            const float* __restrict c = in.data() + std::size_t(i) * w;
            const float* __restrict d = in.data() + std::size_t(wrap(i + 1, h)) * w;
            const float* __restrict e = in.data() + std::size_t(wrap(i + 2, h)) * w;
            float* __restrict tr = tmp.data() + std::size_t(i) * w;
            for (int j = 0; j < w; ++j)
                tr[j] = k0 * a[j] + k1 * b[j] + k2 * c[j] + k3 * d[j] + k4 * e[j];
        }
        for (int i = 0; i < h; ++i) {
            const float* __restrict tr = tmp.data() + std::size_t(i) * w;
            float* __restrict orow = out.data() + std::size_t(i) * w;
            for (int j = 0; j < 2; ++j)
                orow[j] = k0 * tr[wrap(j - 2, w)] + k1 * tr[wrap(j - 1, w)] +
                          k2 * tr[j] + k3 * tr[j + 1] + k4 * tr[j + 2];
            for (int j = 2; j < w - 2; ++j)
                orow[j] = k0 * tr[j - 2] + k1 * tr[j - 1] + k2 * tr[j] +
                          k3 * tr[j + 1] + k4 * tr[j + 2];
            for (int j = w - 2; j < w; ++j)
                orow[j] = k0 * tr[j - 2] + k1 * tr[j - 1] + k2 * tr[j] +
                          k3 * tr[wrap(j + 1, w)] + k4 * tr[wrap(j + 2, w)];
        }
        return;
    }
    std::array<const float*, 32> rp{};
    for (int i = 0; i < h; ++i) {
        for (int t = 0; t < taps; ++t)
            rp[std::size_t(t)] = in.data() + std::size_t(wrap(i + t - r, h)) * w;
        float* tr = tmp.data() + std::size_t(i) * w;
        for (int j = 0; j < w; ++j) {
            float acc = 0.0f;
            for (int t = 0; t < taps; ++t) acc += g1[std::size_t(t)] * rp[std::size_t(t)][j];
            tr[j] = acc;
        }
    }
    for (int i = 0; i < h; ++i) {
        const float* tr = tmp.data() + std::size_t(i) * w;
        float* orow = out.data() + std::size_t(i) * w;
        for (int j = 0; j < r; ++j) {
            float acc = 0.0f;
            for (int t = 0; t < taps; ++t)
                acc += g1[std::size_t(t)] * tr[wrap(j + t - r, w)];
            orow[j] = acc;
        }
        for (int j = r; j < w - r; ++j) {
            float acc = 0.0f;
            const float* p = tr + (j - r);
            for (int t = 0; t < taps; ++t) acc += g1[std::size_t(t)] * p[t];
            orow[j] = acc;
        }
        for (int j = w - r; j < w; ++j) {
            float acc = 0.0f;
            for (int t = 0; t < taps; ++t)
                acc += g1[std::size_t(t)] * tr[wrap(j + t - r, w)];
            orow[j] = acc;
        }
    }
}

struct Candidate {
    float dist = std::numeric_limits<float>::infinity();
    std::int32_t offset = -1;
};

} // namespace

NLWeights compute_weights(const RealGrid& guide, const NLTVConfig& cfg) {
    cfg.validate();
    const int h = guide.rows, w = guide.cols;
    if (h < cfg.patch_size || w < cfg.patch_size)
        throw UsageError("guide smaller than patch");
    for (double v : guide.data)
        if (v < 0.0) throw UsageError("guide must be nonnegative");

    const int r = cfg.patch_size / 2;
    std::vector<double> g1d(std::size_t(cfg.patch_size));
    double gsum = 0.0;
    for (int t = -r; t <= r; ++t) {
        g1d[std::size_t(t + r)] =
            std::exp(-double(t) * t / (2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma));
        gsum += g1d[std::size_t(t + r)];
    }
    std::vector<float> g1(g1d.size());
    for (std::size_t t = 0; t < g1d.size(); ++t) g1[t] = float(g1d[t] / gsum);

    std::vector<std::pair<int, int>> offs;
    for (int di = -cfg.search_radius; di <= cfg.search_radius; ++di)
        for (int dj = -cfg.search_radius; dj <= cfg.search_radius; ++dj)
            if (di != 0 || dj != 0) offs.emplace_back(di, dj);

    const std::size_t n = std::size_t(h) * w;
    const int K = cfg.neighbors_kept;
    // per-pixel K best (smallest distance) offsets; ties broken by offset
    // index so the graph is reproducible
    std::vector<Candidate> best(n * std::size_t(K));

    // equal distances keep the earlier-inserted direction; the sweep order
    // below is fixed, so the graph is reproducible. maxd mirrors each
    // pixel's current K-th best so most rejects never touch the slot array.
    std::vector<float> maxd(n, std::numeric_limits<float>::infinity());
    auto insert = [&](std::size_t pix, float d, std::int32_t oidx) {
        if (!(d < maxd[pix])) return;
        Candidate* slot = &best[pix * std::size_t(K)];
        int pos = K - 1;
        while (pos > 0 && d < slot[pos - 1].dist) --pos;
        for (int q = K - 1; q > pos; --q) slot[q] = slot[q - 1];
        slot[pos] = Candidate{d, oidx};
        maxd[pix] = slot[K - 1].dist;
    };

    // Patch distance is symmetric and the shift+filter pipeline is fully
    // circular, so the smoothed field for -(di, dj) is an exact translate
    // of the field for (di, dj): only the lexicographically positive half
    // of the window is evaluated and each field feeds both edge directions.
    // offs is enumerated so the opposite of offs[o] is offs[N - 1 - o].
    const int N = int(offs.size());
    const std::size_t hw = std::size_t(h) * w;
    std::vector<float> gf(hw), diff2(hw), ek(hw), tmp(hw);
    for (std::size_t k = 0; k < hw; ++k) gf[k] = float(guide.data[k]);
    // visit near offsets first: patch distance grows with separation on
    // typical guides, so the K-best slots fill with small values early and
    // far candidates die on the maxd probe instead of shifting slots
    std::vector<int> order;
    order.reserve(std::size_t(N - N / 2));
    for (int o = N / 2; o < N; ++o) order.push_back(o);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        auto r2 = [&](int o) {
            return offs[std::size_t(o)].first * offs[std::size_t(o)].first +
                   offs[std::size_t(o)].second * offs[std::size_t(o)].second;
        };
        return r2(a) != r2(b) ? r2(a) < r2(b) : a < b;
    });
    for (int o : order) {
        const int di = offs[std::size_t(o)].first;
        const int dj = offs[std::size_t(o)].second;
        const int ro = N - 1 - o;
        // only pairs with both endpoints in bounds become candidates; an
        // offset reaching outside the grid contributes nothing
        const int ilo = std::max(0, -di), ihi = std::min(h, h - di);
        const int jlo = std::max(0, -dj), jhi = std::min(w, w - dj);
        if (ilo >= ihi || jlo >= jhi) continue;
        // circular shift with the wrap point hoisted out of the inner loop
        for (int i = 0; i < h; ++i) {
            int ii = i + di;
            if (ii < 0) ii += h;
            else if (ii >= h) ii -= h;
            const float* gr = gf.data() + std::size_t(i) * w;
            const float* sr = gf.data() + std::size_t(ii) * w;
            float* dr = diff2.data() + std::size_t(i) * w;
            for (int j = 0; j < jlo; ++j) {
                float d = gr[j] - sr[j + dj + w];
                dr[j] = d * d;
            }
            for (int j = jlo; j < jhi; ++j) {
                float d = gr[j] - sr[j + dj];
                dr[j] = d * d;
            }
            for (int j = jhi; j < w; ++j) {
                float d = gr[j] - sr[j + dj - w];
                dr[j] = d * d;
            }
        }
        gaussian_filter(diff2, ek, tmp, h, w, g1);
        const std::size_t step = std::size_t(di) * w + dj;
        for (int i = ilo; i < ihi; ++i) {
            const float* er = ek.data() + std::size_t(i) * w;
            for (int j = jlo; j < jhi; ++j) {
                float d = er[j];
                std::size_t pix = std::size_t(i) * w + j;
                insert(pix, d, o);
                insert(pix + step, d, ro);
            }
        }
    }

    // adjacency assembly by counting sort: each kept candidate feeds both
    // directions, rows are sorted and deduped with union-max so that
    // w_ij == w_ji even when only one side kept the pair
    std::vector<std::size_t> start(n + 1, 0);
    for (std::size_t p = 0; p < n; ++p) {
        const Candidate* slot = &best[p * std::size_t(K)];
        for (int k = 0; k < K; ++k) {
            if (slot[k].offset < 0) continue;
            auto [di, dj] = offs[std::size_t(slot[k].offset)];
            std::size_t b = p + std::size_t(di) * w + dj;
            ++start[p + 1];
            ++start[b + 1];
        }
    }
    for (std::size_t p = 0; p < n; ++p) start[p + 1] += start[p];
    std::vector<std::size_t> pos(start.begin(), start.end() - 1);
    std::vector<std::int32_t> nbr(start[n]);
    std::vector<float> nwt(start[n]);
    const float inv2h2 = float(1.0 / (2.0 * cfg.filter_h * cfg.filter_h));
    for (std::size_t p = 0; p < n; ++p) {
        const Candidate* slot = &best[p * std::size_t(K)];
        for (int k = 0; k < K; ++k) {
            if (slot[k].offset < 0) continue;
            auto [di, dj] = offs[std::size_t(slot[k].offset)];
            std::size_t b = p + std::size_t(di) * w + dj;
            float wt = std::exp(-slot[k].dist * inv2h2);
            nbr[pos[p]] = std::int32_t(b);
            nwt[pos[p]++] = wt;
            nbr[pos[b]] = std::int32_t(p);
            nwt[pos[b]++] = wt;
        }
    }

    NLWeights out;
    out.rows = h;
    out.cols = w;
    out.i_of.reserve(start[n]);
    out.j_of.reserve(start[n]);
    out.sw.reserve(start[n]);
    std::vector<std::size_t> row_start(n + 1, 0);
    std::vector<std::pair<std::int32_t, float>> row;
    row.reserve(64);
    for (std::size_t p = 0; p < n; ++p) {
        row.clear();
        for (std::size_t e = start[p]; e < start[p + 1]; ++e)
            row.emplace_back(nbr[e], nwt[e]);
        // rows are short (about 2K entries): insertion sort beats a
        // general sort call here
        for (std::size_t s = 1; s < row.size(); ++s) {
            auto key = row[s];
            std::size_t q = s;
            while (q > 0 && key < row[q - 1]) {
                row[q] = row[q - 1];
                --q;
            }
            row[q] = key;
        }
        for (std::size_t e = 0; e < row.size();) {
            std::size_t f = e;
            float wmax = 0.0f;
            while (f < row.size() && row[f].first == row[e].first) {
                wmax = std::max(wmax, row[f].second);
                ++f;
            }
            out.i_of.push_back(std::int64_t(p));
            out.j_of.push_back(std::int64_t(row[e].first));
            out.sw.push_back(std::sqrt(double(wmax)));
            e = f;
        }
        row_start[p + 1] = out.i_of.size();
    }

    // reversed-edge index without any searching: scanning edges in (i, j)
    // order delivers the mirrors of each row j in ascending source order,
    // which is exactly that row's own neighbor order, so one cursor per
    // row pairs them up
    out.trans.resize(out.edges());
    std::vector<std::size_t> cur(row_start.begin(), row_start.end() - 1);
    for (std::size_t e = 0; e < out.edges(); ++e)
        out.trans[e] = std::int64_t(cur[std::size_t(out.j_of[e])]++);

    // squared gradient operator norm by power iteration on grad^T grad;
    // the prox step clamp divides by this. Deterministic start vector so
    // rebuilt graphs give identical estimates.
    if (!out.i_of.empty()) {
        std::vector<double> v(n), acc(n);
        std::uint64_t s = 0;
        for (std::size_t k = 0; k < n; ++k) {
            s += 0x9E3779B97F4A7C15ull;
            std::uint64_t z = s;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
            z ^= z >> 31;
            v[k] = double(z >> 11) * 0x1.0p-53 - 0.5;
        }
        double lam = 0.0;
        for (int it = 0; it < 16; ++it) {
            double nv = 0.0;
            for (double x : v) nv += x * x;
            nv = std::sqrt(nv);
            if (nv == 0.0) break;
            for (double& x : v) x /= nv;
            lam = 0.0;
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t e = 0; e < out.edges(); ++e) {
                double g = out.sw[e] * (v[std::size_t(out.i_of[e])] -
                                        v[std::size_t(out.j_of[e])]);
                lam += g * g;
                double t = out.sw[e] * g;
                acc[std::size_t(out.i_of[e])] += t;
                acc[std::size_t(out.j_of[e])] -= t;
            }
            v.swap(acc);
        }
        out.op_norm2 = lam;
    }
    return out;
}

std::vector<double> nl_gradient(const RealGrid& u, const NLWeights& w) {
    if (u.rows != w.rows || u.cols != w.cols)
        throw UsageError("nl_gradient: dims mismatch");
    std::vector<double> g(w.edges());
    for (std::size_t e = 0; e < w.edges(); ++e)
        g[e] = w.sw[e] * (u.data[std::size_t(w.i_of[e])] -
                          u.data[std::size_t(w.j_of[e])]);
    return g;
}

RealGrid nl_divergence(const std::vector<double>& field, const NLWeights& w) {
    if (field.size() != w.edges())
        throw UsageError("nl_divergence: field size mismatch");
    RealGrid d(w.rows, w.cols);
    for (std::size_t e = 0; e < w.edges(); ++e)
        d.data[std::size_t(w.i_of[e])] +=
            w.sw[e] * (field[std::size_t(w.trans[e])] - field[e]);
    return d;
}

double nltv_energy(const RealGrid& u, const NLWeights& w) {
    double acc = 0.0;
    for (std::size_t e = 0; e < w.edges(); ++e)
        acc += std::abs(w.sw[e] * (u.data[std::size_t(w.i_of[e])] -
                                   u.data[std::size_t(w.j_of[e])]));
    return acc;
}

std::vector<double> carry_dual(const std::vector<double>& dual_old,
                               const NLWeights& w_old, const NLWeights& w_new) {
    if (dual_old.size() != w_old.edges())
        throw UsageError("carry_dual: stale dual size");
    std::vector<double> out(w_new.edges(), 0.0);
    // both edge lists sorted by (i, j): single merge pass
    std::size_t eo = 0;
    for (std::size_t en = 0; en < w_new.edges(); ++en) {
        while (eo < w_old.edges() &&
               (w_old.i_of[eo] < w_new.i_of[en] ||
                (w_old.i_of[eo] == w_new.i_of[en] && w_old.j_of[eo] < w_new.j_of[en])))
            ++eo;
        if (eo < w_old.edges() && w_old.i_of[eo] == w_new.i_of[en] &&
            w_old.j_of[eo] == w_new.j_of[en])
            out[en] = dual_old[eo];
    }
    return out;
}

RealGrid nltv_prox(const RealGrid& v, double lambda_nltv, double tau,
                   const NLWeights& w, std::vector<double>& dual,
                   int inner_iters) {
    if (v.rows != w.rows || v.cols != w.cols)
        throw UsageError("nltv_prox: dims mismatch");
    if (tau <= 0.0) throw UsageError("nltv_prox: tau must be positive");
    if (inner_iters < 1) throw UsageError("nltv_prox: inner_iters must be >= 1");
    if (lambda_nltv < 0.0) throw UsageError("nltv_prox: negative lambda");

    RealGrid mag(v.rows, v.cols);
    for (std::size_t k = 0; k < v.size(); ++k) mag.data[k] = std::abs(v.data[k]);
    if (lambda_nltv == 0.0) return mag;

    if (dual.empty()) dual.assign(w.edges(), 0.0);
    if (dual.size() != w.edges())
        throw UsageError("nltv_prox: dual field does not match graph");

    const double bound = w.op_norm2 > 0.0 ? w.op_norm2 : 4.0 * w.max_degree();
    const double t = std::min(tau, 0.99 / std::max(1.0, bound));
    RealGrid work(v.rows, v.cols);
    for (int it = 0; it < inner_iters; ++it) {
        RealGrid dv = nl_divergence(dual, w);
        for (std::size_t k = 0; k < dv.size(); ++k)
            work.data[k] = dv.data[k] - mag.data[k] / lambda_nltv;
        std::vector<double> U = nl_gradient(work, w);
        for (std::size_t e = 0; e < dual.size(); ++e)
            dual[e] = (dual[e] + t * U[e]) / (1.0 + t * std::abs(U[e]));
    }
    RealGrid dv = nl_divergence(dual, w);
    RealGrid out(v.rows, v.cols);
    for (std::size_t k = 0; k < out.size(); ++k) {
        double sign = (v.data[k] > 0.0) ? 1.0 : ((v.data[k] < 0.0) ? -1.0 : 0.0);
        out.data[k] = sign * (mag.data[k] - lambda_nltv * dv.data[k]);
    }
    return out;
}

double gmc_threshold(double b, double delta, double theta) {
    double a = std::abs(b);
    double r1 = std::max(a - delta, 0.0);
    double r2 = std::max(a - theta * delta, 0.0);
    double mag = r1 * (theta * delta + r2) / ((theta - 1.0) * delta + r2);
    return (b < 0.0 ? -1.0 : 1.0) * mag;
}

namespace {
void check_gmc_params(double delta, double theta) {
    if (delta <= 0.0) throw UsageError("gmc_threshold: delta must be positive");
    if (theta <= 1.0) throw UsageError("gmc_threshold: theta must exceed 1");
}
} // namespace

RealGrid gmc_threshold(const RealGrid& b, double delta, double theta) {
    check_gmc_params(delta, theta);
    RealGrid out(b.rows, b.cols);
    for (std::size_t k = 0; k < b.size(); ++k)
        out.data[k] = gmc_threshold(b.data[k], delta, theta);
    return out;
}

ComplexImage gmc_threshold(const ComplexImage& b, double delta, double theta) {
    check_gmc_params(delta, theta);
    ComplexImage out(b.rows, b.cols);
    for (std::size_t k = 0; k < b.size(); ++k) {
        double a = std::abs(b.data[k]);
        if (a == 0.0) continue;
        out.data[k] = b.data[k] * (gmc_threshold(a, delta, theta) / a);
    }
    return out;
}

double gmc_penalty(const RealGrid& x, double b_weight) {
    double b2 = b_weight * b_weight;
    double acc = 0.0;
    for (double v : x.data) {
        double a = std::abs(v);
        double huber;
        if (b2 <= 0.0)
            huber = 0.0;
        else if (a <= 1.0 / b2)
            huber = 0.5 * b2 * a * a;
        else
            huber = a - 0.5 / b2;
        acc += a - huber;
    }
    return acc;
}

} // namespace sphr
