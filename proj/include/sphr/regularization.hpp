#pragma once

#include "sphr/core.hpp"

#include <cstdint>

namespace sphr {

// Patch-similarity weight graph configuration.
struct NLTVConfig {
    int patch_size = 5;          // odd, pixels
    int search_radius = 7;       // pixels
    double filter_h = 1.0;       // smoothing bandwidth; use sites override it
    double gaussian_sigma = 1.5; // patch kernel std-dev
    int neighbors_kept = 10;     // K strongest links per pixel

    // Throws UsageError: patch_size must be odd positive, radius positive,
    // sigma/h positive, K within the search window capacity.
    void validate() const;
};

// Sparse symmetric difference graph. Directed edges sorted by (i, j); each
// edge e has its reversed twin at trans[e], so per-pixel neighbor lists are
// the contiguous runs of equal i. sw stores sqrt(w) with w in (0, 1].
struct NLWeights {
    int rows = 0;
    int cols = 0;
    std::vector<std::int64_t> i_of; // source pixel, flat row-major index
    std::vector<std::int64_t> j_of; // neighbor pixel
    std::vector<double> sw;         // sqrt of the symmetrized weight
    std::vector<std::int64_t> trans; // edge index of (j, i)
    // squared operator norm of the weighted gradient, estimated by power
    // iteration at build time; 0 on hand-built graphs
    double op_norm2 = 0.0;

    std::size_t edges() const { return i_of.size(); }
    std::size_t pixels() const { return std::size_t(rows) * cols; }
    // max over pixels of sum of w over outgoing edges; bounds the gradient
    // operator norm by 4 * max_degree
    double max_degree() const;
};

// Noise bandwidth from the guide: 1.4826 * MAD of its 4-neighbor Laplacian
// (circular boundary), floored at 1e-8 * max(1, peak).
double bandwidth_estimate(const RealGrid& mag);

// K-strongest-link graph from Gaussian-kernel patch distances inside the
// search window, symmetrized by keeping the larger directed weight.
NLWeights compute_weights(const RealGrid& guide, const NLTVConfig& cfg);

// Per-edge weighted differences g(e) = sqrt(w) * (u_i - u_j).
std::vector<double> nl_gradient(const RealGrid& u, const NLWeights& w);

// Negative adjoint of nl_gradient: div(i) = sum_e sqrt(w) * (p(rev e) - p(e)).
RealGrid nl_divergence(const std::vector<double>& field, const NLWeights& w);

// Sum of |gradient| entries; the graph total-variation energy of u.
double nltv_energy(const RealGrid& u, const NLWeights& w);

// Transfers a dual field onto a new graph: matched (i, j) edges keep their
// value, new edges start at zero.
std::vector<double> carry_dual(const std::vector<double>& dual_old,
                               const NLWeights& w_old, const NLWeights& w_new);

// Magnitude-domain graph-TV denoising by dual fixed-point iteration.
// Solves argmin_z lambda * ||grad z||_1 + 1/2 ||z - |v|||^2, then reattaches
// the sign of v. The step is clamped to 0.99 / max(1, |grad|^2), the
// stability bound of the dual recursion, using the measured op_norm2 when
// the graph carries one and the 4 * max_degree bound otherwise; a larger
// requested tau is reduced rather than rejected so learned values stay
// usable. dual is updated in place and must either match w.edges() or be
// empty.
RealGrid nltv_prox(const RealGrid& v, double lambda_nltv, double tau,
                   const NLWeights& w, std::vector<double>& dual,
                   int inner_iters);

// Firm threshold: zero inside [-delta, delta], identity outside
// [-theta*delta, theta*delta], linear blend between, sign preserved.
double gmc_threshold(double b, double delta, double theta);
RealGrid gmc_threshold(const RealGrid& b, double delta, double theta);
// Complex variant: thresholds the modulus, keeps the phase.
ComplexImage gmc_threshold(const ComplexImage& b, double delta, double theta);

// Scalar-matrix minimax-concave penalty value (diagnostic only):
// sum_i |x_i| - huber(x_i), huber threshold 1 / b_weight^2.
double gmc_penalty(const RealGrid& x, double b_weight);

} // namespace sphr
