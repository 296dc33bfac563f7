#pragma once

// ADMM reconstruction: complex-domain data update through the fast imaging
// operators, magnitude-domain auxiliaries (nonlocal-TV prox and firm/soft
// thresholding), scaled multiplier updates, and residual tracking. The same
// layer code runs with fixed parameters (classic solver) or per-layer
// parameters (unrolled network forward pass).

#include "sphr/core.hpp"
#include "sphr/operators.hpp"
#include "sphr/regularization.hpp"

#include <string>
#include <utility>
#include <vector>

namespace sphr {

enum class SolverMode { L1, NLTV_NC };

struct SolverConfig {
    int layers = 50; // K
    // One entry: every layer shares it (classic). K entries: layer-varying.
    std::vector<LayerParams> params;
    NLTVConfig nltv;
    SolverMode mode = SolverMode::NLTV_NC;
    // Classic mode stops early once the relative X change drops below this;
    // 0 disables. Ignored when fixed_depth is set.
    double stop_tol = 1e-4;
    // Unrolled forward passes always execute exactly `layers` layers.
    bool fixed_depth = false;
    // Chambolle iterations per layer.
    int inner_iters = 10;
    // The similarity-weight bandwidth anneals from its data-driven estimate
    // h0 down to h0 * h_anneal_end across layers (1 = keep h0 throughout).
    double h_anneal_end = 1.0;

    void validate() const;
    const LayerParams& layer(int t) const;
};

struct SolverState {
    ComplexImage X;
    RealGrid Z1, Z2, D1, D2; // magnitude-domain auxiliaries and multipliers
    std::vector<double> P;   // NLTV dual field, indexed by the current graph
    NLWeights weights;
    int iteration = 0;
    std::vector<double> primal_history;
    std::vector<double> dual_history;
    std::vector<double> objective_history;
    double input_scale = 0.0; // Frobenius norm of the warm-start magnitude
    double h0 = 0.0;          // frozen bandwidth of the warm-start guide
};

// One data-consistency update: blends the masked echo with the re-phased
// regularizer pull-back rho * sum(Z_i - D_i) in the echo domain, scales by
// the closed-form diagonal (kept cells 1/(1+b*rho), dropped cells 1/(b*rho)
// where b is the number of active auxiliary branches), and images the result.
ComplexImage x_update(const SolverState& state, const OperatorPlan& plan,
                      const ComplexImage& echo, const SamplingMask& mask,
                      double rho, SolverMode mode);

// Runs the full recursion from the matched-filter warm start. Returns the
// final complex image along with the terminal state (residual histories
// included). Throws DivergenceError if the iterate norm exceeds 1e6 times
// the input scale.
std::pair<ComplexImage, SolverState> admm_solve(const ComplexImage& echo,
                                                const OperatorPlan& plan,
                                                const SamplingMask& mask,
                                                const SolverConfig& cfg);

// Latest (primal, dual) residual pair; UsageError before the first layer.
std::pair<double, double> residuals(const SolverState& state);

// CSV dump of the residual history: iteration, primal, dual, objective.
std::string residual_csv(const SolverState& state);

} // namespace sphr
