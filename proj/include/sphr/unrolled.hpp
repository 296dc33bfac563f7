#pragma once

// K-layer unrolled reconstruction network: the ADMM recursion executed at
// fixed depth with an independently learnable parameter set per layer,
// trained against a normalized magnitude loss by simultaneous-perturbation
// stochastic approximation (SPSA) in an unconstrained reparameterization.
// Gradients are never propagated through the FFT chain; each SPSA step
// costs two forward passes regardless of depth.

#include "sphr/core.hpp"
#include "sphr/operators.hpp"
#include "sphr/solver.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sphr {

// The learnable stack: one set of ADMM scalars per layer.
struct NetworkParams {
    std::vector<LayerParams> layers;

    int depth() const { return int(layers.size()); }

    // Throws UsageError when empty or when any layer violates its ranges.
    void validate() const;
};

// Depth-K stack of the pinned initialization: rho = 0.5, tau = 0.2,
// lambda = 0.05 * scale, delta = 0.1 * scale, theta = 4, identical across
// layers. `scale` is meant to be the median magnitude of a representative
// matched-filter image so thresholds stay meaningful across scene scales.
NetworkParams default_network(int depth, double scale);

struct TrainConfig {
    int epochs = 100;
    int batch_size = 4;
    double spsa_step = 2.0;    // a: gain on the gradient estimate
    double spsa_perturb = 0.5; // c: probe radius in reparameterized units
    double step_decay = 0.602; // alpha: a_k = a / (k+1)^alpha
    double perturb_decay = 0.101; // gamma: c_k = c / (k+1)^gamma
    std::uint64_t seed = 0;

    // Throws UsageError on non-positive gains, negative decay exponents,
    // negative epochs, or batch_size < 1.
    void validate() const;
};

// One training example: the recorded echo, the sampling pattern it was
// acquired through, and the magnitude ground truth.
struct TrainSample {
    ComplexImage echo;
    SamplingMask mask;
    RealGrid label;
};

// Runs the layer recursion at exactly depth() layers with no early
// stopping: a thin wrapper over admm_solve in fixed-depth layer-varying
// mode, so the network forward pass and the classic solver share one code
// path. Validates params before any compute; deterministic bit-for-bit.
ComplexImage forward(const NetworkParams& params, const ComplexImage& echo,
                     const OperatorPlan& plan, const SamplingMask& mask);

// Mean over image pairs of ||  |output| - label ||_F^2 / ||label||_F^2,
// further divided by the per-pair pixel count. Depends on output magnitudes
// only, so it is invariant to any per-image phase. Throws UsageError on
// count or dimension mismatch and DataError on a zero-norm label.
double loss(const std::vector<ComplexImage>& outputs,
            const std::vector<RealGrid>& labels);

// Smooth map pair between feasible layer stacks and R^(5K), laid out
// layer-major in checkpoint order (rho, lambda, tau, delta, theta):
// sigmoid for rho, softplus for lambda, tau, delta, 1 + softplus for
// theta. Any real vector maps to layers satisfying every range invariant
// (floors cover the underflow corners); to_unconstrained inverts the map
// on its smooth interior. from_unconstrained throws UsageError when the
// vector length is not a multiple of 5.
std::vector<double> to_unconstrained(const NetworkParams& params);
NetworkParams from_unconstrained(const std::vector<double>& z);

// SPSA training over the 5K-dimensional parameter vector, reparameterized
// through the map above so every iterate is feasible. Per-epoch sample order is shuffled by
// the seeded generator; each step probes the batch loss at z +/- c_k * delta
// with a Rademacher delta and updates z against the two-sided estimate.
//
// Returns the best parameters seen (lowest two-sided probe average, taken
// at the pre-update iterate of the step that observed it) and the per-epoch
// mean of those probe averages. Zero epochs returns init unchanged with an
// empty history. Identical seeds give identical histories and parameters.
// A non-finite loss aborts with DivergenceError carrying the epoch, step,
// and probe values; solver divergence during an evaluation is rethrown
// with the same context.
//
// The two probe evaluations of a step and the per-sample forwards inside
// a batch are independent of one another; this implementation runs them
// serially and updates parameters strictly in step order.
std::pair<NetworkParams, std::vector<double>> train(
    const std::vector<TrainSample>& data, const OperatorPlan& plan,
    const TrainConfig& cfg, const NetworkParams& init);

// Checkpoint file: magic "SPHP" | version u32 LE | K u32 LE | 5K f64 LE in
// layer order (rho, lambda, tau, delta, theta). Round-trips losslessly.
// save throws DataError on I/O failure; load throws DataError on missing
// or malformed files, version mismatch, truncation, or out-of-range values.
void save_checkpoint(const NetworkParams& params, const std::string& path);
NetworkParams load_checkpoint(const std::string& path);

// Two-column CSV of the training history: header "epoch,mean_loss", one
// row per epoch starting at 1, losses printed with full precision.
std::string loss_history_csv(const std::vector<double>& history);

} // namespace sphr
