#pragma once
// Accelerated primal-dual solver for the regularized problem and the outer
// pipeline that turns it into a certified epsilon-approximate transport plan:
// pick gamma and the smoothing level from eps, smooth the marginals, run the
// dual solver to the stopping criterion, round the result back to the raw
// marginals, and assemble the certificate.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmot/dual.hpp"
#include "mmot/instance.hpp"
#include "mmot/tensor.hpp"

namespace mmot {

// A convergence-rate guarantee failed along the run; indicates a defect in
// the step-size recursion or the averaged-plan update.
struct RateBoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One per-iteration diagnostics row. All primal quantities refer to the
// averaged plan (the object the convergence-rate guarantees speak about).
struct TraceRow {
    std::int64_t iteration = 0;  // block minimizations completed
    double dual_value = 0.0;     // dual objective at the incumbent point
    double gap = 0.0;            // F(plan) + dual objective
    double violation = 0.0;      // 2 * sum_k l1(marginal_k - target_k)
    double violation_l2 = 0.0;   // sqrt(sum_k ||marginal_k - target_k||_2^2)
    int block = -1;              // block updated by the step ending here (-1 at start)
};

struct StoppingRule {
    // Stop once 2*sum_k l1(marginal_k - target_k) + F(plan) + phi(dual) <= threshold.
    double threshold = 0.0;
    std::int64_t max_iterations = 1000000;
};

enum class StopReason { criterion, converged, iteration_cap };

struct SolveResult {
    DenseTensor plan;            // mass-1 candidate that ended the run (pre-rounding)
    Potentials dual_point;       // dual point paired with the plan
    std::int64_t iterations = 0; // block minimizations completed at evaluation time
    double dual_value = 0.0;     // dual objective at dual_point
    double gap = 0.0;            // F(plan) + dual_value (signed)
    double violation = 0.0;      // 2 * sum_k l1(marginal_k - target_k)
    bool complete = false;       // stopping criterion met before the cap
    StopReason reason = StopReason::iteration_cap;
    bool dual_radius_ok = true;  // recentred potentials within the radius bound at stop
    double wall_ms = 0.0;        // solver loop only
    std::vector<TraceRow> trace; // filled when options request it
};

struct SolveOptions {
    int threads = 1;
    bool trace = false;
};

// Everything the a-posteriori guarantee needs, evaluated at the stop.
struct Certificate {
    double eps_target = 0.0;
    double gap = 0.0;                  // signed duality-gap surrogate of the stopped run
    double marginal_violation = 0.0;   // 2 * sum_k l1, against the smoothed targets
    double lipschitz_bound = 0.0;      // m / gamma, dual gradient Lipschitz constant
    double radius_bound = 0.0;         // dual-radius bound from the smoothed marginals
    double rate_gap_bound = 0.0;       // 2 m L R^2 / t^2 (infinite when t = 0)
    double rate_violation_bound = 0.0; // 8 m L R / t^2   (infinite when t = 0)
};

enum class Algorithm { pdaam, sinkhorn };

struct MotResult {
    DenseTensor plan;        // rounded: marginals match the raw inputs exactly
    double primal_cost = 0.0;
    Certificate certificate;
    SolveResult inner;       // the regularized solve behind the plan
    double gamma = 0.0;
    double eps_prime = 0.0;  // smoothing level (0 when no smoothing ran)
    std::vector<std::vector<double>> smoothed_marginals;
};

// 1-D minimization of the dual objective along dual_point + beta*(other - dual_point),
// beta in [0, 1]: golden-section to argument tolerance 1e-10 within a fixed
// 200-evaluation budget; returns 0 when the segment is degenerate
// (max|other - dual_point| <= 1e-14) or flat (best sampled improvement below
// 1e-15 * max(1, |phi(0)|)).
double line_search_beta(const RegularizedProblem& prob, const Potentials& eta,
                        const Potentials& zeta);

// Smallest block index with maximal gradient-block 2-norm.
int greedy_block(const Potentials& grad);

// Larger root of a^2*g = 2*(A + a)*delta, the step making the accumulated
// weights consistent with the dual progress delta = phi(search point) -
// phi(updated point) >= 0 and squared gradient norm g.
double step_size(double delta, double g, double A);

// m / gamma: Lipschitz constant of the dual gradient.
double gradient_lipschitz_bound(const RegularizedProblem& prob);

// sqrt(m n)/2 * (|C|_inf - gamma/2 * ln min_k,i target_k[i]): radius of the
// dual ball the optimizer lives in, in constraint-multiplier scale.
double dual_radius_bound(const RegularizedProblem& prob);

// State of the accelerated solver between iterations. One iteration:
// extrapolate the incumbent toward the momentum point (1-D line search),
// exactly minimize the gradient-dominant block there, take the step weight
// that keeps the accumulated weights consistent with the dual progress, move
// the momentum point along the gradient, and fold the extrapolated point's
// reconstruction into the weighted primal average.
struct PdaamState {
    Potentials eta;              // incumbent dual point
    Potentials zeta;             // momentum dual point
    Potentials theta;            // extrapolated point of the last iteration
    double weight_sum = 0.0;     // accumulated step weights
    DenseTensor averaged;        // weighted average of reconstructions (mass 1)
    KernelEvaluation kernel_eta;    // kernel at eta
    KernelEvaluation kernel_theta;  // kernel at theta (last iteration)
    double phi_eta = 0.0;
    double phi_theta = 0.0;
    std::int64_t iterations = 0;  // block minimizations completed
    int last_block = -1;
    bool converged = false;       // gradient vanished at the extrapolated point

    // Last step's scalars, exposed for invariant checks.
    double last_step_weight = 0.0;   // a: weight_sum grew by exactly this
    double last_step_progress = 0.0; // dual decrease of the block update (clamped >= 0)
    double last_gradient_sq = 0.0;   // squared gradient norm at theta

    // Stopping diagnostics for the two reconstruction candidates of the last
    // iteration: X(theta) before the block update and X(eta) after it. Gaps
    // come from the closed form F(X(u)) + phi(u) = gamma * sum_k u_k.(q_k - p_k).
    double cur_gap = 0.0;
    double cur_violation = 0.0;
    double post_gap = 0.0;
    double post_violation = 0.0;
};

PdaamState pdaam_init(const RegularizedProblem& prob, int threads = 1);

// One full iteration; no-op once state.converged is set. Throws
// MonotonicityError if a step increases the dual objective beyond 1e-9.
void pdaam_iterate(const RegularizedProblem& prob, PdaamState& state, int threads = 1);

// Greedy accelerated block minimization on the dual with averaged primal
// reconstruction. The stopping inequality is evaluated on three certified
// (plan, dual point) pairs each iteration -- the averaged plan at the
// incumbent, the reconstruction at the extrapolated point, and the
// reconstruction after the block update -- and the first pair that passes is
// returned. Requires strictly positive target marginals.
SolveResult solve_regularized(const RegularizedProblem& prob, const StoppingRule& stopping,
                              const SolveOptions& options = {});

// Full pipeline at accuracy eps (> 0): regularize, smooth, solve with the
// chosen algorithm, round against the raw marginals, certify.
MotResult solve_mot(const Instance& inst, double eps, Algorithm algorithm = Algorithm::pdaam,
                    std::int64_t max_iterations_override = -1,
                    const SolveOptions& options = {});

// The iteration budget solve_mot uses when no override is given:
// min(10^6, 10 * ceil(sqrt(128 m^4 n ln n) * |C|_inf / eps)).
std::int64_t default_iteration_cap(int m, int n, double cost_inf_norm, double eps);

}  // namespace mmot
