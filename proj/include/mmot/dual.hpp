#pragma once
// The entropic multimarginal transport dual in u-coordinates: stabilized
// kernel evaluation, dual objective and gradient, exact per-block
// minimization, and primal reconstruction.
//
// Conventions fixed here and used everywhere:
//  - log-kernel entry at multi-index I is sum_k u_k[I_k] - C_I / gamma;
//  - all exponentiation happens after subtracting one global shift, so no
//    intermediate overflows for exponent ranges up to ~700 post-shift;
//  - the gradient carries the factor gamma: block k is gamma*(q_k - p_k)
//    where q_k is the normalized mode-k marginal of the kernel.

#include <stdexcept>
#include <string>
#include <vector>

#include "mmot/tensor.hpp"

namespace mmot {

// Dual potentials: m blocks of n reals.
using Potentials = std::vector<std::vector<double>>;

struct RegularizedProblem {
    DenseTensor cost;                            // entries >= 0
    std::vector<std::vector<double>> marginals;  // targets, usually smoothed
    double gamma = 0.0;                          // > 0

    int m() const { return cost.shape.modes; }
    int n() const { return cost.shape.points; }
};

// Structural validation; require_positive_marginals is what the iterative
// solvers need (guaranteed upstream by marginal smoothing).
void validate_problem(const RegularizedProblem& prob, bool require_positive_marginals);

// Stabilized arithmetic failed (non-finite values, empty mass, or a zero
// marginal entry where positivity is required). Carries the log-kernel
// exponent range observed at the failure point.
struct NumericalFailure : std::runtime_error {
    double min_exponent;
    double max_exponent;
    NumericalFailure(const std::string& why, double lo, double hi)
        : std::runtime_error(why + " (log-kernel exponent range [" + std::to_string(lo) +
                             ", " + std::to_string(hi) + "])"),
          min_exponent(lo),
          max_exponent(hi) {}
};

// A dual-descent step increased the objective beyond tolerance; indicates a
// line-search or block-minimization defect.
struct MonotonicityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct KernelEvaluation {
    DenseTensor log_kernel;  // sum_k u_k[i_k] - C/gamma
    double shift = 0.0;      // global max of log_kernel
    DenseTensor mantissa;    // exp(log_kernel - shift)
    double total_mantissa = 0.0;
    double log_total = 0.0;  // shift + ln(total_mantissa) = ln of the kernel mass
    std::vector<std::vector<double>> marginal_mantissas;  // per-mode sums of mantissa

    std::vector<double> normalized_marginal(int k) const;
    std::vector<std::vector<double>> normalized_marginals() const;
};

Potentials zero_potentials(int m, int n);

// Log-kernel tensor alone (no exponentiation); building block for the
// evaluations below.
DenseTensor build_log_kernel(const RegularizedProblem& prob, const Potentials& u);

KernelEvaluation eval_kernel(const RegularizedProblem& prob, const Potentials& u,
                             int threads = 1);

// gamma * (ln kernel-mass - sum_k u_k . p_k), the minimization-form dual.
double dual_value(const RegularizedProblem& prob, const Potentials& u);
double dual_value_from_kernel(const RegularizedProblem& prob, const KernelEvaluation& ke,
                              const Potentials& u);

// Block k of the gradient is gamma*(q_k - p_k); every block sums to zero.
Potentials dual_gradient(const RegularizedProblem& prob, const Potentials& u);
Potentials gradient_from_marginals(const RegularizedProblem& prob,
                                   const std::vector<std::vector<double>>& q);

// Exact minimization over block k: u_k += ln p_k - ln (mode-k marginal of the
// kernel), the latter via per-slice log-sum-exp on the log-kernel (never
// exp-then-log). After the update the kernel has unit mass and gradient
// block k vanishes.
Potentials block_minimize(const RegularizedProblem& prob, const Potentials& u, int k);
Potentials block_minimize_with_kernel(const RegularizedProblem& prob,
                                      const DenseTensor& log_kernel, const Potentials& u,
                                      int k);

// X(u) = kernel / kernel-mass; strictly positive, total mass 1.
DenseTensor reconstruct_primal(const RegularizedProblem& prob, const Potentials& u);
DenseTensor plan_from_kernel(const KernelEvaluation& ke);

// F(X) = <C, X> - gamma * entropy(X).
double primal_value(const RegularizedProblem& prob, const DenseTensor& X);

// Affine change of coordinates to the constraint-multiplier scale:
// lambda_k = -gamma*u_k - (gamma/m)*ones. u = 0 maps to the reference point
// with every entry -gamma/m.
Potentials to_lambda(const Potentials& u, double gamma);
Potentials from_lambda(const Potentials& lambda, double gamma);

// exp(-|C|_inf / gamma): the scale of the smallest possible kernel entry,
// used by certificate bookkeeping.
double kernel_entry_floor(const RegularizedProblem& prob);

}  // namespace mmot
