#include "mmot/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

namespace mmot {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Recentre each block so its max equals minus its min, then compare against
// the dual radius the target marginals imply (1% slack). Mirrors the check
// solve_regularized performs at stopping.
bool recentred_within_radius(const RegularizedProblem& prob, const Potentials& u) {
    double minp = std::numeric_limits<double>::infinity();
    for (const auto& p : prob.marginals) {
        for (double v : p) minp = std::min(minp, v);
    }
    if (!(minp > 0.0)) return true;
    const double bound = 0.5 * (norm_inf(prob.cost) / prob.gamma - 0.5 * std::log(minp));
    double worst = 0.0;
    for (const auto& block : u) {
        const auto [lo, hi] = std::minmax_element(block.begin(), block.end());
        worst = std::max(worst, (*hi - *lo) / 2.0);
    }
    return worst <= bound * 1.01 + 1e-12;
}

}  // namespace

Potentials finite_diff_gradient(const RegularizedProblem& prob, const Potentials& u, double h) {
    validate_problem(prob, false);
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: h must be positive");
    const int m = prob.m();
    const int n = prob.n();
    if (static_cast<int>(u.size()) != m) {
        throw std::invalid_argument("finite_diff_gradient: potential block count mismatch");
    }
    Potentials grad = zero_potentials(m, n);
    Potentials probe = u;
    for (int k = 0; k < m; ++k) {
        for (int i = 0; i < n; ++i) {
            probe[k][i] = u[k][i] + h;
            const double above = dual_value(prob, probe);
            probe[k][i] = u[k][i] - h;
            const double below = dual_value(prob, probe);
            probe[k][i] = u[k][i];
            grad[k][i] = (above - below) / (2.0 * h);
        }
    }
    return grad;
}

SolveResult sinkhorn_solve(const RegularizedProblem& prob, const StoppingRule& stopping,
                           const SolveOptions& options) {
    validate_problem(prob, /*require_positive_marginals=*/true);
    const int m = prob.m();
    const int n = prob.n();
    const double gamma = prob.gamma;
    const auto& targets = prob.marginals;
    const int threads = std::max(1, options.threads);

    SolveResult out;
    const auto start = Clock::now();

    Potentials u = zero_potentials(m, n);
    KernelEvaluation kernel = eval_kernel(prob, u, threads);
    double phi = dual_value_from_kernel(prob, kernel, u);
    std::int64_t t = 0;
    int last_block = -1;

    while (true) {
        const auto q = kernel.normalized_marginals();
        CompensatedSum viol_sum;
        CompensatedSum viol_sq;
        CompensatedSum gap_sum;
        for (int k = 0; k < m; ++k) {
            viol_sum.add(l1_diff(q[k], targets[k]));
            for (int i = 0; i < n; ++i) {
                const double d = q[k][i] - targets[k][i];
                viol_sq.add(d * d);
                gap_sum.add(u[k][i] * d);
            }
        }
        const double violation = 2.0 * viol_sum.value();
        const double violation_l2 = std::sqrt(viol_sq.value());
        // F(X(u)) + phi(u) collapses to gamma * sum_k u_k . (q_k - p_k).
        const double gap = gamma * gap_sum.value();
        if (options.trace) {
            out.trace.push_back({t, phi, gap, violation, violation_l2, last_block});
        }
        const bool met = violation + gap <= stopping.threshold;
        if (met || t >= stopping.max_iterations) {
            out.plan = plan_from_kernel(kernel);
            out.dual_point = u;
            out.dual_value = phi;
            out.gap = gap;
            out.violation = violation;
            out.iterations = t;
            out.complete = met;
            out.reason = met ? StopReason::criterion : StopReason::iteration_cap;
            out.dual_radius_ok = recentred_within_radius(prob, u);
            out.wall_ms = elapsed_ms(start);
            return out;
        }

        // Greedy rule: fix the block whose marginal is farthest in l1.
        int block = 0;
        double worst = -1.0;
        for (int k = 0; k < m; ++k) {
            const double dist = l1_diff(q[k], targets[k]);
            if (dist > worst) {
                worst = dist;
                block = k;
            }
        }
        u = block_minimize_with_kernel(prob, kernel.log_kernel, u, block);
        kernel = eval_kernel(prob, u, threads);
        const double phi_next = dual_value_from_kernel(prob, kernel, u);
        if (phi_next > phi + 1e-9) {
            throw MonotonicityError("exact block update increased the dual objective by " +
                                    std::to_string(phi_next - phi));
        }
        phi = phi_next;
        ++t;
        last_block = block;
    }
}

}  // namespace mmot
