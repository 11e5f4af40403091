#include "mmot/solver.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "mmot/baselines.hpp"
#include "mmot/rounding.hpp"

namespace mmot {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double max_abs_difference(const Potentials& a, const Potentials& b) {
    double out = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        for (std::size_t i = 0; i < a[k].size(); ++i) {
            out = std::max(out, std::abs(a[k][i] - b[k][i]));
        }
    }
    return out;
}

Potentials extrapolate(const Potentials& eta, double beta, const Potentials& zeta) {
    Potentials out = eta;
    if (beta != 0.0) {
        for (std::size_t k = 0; k < out.size(); ++k) {
            for (std::size_t i = 0; i < out[k].size(); ++i) {
                out[k][i] = eta[k][i] + beta * (zeta[k][i] - eta[k][i]);
            }
        }
    }
    return out;
}

// phi restricted to the segment u(beta) = eta + beta*(zeta - eta), evaluated
// from the (already computed) log-kernel at eta plus a per-entry direction
// gather, so each probe is three vectorized passes over the tensor.
class SegmentObjective {
  public:
    SegmentObjective(const RegularizedProblem& prob, const DenseTensor& base_log_kernel,
                     const Potentials& eta, const Potentials& zeta)
        : gamma_(prob.gamma), base_(base_log_kernel), direction_(base_log_kernel.shape) {
        const int m = prob.m();
        const int n = prob.n();
        const std::int64_t count = base_log_kernel.shape.count;
        for (int k = 0; k < m; ++k) {
            const std::int64_t stride = base_log_kernel.shape.stride(k);
            const std::int64_t outer = count / (stride * n);
            for (std::int64_t o = 0; o < outer; ++o) {
                for (int j = 0; j < n; ++j) {
                    const double dj = zeta[k][j] - eta[k][j];
                    if (dj == 0.0) continue;
                    double* slab = direction_.data.data() + (o * n + j) * stride;
                    for (std::int64_t i = 0; i < stride; ++i) slab[i] += dj;
                }
            }
        }
        CompensatedSum lin0, lin1;
        for (int k = 0; k < m; ++k) {
            for (int i = 0; i < n; ++i) {
                lin0.add(eta[k][i] * prob.marginals[k][i]);
                lin1.add((zeta[k][i] - eta[k][i]) * prob.marginals[k][i]);
            }
        }
        lin0_ = lin0.value();
        lin1_ = lin1.value();
        buffer_.resize(static_cast<std::size_t>(count));
    }

    double operator()(double beta) {
        const auto count = static_cast<Eigen::Index>(base_.shape.count);
        Eigen::Map<const Eigen::ArrayXd> base(base_.data.data(), count);
        Eigen::Map<const Eigen::ArrayXd> dir(direction_.data.data(), count);
        Eigen::Map<Eigen::ArrayXd> probe(buffer_.data(), count);
        probe = base + beta * dir;
        const double shift = probe.maxCoeff();
        const double mass = (probe - shift).exp().sum();
        const double log_total = shift + std::log(mass);
        const double value = gamma_ * (log_total - (lin0_ + beta * lin1_));
        if (!std::isfinite(value)) {
            throw NumericalFailure("dual objective non-finite along the line-search segment",
                                   probe.minCoeff(), shift);
        }
        return value;
    }

  private:
    double gamma_;
    const DenseTensor& base_;
    DenseTensor direction_;
    double lin0_ = 0.0;
    double lin1_ = 0.0;
    std::vector<double> buffer_;
};

// Golden-section on [0, 1] to absolute argument tolerance 1e-10 within a
// 200-evaluation budget; the endpoint beta = 0 wins whenever the best sampled
// value fails to improve on it by more than 1e-15 * max(1, |phi(0)|), so flat
// segments and converged incumbents stay exactly where they are.
template <typename F>
double golden_section_beta(F&& phi) {
    constexpr double kArgTol = 1e-10;
    constexpr int kBudget = 200;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double best_x = 0.0;
    double best_v = std::numeric_limits<double>::infinity();
    auto consider = [&](double x, double v) {
        if (v < best_v || (v == best_v && x < best_x)) {
            best_v = v;
            best_x = x;
        }
    };
    double a = 0.0;
    double b = 1.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = phi(c);
    consider(c, fc);
    double fd = phi(d);
    consider(d, fd);
    int evals = 2;
    while ((b - a) > kArgTol && evals < kBudget) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = phi(c);
            consider(c, fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = phi(d);
            consider(d, fd);
        }
        ++evals;
    }
    const double f0 = phi(0.0);
    consider(0.0, f0);
    if (f0 <= best_v + 1e-15 * std::max(1.0, std::abs(f0))) return 0.0;
    return best_x;
}

double min_marginal_entry(const RegularizedProblem& prob) {
    double out = std::numeric_limits<double>::infinity();
    for (const auto& p : prob.marginals) {
        for (double v : p) out = std::min(out, v);
    }
    return out;
}

// Recentre each block so its max equals minus its min, then compare the
// resulting inf-norms against the radius the smoothed marginals imply for
// the dual optimum (1% slack). Diagnostic only; checked at stopping.
bool recentred_within_radius(const RegularizedProblem& prob, const Potentials& u) {
    const double minp = min_marginal_entry(prob);
    if (!(minp > 0.0)) return true;
    const double bound =
        0.5 * (norm_inf(prob.cost) / prob.gamma - 0.5 * std::log(minp));
    double worst = 0.0;
    for (const auto& block : u) {
        const auto [lo, hi] = std::minmax_element(block.begin(), block.end());
        worst = std::max(worst, (*hi - *lo) / 2.0);
    }
    return worst <= bound * 1.01 + 1e-12;
}

double squared_norm(const Potentials& g) {
    CompensatedSum s;
    for (const auto& block : g) {
        for (double v : block) s.add(v * v);
    }
    return s.value();
}

// Stopping-criterion marginal term: twice the summed l1 distances to the
// targets; optionally also the stacked l2 distance (the rate bounds use it).
double violation_sum(const RegularizedProblem& prob,
                     const std::vector<std::vector<double>>& margs, double* l2out) {
    const int m = prob.m();
    const int n = prob.n();
    CompensatedSum v1;
    CompensatedSum v2;
    for (int k = 0; k < m; ++k) {
        v1.add(l1_diff(margs[k], prob.marginals[k]));
        if (l2out != nullptr) {
            for (int i = 0; i < n; ++i) {
                const double d = margs[k][i] - prob.marginals[k][i];
                v2.add(d * d);
            }
        }
    }
    if (l2out != nullptr) *l2out = std::sqrt(v2.value());
    return 2.0 * v1.value();
}

// F(X(u)) + phi(u) collapses to gamma * sum_k u_k . (q_k - p_k), where q_k
// are the normalized kernel marginals at u; this prices a reconstruction
// without touching the tensor.
double reconstruction_gap(const RegularizedProblem& prob, const Potentials& u,
                          const std::vector<std::vector<double>>& q) {
    const int m = prob.m();
    const int n = prob.n();
    CompensatedSum s;
    for (int k = 0; k < m; ++k) {
        for (int i = 0; i < n; ++i) s.add(u[k][i] * (q[k][i] - prob.marginals[k][i]));
    }
    return prob.gamma * s.value();
}

}  // namespace

double line_search_beta(const RegularizedProblem& prob, const Potentials& eta,
                        const Potentials& zeta) {
    validate_problem(prob, false);
    if (max_abs_difference(zeta, eta) <= 1e-14) return 0.0;
    const DenseTensor base = build_log_kernel(prob, eta);
    SegmentObjective phi(prob, base, eta, zeta);
    return golden_section_beta(phi);
}

int greedy_block(const Potentials& grad) {
    if (grad.empty()) throw std::invalid_argument("greedy_block: empty gradient");
    int best = 0;
    double best_sq = -1.0;
    for (int k = 0; k < static_cast<int>(grad.size()); ++k) {
        CompensatedSum s;
        for (double v : grad[k]) s.add(v * v);
        const double sq = s.value();
        if (sq > best_sq) {
            best_sq = sq;
            best = k;
        }
    }
    return best;
}

double step_size(double delta, double g, double A) {
    if (delta < 0.0) {
        if (delta < -1e-9) {
            throw MonotonicityError("step_size: dual progress is negative (delta = " +
                                    std::to_string(delta) + ")");
        }
        delta = 0.0;
    }
    if (!(g > 1e-300)) {
        throw std::domain_error("step_size: squared gradient norm vanished; the dual is at "
                                "its minimum and no further step exists");
    }
    if (A < 0.0) throw std::invalid_argument("step_size: accumulated weight must be >= 0");
    // Larger root of g*a^2 - 2*delta*a - 2*delta*A = 0.
    return (delta + std::sqrt(delta * delta + 2.0 * delta * A * g)) / g;
}

double gradient_lipschitz_bound(const RegularizedProblem& prob) {
    return static_cast<double>(prob.m()) / prob.gamma;
}

double dual_radius_bound(const RegularizedProblem& prob) {
    const double minp = min_marginal_entry(prob);
    if (!(minp > 0.0)) {
        throw std::invalid_argument(
            "dual_radius_bound: requires strictly positive target marginals");
    }
    const double mn = static_cast<double>(prob.m()) * static_cast<double>(prob.n());
    return std::sqrt(mn) / 2.0 * (norm_inf(prob.cost) - prob.gamma / 2.0 * std::log(minp));
}

PdaamState pdaam_init(const RegularizedProblem& prob, int threads) {
    validate_problem(prob, /*require_positive_marginals=*/true);
    PdaamState st;
    st.eta = zero_potentials(prob.m(), prob.n());
    st.zeta = st.eta;
    st.theta = st.eta;
    st.averaged =
        DenseTensor(prob.cost.shape, 1.0 / static_cast<double>(prob.cost.shape.count));
    st.kernel_eta = eval_kernel(prob, st.eta, std::max(1, threads));
    st.kernel_theta = st.kernel_eta;
    st.phi_eta = dual_value_from_kernel(prob, st.kernel_eta, st.eta);
    st.phi_theta = st.phi_eta;
    return st;
}

void pdaam_iterate(const RegularizedProblem& prob, PdaamState& st, int threads) {
    if (st.converged) return;
    const int m = prob.m();
    const int n = prob.n();
    const int nthreads = std::max(1, threads);

    // Extrapolate toward the momentum point along the dual segment.
    double beta = 0.0;
    if (max_abs_difference(st.zeta, st.eta) > 1e-14) {
        SegmentObjective phi_segment(prob, st.kernel_eta.log_kernel, st.eta, st.zeta);
        beta = golden_section_beta(phi_segment);
    }
    st.theta = extrapolate(st.eta, beta, st.zeta);
    if (beta != 0.0) {
        st.kernel_theta = eval_kernel(prob, st.theta, nthreads);
    } else {
        // The incumbent's kernel is exactly the extrapolated kernel; it is
        // rebuilt below after the block update, so hand it over instead of
        // copying the tensor.
        st.kernel_theta = std::move(st.kernel_eta);
    }

    const auto q = st.kernel_theta.normalized_marginals();
    const Potentials grad = gradient_from_marginals(prob, q);
    st.last_gradient_sq = squared_norm(grad);
    st.cur_violation = violation_sum(prob, q, nullptr);
    st.cur_gap = reconstruction_gap(prob, st.theta, q);

    const double phi_before = st.phi_eta;
    st.phi_theta = dual_value_from_kernel(prob, st.kernel_theta, st.theta);
    if (st.phi_theta > phi_before + 1e-9) {
        throw MonotonicityError("line search increased the dual objective by " +
                                std::to_string(st.phi_theta - phi_before));
    }

    if (st.last_gradient_sq <= 1e-300) {
        // Exact dual optimum reached; nothing further can move.
        st.converged = true;
        st.eta = st.theta;
        st.phi_eta = st.phi_theta;
        st.kernel_eta = st.kernel_theta;
        st.post_gap = st.cur_gap;
        st.post_violation = st.cur_violation;
        st.last_step_weight = 0.0;
        st.last_step_progress = 0.0;
        return;
    }

    const int block = greedy_block(grad);
    Potentials eta_next =
        block_minimize_with_kernel(prob, st.kernel_theta.log_kernel, st.theta, block);
    st.kernel_eta = eval_kernel(prob, eta_next, nthreads);
    const double phi_next = dual_value_from_kernel(prob, st.kernel_eta, eta_next);
    const double delta = st.phi_theta - phi_next;
    if (delta < -1e-9) {
        throw MonotonicityError("block update increased the dual objective by " +
                                std::to_string(-delta));
    }
    st.last_step_progress = std::max(delta, 0.0);
    const double a = step_size(st.last_step_progress, st.last_gradient_sq, st.weight_sum);
    st.last_step_weight = a;
    const double weight_next = st.weight_sum + a;
    for (int k = 0; k < m; ++k) {
        for (int i = 0; i < n; ++i) st.zeta[k][i] -= a * grad[k][i];
    }
    DenseTensor reconstruction = plan_from_kernel(st.kernel_theta);
    if (weight_next > 0.0) {
        const std::size_t count = st.averaged.data.size();
        for (std::size_t i = 0; i < count; ++i) {
            st.averaged.data[i] =
                (a * reconstruction.data[i] + st.weight_sum * st.averaged.data[i]) / weight_next;
        }
    } else {
        st.averaged = std::move(reconstruction);
    }
    st.eta = std::move(eta_next);
    st.phi_eta = phi_next;
    st.weight_sum = weight_next;
    ++st.iterations;
    st.last_block = block;

    const auto q_post = st.kernel_eta.normalized_marginals();
    st.post_violation = violation_sum(prob, q_post, nullptr);
    st.post_gap = reconstruction_gap(prob, st.eta, q_post);
}

SolveResult solve_regularized(const RegularizedProblem& prob, const StoppingRule& stopping,
                              const SolveOptions& options) {
    validate_problem(prob, /*require_positive_marginals=*/true);
    const int m = prob.m();
    const int threads = std::max(1, options.threads);

    const double lip = gradient_lipschitz_bound(prob);
    const double radius = dual_radius_bound(prob);

    SolveResult out;
    const auto start = Clock::now();
    PdaamState st = pdaam_init(prob, threads);

    auto enforce_rate_bounds = [&](std::int64_t it, double gap, double viol_l2) {
        if (it < 1) return;
        const double tt = static_cast<double>(it) * static_cast<double>(it);
        const double gap_bound = 2.0 * m * lip * radius * radius / tt;
        const double viol_bound = 8.0 * m * lip * radius / tt;
        if (gap > gap_bound + 1e-9) {
            throw RateBoundError("averaged-plan gap " + std::to_string(gap) +
                                 " exceeds its guaranteed rate " + std::to_string(gap_bound) +
                                 " at iteration " + std::to_string(it));
        }
        if (viol_l2 > viol_bound + 1e-9) {
            throw RateBoundError("averaged-plan marginal error " + std::to_string(viol_l2) +
                                 " exceeds its guaranteed rate " + std::to_string(viol_bound) +
                                 " at iteration " + std::to_string(it));
        }
    };

    auto finish = [&](DenseTensor plan, Potentials u, double phi_u, double gap, double viol,
                      std::int64_t iters, bool complete, StopReason reason) {
        out.plan = std::move(plan);
        out.dual_point = std::move(u);
        out.dual_value = phi_u;
        out.gap = gap;
        out.violation = viol;
        out.iterations = iters;
        out.complete = complete;
        out.reason = reason;
        out.dual_radius_ok = recentred_within_radius(prob, out.dual_point);
        out.wall_ms = elapsed_ms(start);
    };

    while (true) {
        // Candidate (a): the averaged plan against the incumbent dual value.
        double viol2_avg = 0.0;
        const auto avg_marginals = all_marginals(st.averaged, threads);
        const double viol_avg = violation_sum(prob, avg_marginals, &viol2_avg);
        const double gap_avg = primal_value(prob, st.averaged) + st.phi_eta;
        enforce_rate_bounds(st.iterations, gap_avg, viol2_avg);
        if (options.trace) {
            out.trace.push_back(
                {st.iterations, st.phi_eta, gap_avg, viol_avg, viol2_avg, st.last_block});
        }
        if (viol_avg + gap_avg <= stopping.threshold) {
            finish(std::move(st.averaged), std::move(st.eta), st.phi_eta, gap_avg, viol_avg,
                   st.iterations, true, StopReason::criterion);
            return out;
        }
        if (st.iterations >= stopping.max_iterations) {
            finish(std::move(st.averaged), std::move(st.eta), st.phi_eta, gap_avg, viol_avg,
                   st.iterations, false, StopReason::iteration_cap);
            return out;
        }

        pdaam_iterate(prob, st, threads);

        // Candidate (b): the reconstruction at the extrapolated point. The
        // iterate has already paid for the block update that follows it, so
        // report the count at which the candidate was actually evaluated.
        if (st.cur_violation + st.cur_gap <= stopping.threshold) {
            const std::int64_t iters = st.converged ? st.iterations : st.iterations - 1;
            finish(plan_from_kernel(st.kernel_theta), std::move(st.theta), st.phi_theta,
                   st.cur_gap, st.cur_violation, iters, true, StopReason::criterion);
            return out;
        }
        if (st.converged) {
            finish(plan_from_kernel(st.kernel_theta), std::move(st.theta), st.phi_theta,
                   st.cur_gap, st.cur_violation, st.iterations, false, StopReason::converged);
            return out;
        }

        // Candidate (c): the reconstruction right after the block update.
        if (st.post_violation + st.post_gap <= stopping.threshold) {
            // Keep the trace contiguous: record the averaged-plan row for
            // this iteration before returning the winning candidate.
            double viol2_tail = 0.0;
            const auto tail_marginals = all_marginals(st.averaged, threads);
            const double viol_tail = violation_sum(prob, tail_marginals, &viol2_tail);
            const double gap_tail = primal_value(prob, st.averaged) + st.phi_eta;
            enforce_rate_bounds(st.iterations, gap_tail, viol2_tail);
            if (options.trace) {
                out.trace.push_back({st.iterations, st.phi_eta, gap_tail, viol_tail, viol2_tail,
                                     st.last_block});
            }
            finish(plan_from_kernel(st.kernel_eta), std::move(st.eta), st.phi_eta, st.post_gap,
                   st.post_violation, st.iterations, true, StopReason::criterion);
            return out;
        }
    }
}

std::int64_t default_iteration_cap(int m, int n, double cost_inf_norm, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    const double m4 = static_cast<double>(m) * m * m * m;
    const double predicted =
        std::sqrt(128.0 * m4 * n * std::log(static_cast<double>(n))) * cost_inf_norm / eps;
    const double capped = 10.0 * std::ceil(predicted);
    if (!(capped >= 1.0)) return 1;
    return std::min<std::int64_t>(1000000, static_cast<std::int64_t>(capped));
}

MotResult solve_mot(const Instance& inst, double eps, Algorithm algorithm,
                    std::int64_t max_iterations_override, const SolveOptions& options) {
    validate_instance(inst);
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    if (inst.n < 2) {
        throw std::invalid_argument(
            "solve_mot requires n >= 2 (the regularization scale divides by ln n)");
    }

    const int m = inst.m;
    const int n = inst.n;
    const double cost_inf = norm_inf(inst.cost);

    MotResult out;
    out.gamma = eps / (2.0 * m * std::log(static_cast<double>(n)));
    out.certificate.eps_target = eps;
    out.certificate.lipschitz_bound = static_cast<double>(m) / out.gamma;

    const double inf = std::numeric_limits<double>::infinity();
    const double eps_prime = (cost_inf > 0.0) ? eps / (8.0 * cost_inf) : inf;

    if (cost_inf == 0.0 || eps_prime >= 2.0 * m) {
        // Zero cost, or eps so large that the smoothing weight would leave
        // its regime (eps >= 16*m*|C|_inf). Any feasible plan is then within
        // eps of optimal (cost spread across the polytope is at most |C|_inf),
        // so round the uniform tensor and certify directly.
        out.eps_prime = 0.0;
        out.smoothed_marginals = inst.marginals;
        DenseTensor uniform(inst.cost.shape, 1.0 / static_cast<double>(inst.cost.shape.count));
        const auto start = Clock::now();
        SolveResult direct;
        direct.dual_point = zero_potentials(m, n);
        direct.dual_value = dual_value(RegularizedProblem{inst.cost, inst.marginals, out.gamma},
                                       direct.dual_point);
        {
            CompensatedSum v1;
            for (int k = 0; k < m; ++k) {
                v1.add(l1_diff(marginal(uniform, k), inst.marginals[k]));
            }
            direct.violation = 2.0 * v1.value();
        }
        direct.plan = uniform;
        direct.gap = 0.0;
        direct.iterations = 0;
        direct.complete = true;
        direct.reason = StopReason::criterion;
        direct.wall_ms = elapsed_ms(start);
        auto [plan, report] = round_to_polytope(uniform, inst.marginals);
        (void)report;
        out.plan = std::move(plan);
        out.primal_cost = inner(inst.cost, out.plan);
        out.certificate.gap = 0.0;
        out.certificate.marginal_violation = direct.violation;
        out.certificate.radius_bound = inf;
        out.certificate.rate_gap_bound = inf;
        out.certificate.rate_violation_bound = inf;
        out.inner = std::move(direct);
        return out;
    }

    out.eps_prime = eps_prime;
    const double mix = eps_prime / (4.0 * m);  // < 1/2 by the guard above
    std::vector<std::vector<double>> smoothed(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        smoothed[k].resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            smoothed[k][i] = (1.0 - mix) * inst.marginals[k][i] + mix / n;
        }
    }
    out.smoothed_marginals = smoothed;

    RegularizedProblem prob{inst.cost, std::move(smoothed), out.gamma};
    StoppingRule rule;
    rule.threshold = eps / 2.0;
    rule.max_iterations = (max_iterations_override >= 0)
                              ? max_iterations_override
                              : default_iteration_cap(m, n, cost_inf, eps);

    SolveResult solved = (algorithm == Algorithm::pdaam)
                             ? solve_regularized(prob, rule, options)
                             : sinkhorn_solve(prob, rule, options);

    auto [plan, report] = round_to_polytope(solved.plan, inst.marginals);
    (void)report;
    out.plan = std::move(plan);
    out.primal_cost = inner(inst.cost, out.plan);

    out.certificate.gap = solved.gap;
    out.certificate.marginal_violation = solved.violation;
    out.certificate.radius_bound = dual_radius_bound(prob);
    if (solved.iterations >= 1) {
        const double tt =
            static_cast<double>(solved.iterations) * static_cast<double>(solved.iterations);
        const double lip = out.certificate.lipschitz_bound;
        const double radius = out.certificate.radius_bound;
        out.certificate.rate_gap_bound = 2.0 * m * lip * radius * radius / tt;
        out.certificate.rate_violation_bound = 8.0 * m * lip * radius / tt;
    } else {
        out.certificate.rate_gap_bound = inf;
        out.certificate.rate_violation_bound = inf;
    }
    out.inner = std::move(solved);
    return out;
}

}  // namespace mmot
