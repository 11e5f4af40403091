#include "mmot/dual.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mmot {

namespace {

using ArrayMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrayMap = Eigen::Map<const Eigen::ArrayXd>;

void check_potentials(const RegularizedProblem& prob, const Potentials& u) {
    if (static_cast<int>(u.size()) != prob.m())
        throw std::invalid_argument("potentials: need one block per mode");
    for (const auto& blk : u) {
        if (static_cast<int>(blk.size()) != prob.n())
            throw std::invalid_argument("potentials: block length must be n");
        for (double v : blk)
            if (!std::isfinite(v)) throw std::invalid_argument("potentials: entries must be finite");
    }
}

std::pair<double, double> exponent_range(const DenseTensor& t) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : t.data) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
    }
    return {lo, hi};
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
    return s.value();
}

}  // namespace

void validate_problem(const RegularizedProblem& prob, bool require_positive_marginals) {
    if (!(prob.gamma > 0.0)) throw std::invalid_argument("problem: gamma must be positive");
    if (prob.cost.shape.count == 0 ||
        static_cast<std::int64_t>(prob.cost.data.size()) != prob.cost.shape.count)
        throw std::invalid_argument("problem: cost tensor is malformed");
    for (double c : prob.cost.data) {
        if (!std::isfinite(c)) throw std::invalid_argument("problem: cost entries must be finite");
        if (c < 0.0) throw std::invalid_argument("problem: cost entries must be >= 0");
    }
    if (static_cast<int>(prob.marginals.size()) != prob.m())
        throw std::invalid_argument("problem: need one marginal per mode");
    for (const auto& p : prob.marginals) {
        if (static_cast<int>(p.size()) != prob.n())
            throw std::invalid_argument("problem: marginal length must be n");
        CompensatedSum s;
        for (double v : p) {
            if (!(v >= 0.0)) throw std::invalid_argument("problem: marginal entries must be >= 0");
            if (require_positive_marginals && v <= 0.0)
                throw std::invalid_argument("problem: marginal entries must be strictly positive");
            s.add(v);
        }
        if (std::abs(s.value() - 1.0) > 1e-12)
            throw std::invalid_argument("problem: marginals must sum to 1 within 1e-12");
    }
}

std::vector<double> KernelEvaluation::normalized_marginal(int k) const {
    const auto& mm = marginal_mantissas.at(static_cast<std::size_t>(k));
    std::vector<double> q(mm.size());
    for (std::size_t j = 0; j < mm.size(); ++j) q[j] = mm[j] / total_mantissa;
    return q;
}

std::vector<std::vector<double>> KernelEvaluation::normalized_marginals() const {
    std::vector<std::vector<double>> q(marginal_mantissas.size());
    for (std::size_t k = 0; k < marginal_mantissas.size(); ++k)
        q[k] = normalized_marginal(static_cast<int>(k));
    return q;
}

Potentials zero_potentials(int m, int n) {
    return Potentials(static_cast<std::size_t>(m),
                      std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

DenseTensor build_log_kernel(const RegularizedProblem& prob, const Potentials& u) {
    check_potentials(prob, u);
    const int m = prob.m(), n = prob.n();
    DenseTensor lk(prob.cost.shape);
    const double inv_gamma = 1.0 / prob.gamma;
    ConstArrayMap cost(prob.cost.data.data(), static_cast<Eigen::Index>(prob.cost.data.size()));
    ArrayMap out(lk.data.data(), static_cast<Eigen::Index>(lk.data.size()));
    out = -inv_gamma * cost;
    for (int k = 0; k < m; ++k) {
        const std::int64_t stride = lk.shape.stride(k);
        const std::int64_t outer = lk.shape.count / (stride * n);
        const auto& blk = u[static_cast<std::size_t>(k)];
        double* p = lk.data.data();
        for (std::int64_t o = 0; o < outer; ++o)
            for (int j = 0; j < n; ++j) {
                const double add = blk[static_cast<std::size_t>(j)];
                double* row = p + (o * n + j) * stride;
                for (std::int64_t i = 0; i < stride; ++i) row[i] += add;
            }
    }
    return lk;
}

KernelEvaluation eval_kernel(const RegularizedProblem& prob, const Potentials& u, int threads) {
    KernelEvaluation ke;
    ke.log_kernel = build_log_kernel(prob, u);
    auto [lo, hi] = exponent_range(ke.log_kernel);
    if (!std::isfinite(hi) || !std::isfinite(lo))
        throw NumericalFailure("kernel evaluation produced non-finite exponents", lo, hi);
    ke.shift = hi;
    ke.mantissa = DenseTensor(ke.log_kernel.shape);
    {
        ConstArrayMap lk(ke.log_kernel.data.data(),
                         static_cast<Eigen::Index>(ke.log_kernel.data.size()));
        ArrayMap mant(ke.mantissa.data.data(), static_cast<Eigen::Index>(ke.mantissa.data.size()));
        mant = (lk - ke.shift).exp();
    }
    CompensatedSum total;
    for (double v : ke.mantissa.data) total.add(v);
    ke.total_mantissa = total.value();
    if (!(ke.total_mantissa > 0.0) || !std::isfinite(ke.total_mantissa))
        throw NumericalFailure("kernel mass is not positive and finite", lo, hi);
    ke.log_total = ke.shift + std::log(ke.total_mantissa);
    ke.marginal_mantissas = all_marginals(ke.mantissa, threads);
    return ke;
}

double dual_value_from_kernel(const RegularizedProblem& prob, const KernelEvaluation& ke,
                              const Potentials& u) {
    CompensatedSum dots;
    for (int k = 0; k < prob.m(); ++k)
        dots.add(dot(u[static_cast<std::size_t>(k)], prob.marginals[static_cast<std::size_t>(k)]));
    return prob.gamma * (ke.log_total - dots.value());
}

double dual_value(const RegularizedProblem& prob, const Potentials& u) {
    DenseTensor lk = build_log_kernel(prob, u);
    auto [lo, hi] = exponent_range(lk);
    if (!std::isfinite(hi) || !std::isfinite(lo))
        throw NumericalFailure("dual evaluation produced non-finite exponents", lo, hi);
    CompensatedSum s;
    for (double v : lk.data) s.add(std::exp(v - hi));
    const double log_total = hi + std::log(s.value());
    CompensatedSum dots;
    for (int k = 0; k < prob.m(); ++k)
        dots.add(dot(u[static_cast<std::size_t>(k)], prob.marginals[static_cast<std::size_t>(k)]));
    return prob.gamma * (log_total - dots.value());
}

Potentials gradient_from_marginals(const RegularizedProblem& prob,
                                   const std::vector<std::vector<double>>& q) {
    Potentials g(q.size());
    for (std::size_t k = 0; k < q.size(); ++k) {
        const auto& p = prob.marginals[k];
        g[k].resize(q[k].size());
        for (std::size_t j = 0; j < q[k].size(); ++j)
            g[k][j] = prob.gamma * (q[k][j] - p[j]);
    }
    return g;
}

Potentials dual_gradient(const RegularizedProblem& prob, const Potentials& u) {
    KernelEvaluation ke = eval_kernel(prob, u);
    return gradient_from_marginals(prob, ke.normalized_marginals());
}

Potentials block_minimize_with_kernel(const RegularizedProblem& prob,
                                      const DenseTensor& log_kernel, const Potentials& u,
                                      int k) {
    const int m = prob.m(), n = prob.n();
    if (k < 0 || k >= m) throw std::invalid_argument("block_minimize: block index out of range");
    const auto& target = prob.marginals[static_cast<std::size_t>(k)];
    const std::int64_t stride = log_kernel.shape.stride(k);
    const std::int64_t outer = log_kernel.shape.count / (stride * n);
    // Per-slice log-sum-exp over mode k.
    std::vector<double> slice_max(static_cast<std::size_t>(n),
                                  -std::numeric_limits<double>::infinity());
    const double* p = log_kernel.data.data();
    for (std::int64_t o = 0; o < outer; ++o)
        for (int j = 0; j < n; ++j) {
            const double* row = p + (o * n + j) * stride;
            double& mx = slice_max[static_cast<std::size_t>(j)];
            for (std::int64_t i = 0; i < stride; ++i)
                if (row[i] > mx) mx = row[i];
        }
    std::vector<CompensatedSum> acc(static_cast<std::size_t>(n));
    for (std::int64_t o = 0; o < outer; ++o)
        for (int j = 0; j < n; ++j) {
            const double* row = p + (o * n + j) * stride;
            const double mx = slice_max[static_cast<std::size_t>(j)];
            CompensatedSum& a = acc[static_cast<std::size_t>(j)];
            for (std::int64_t i = 0; i < stride; ++i) a.add(std::exp(row[i] - mx));
        }
    Potentials out = u;
    auto& blk = out[static_cast<std::size_t>(k)];
    for (int j = 0; j < n; ++j) {
        const double pj = target[static_cast<std::size_t>(j)];
        if (!(pj > 0.0)) {
            auto [lo, hi] = exponent_range(log_kernel);
            throw NumericalFailure("block_minimize: zero marginal entry", lo, hi);
        }
        const double log_marg = slice_max[static_cast<std::size_t>(j)] +
                                std::log(acc[static_cast<std::size_t>(j)].value());
        blk[static_cast<std::size_t>(j)] += std::log(pj) - log_marg;
    }
    return out;
}

Potentials block_minimize(const RegularizedProblem& prob, const Potentials& u, int k) {
    DenseTensor lk = build_log_kernel(prob, u);
    return block_minimize_with_kernel(prob, lk, u, k);
}

DenseTensor plan_from_kernel(const KernelEvaluation& ke) {
    DenseTensor X(ke.mantissa.shape);
    const double inv = 1.0 / ke.total_mantissa;
    for (std::size_t i = 0; i < X.data.size(); ++i) X.data[i] = ke.mantissa.data[i] * inv;
    return X;
}

DenseTensor reconstruct_primal(const RegularizedProblem& prob, const Potentials& u) {
    KernelEvaluation ke = eval_kernel(prob, u);
    return plan_from_kernel(ke);
}

double primal_value(const RegularizedProblem& prob, const DenseTensor& X) {
    return inner(prob.cost, X) - prob.gamma * entropy(X);
}

Potentials to_lambda(const Potentials& u, double gamma) {
    const double shift = gamma / static_cast<double>(u.size());
    Potentials out(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        out[k].resize(u[k].size());
        for (std::size_t j = 0; j < u[k].size(); ++j) out[k][j] = -gamma * u[k][j] - shift;
    }
    return out;
}

Potentials from_lambda(const Potentials& lambda, double gamma) {
    const double inv_m = 1.0 / static_cast<double>(lambda.size());
    Potentials out(lambda.size());
    for (std::size_t k = 0; k < lambda.size(); ++k) {
        out[k].resize(lambda[k].size());
        for (std::size_t j = 0; j < lambda[k].size(); ++j)
            out[k][j] = -lambda[k][j] / gamma - inv_m;
    }
    return out;
}

double kernel_entry_floor(const RegularizedProblem& prob) {
    return std::exp(-norm_inf(prob.cost) / prob.gamma);
}

}  // namespace mmot
