#include "mmot/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mmot {
namespace {

constexpr double kOptTol = 1e-9;    // reduced-cost / pivot-eligibility tolerance
constexpr double kFeasTol = 1e-9;   // residual infeasibility after phase 1
constexpr std::int64_t kMaxEntries = 10000;
constexpr int kMaxPivots = 200000;

struct Tableau {
    int rows = 0;
    int cols = 0;              // structural + artificial + 1 (rhs)
    std::vector<double> a;     // rows x cols, row-major
    std::vector<double> z;     // reduced-cost row; rhs slot carries -objective
    std::vector<int> basis;    // column currently basic in each row

    double& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
};

void pivot(Tableau& t, int row, int col) {
    const double inv = 1.0 / t.at(row, col);
    for (int j = 0; j < t.cols; ++j) t.at(row, j) *= inv;
    t.at(row, col) = 1.0;
    for (int i = 0; i < t.rows; ++i) {
        if (i == row) continue;
        const double f = t.at(i, col);
        if (f == 0.0) continue;
        for (int j = 0; j < t.cols; ++j) t.at(i, j) -= f * t.at(row, j);
        t.at(i, col) = 0.0;
    }
    const double f = t.z[col];
    if (f != 0.0) {
        for (int j = 0; j < t.cols; ++j) t.z[j] -= f * t.at(row, j);
        t.z[col] = 0.0;
    }
    t.basis[row] = col;
}

// Bland-rule simplex over columns [0, limit). Returns true on optimality,
// false when the pivot budget is exhausted first.
bool run_simplex(Tableau& t, int limit, int& budget) {
    const int rhs = t.cols - 1;
    while (budget > 0) {
        int enter = -1;
        for (int j = 0; j < limit; ++j) {
            if (t.z[j] < -kOptTol) {
                enter = j;
                break;
            }
        }
        if (enter < 0) return true;
        // Minimum-ratio test; ties go to the smallest basic variable index
        // (Bland's leaving rule, which rules out cycling).
        int leave = -1;
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < t.rows; ++i) {
            const double coef = t.at(i, enter);
            if (coef <= kOptTol) continue;
            const double ratio = t.at(i, rhs) / coef;
            if (ratio < best - 1e-12) {
                best = ratio;
                leave = i;
            } else if (ratio <= best + 1e-12 && leave >= 0 && t.basis[i] < t.basis[leave]) {
                leave = i;
            }
        }
        if (leave < 0) {
            // The transport polytope is bounded, so this only happens if the
            // tableau has degraded numerically.
            throw std::runtime_error("lp_solve: unbounded pivot direction on a bounded feasible set");
        }
        pivot(t, leave, enter);
        --budget;
    }
    return false;
}

}  // namespace

LPSolution lp_solve(const DenseTensor& cost, const std::vector<std::vector<double>>& marginals) {
    const int m = cost.shape.modes;
    const int n = cost.shape.points;
    if (cost.shape.count > kMaxEntries) {
        throw std::invalid_argument(
            "lp_solve: refusing instance with more than 10^4 tensor entries");
    }
    if (static_cast<int>(marginals.size()) != m) {
        throw std::invalid_argument("lp_solve: marginal count does not match cost order");
    }
    for (const auto& p : marginals) {
        if (static_cast<int>(p.size()) != n) {
            throw std::invalid_argument("lp_solve: marginal length does not match cost size");
        }
        double sum = 0.0;
        for (double v : p) {
            if (!std::isfinite(v) || v < 0.0) {
                throw std::invalid_argument("lp_solve: marginals must be finite and nonnegative");
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument("lp_solve: marginals must each sum to 1");
        }
    }
    for (double v : cost.data) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("lp_solve: cost entries must be finite");
        }
    }

    const int num_vars = static_cast<int>(cost.shape.count);
    // All n rows of mode 0 are kept; every later mode drops its last row.
    // The dropped rows are implied: each block sums to the shared total mass.
    const int num_rows = n + (m - 1) * (n - 1);

    Tableau t;
    t.rows = num_rows;
    t.cols = num_vars + num_rows + 1;
    t.a.assign(static_cast<std::size_t>(t.rows) * t.cols, 0.0);
    t.z.assign(static_cast<std::size_t>(t.cols), 0.0);
    t.basis.resize(static_cast<std::size_t>(t.rows));
    const int rhs = t.cols - 1;

    std::vector<int> row_of(static_cast<std::size_t>(m) * n, -1);
    {
        int row = 0;
        for (int k = 0; k < m; ++k) {
            const int keep = (k == 0) ? n : n - 1;
            for (int j = 0; j < keep; ++j) {
                row_of[static_cast<std::size_t>(k) * n + j] = row;
                t.at(row, rhs) = marginals[k][j];
                ++row;
            }
        }
    }
    for (int flat = 0; flat < num_vars; ++flat) {
        std::int64_t rem = flat;
        for (int k = 0; k < m; ++k) {
            const std::int64_t stride = cost.shape.stride(k);
            const int idx = static_cast<int>(rem / stride);
            rem %= stride;
            const int r = row_of[static_cast<std::size_t>(k) * n + idx];
            if (r >= 0) t.at(r, flat) = 1.0;
        }
    }
    for (int i = 0; i < t.rows; ++i) {
        t.at(i, num_vars + i) = 1.0;  // phase-1 artificial variable
        t.basis[i] = num_vars + i;
    }

    // Phase 1: minimize the sum of artificials. With the artificial basis,
    // the reduced cost of a structural column is minus its column sum.
    for (int j = 0; j < num_vars; ++j) {
        CompensatedSum colsum;
        for (int i = 0; i < t.rows; ++i) colsum.add(t.at(i, j));
        t.z[j] = -colsum.value();
    }
    {
        CompensatedSum mass;
        for (int i = 0; i < t.rows; ++i) mass.add(t.at(i, rhs));
        t.z[rhs] = -mass.value();
    }

    LPSolution out;
    out.plan = DenseTensor(cost.shape);
    int budget = kMaxPivots;
    if (!run_simplex(t, num_vars, budget)) {
        out.status = LPStatus::iteration_limit;
        return out;
    }
    {
        CompensatedSum residual;
        for (int i = 0; i < t.rows; ++i) {
            if (t.basis[i] >= num_vars) residual.add(std::max(t.at(i, rhs), 0.0));
        }
        if (residual.value() > kFeasTol) {
            out.status = LPStatus::infeasible;
            return out;
        }
    }
    // Drive leftover artificials out of the basis. A row with no usable
    // structural coefficient is redundant and stays inert at zero.
    for (int i = 0; i < t.rows; ++i) {
        if (t.basis[i] < num_vars) continue;
        int col = -1;
        for (int j = 0; j < num_vars; ++j) {
            if (std::abs(t.at(i, j)) > 1e-7) {
                col = j;
                break;
            }
        }
        if (col >= 0) pivot(t, i, col);
    }

    // Phase 2: minimize the real cost, artificial columns excluded.
    std::fill(t.z.begin(), t.z.end(), 0.0);
    for (int j = 0; j < num_vars; ++j) t.z[j] = cost.data[static_cast<std::size_t>(j)];
    for (int i = 0; i < t.rows; ++i) {
        if (t.basis[i] >= num_vars) continue;
        const double cb = cost.data[static_cast<std::size_t>(t.basis[i])];
        if (cb == 0.0) continue;
        for (int j = 0; j < t.cols; ++j) t.z[j] -= cb * t.at(i, j);
    }
    for (int i = 0; i < t.rows; ++i) t.z[t.basis[i]] = 0.0;

    out.status = run_simplex(t, num_vars, budget) ? LPStatus::optimal : LPStatus::iteration_limit;
    for (int i = 0; i < t.rows; ++i) {
        if (t.basis[i] < num_vars) {
            out.plan.data[static_cast<std::size_t>(t.basis[i])] = std::max(t.at(i, rhs), 0.0);
        }
    }
    out.optimal_value = inner(cost, out.plan);
    return out;
}

}  // namespace mmot
