#pragma once
// Exact LP oracle for small instances: dense two-phase primal simplex with
// Bland's anti-cycling rule on the transport polytope (variables = tensor
// entries, constraints = marginal equalities with redundant rows dropped).

#include <vector>

#include "mmot/tensor.hpp"

namespace mmot {

enum class LPStatus { optimal, infeasible, iteration_limit };

struct LPSolution {
    double optimal_value = 0.0;
    DenseTensor plan;
    LPStatus status = LPStatus::optimal;
};

// Minimizes <cost, X> over tensors with the given marginals. Refuses
// instances with more than 10^4 entries. The marginal system has rank
// m*n - (m-1) (every block shares the total-mass row), so the last row of
// every block after the first is dropped before the simplex runs.
LPSolution lp_solve(const DenseTensor& cost, const std::vector<std::vector<double>>& marginals);

}  // namespace mmot
