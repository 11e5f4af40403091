#pragma once
// Reference implementations the solver is measured against: a central
// finite-difference gradient oracle and the non-accelerated greedy scaling
// baseline on the same dual objective.

#include "mmot/dual.hpp"
#include "mmot/solver.hpp"

namespace mmot {

// Central finite differences of the dual objective, one coordinate at a time.
// h must be positive.
Potentials finite_diff_gradient(const RegularizedProblem& prob, const Potentials& u, double h);

// Greedy alternating minimization without acceleration: each step exactly
// minimizes the block whose kernel marginal is farthest (l1) from its target.
// Uses the same stopping inequality as solve_regularized, evaluated on the
// current kernel reconstruction, so iteration counts are comparable.
// Requires strictly positive target marginals.
SolveResult sinkhorn_solve(const RegularizedProblem& prob, const StoppingRule& stopping,
                           const SolveOptions& options = {});

}  // namespace mmot
