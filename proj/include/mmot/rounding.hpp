#pragma once
// Projection of an approximately feasible coupling tensor onto the exact
// transport polytope: cap each mode's marginal at its target by diagonal
// scaling, then restore the removed mass with a rank-one-style correction
// built from the per-mode deficits. The ell-1 change is bounded by twice the
// total input marginal violation.

#include <utility>
#include <vector>

#include "mmot/tensor.hpp"

namespace mmot {

struct RoundingReport {
    std::vector<double> input_violation;  // per mode: ||target - marginal(input)||_1
    double l1_change = 0.0;               // ||input - output||_1
    double bound = 0.0;                   // 2 * sum of input_violation
    double clamped_mass = 0.0;            // total negative mass clamped to zero
};

// Entry at multi-index I becomes V_I * d[I_r] (mode-r diagonal scaling).
DenseTensor mode_scale(const DenseTensor& V, int r, const std::vector<double>& d);

// V must be entrywise >= 0 with total mass within 1e-6 of 1; each target on
// the simplex. Output marginals equal the targets to 1e-10 in ell-1, and the
// report's l1_change respects its bound.
std::pair<DenseTensor, RoundingReport> round_to_polytope(
    const DenseTensor& V, const std::vector<std::vector<double>>& targets);

}  // namespace mmot
