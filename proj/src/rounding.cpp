#include "mmot/rounding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmot {

namespace {

void scale_mode_in_place(DenseTensor& V, int r, const std::vector<double>& d) {
    const int n = V.shape.points;
    const std::int64_t stride = V.shape.stride(r);
    const std::int64_t outer = V.shape.count / (stride * n);
    double* p = V.data.data();
    for (std::int64_t o = 0; o < outer; ++o)
        for (int j = 0; j < n; ++j) {
            const double f = d[static_cast<std::size_t>(j)];
            if (f == 1.0) continue;
            double* row = p + (o * n + j) * stride;
            for (std::int64_t i = 0; i < stride; ++i) row[i] *= f;
        }
}

}  // namespace

DenseTensor mode_scale(const DenseTensor& V, int r, const std::vector<double>& d) {
    if (r < 0 || r >= V.shape.modes)
        throw std::invalid_argument("mode_scale: mode index out of range");
    if (static_cast<int>(d.size()) != V.shape.points)
        throw std::invalid_argument("mode_scale: scaling vector length must be n");
    for (double v : d)
        if (v < 0.0) throw std::invalid_argument("mode_scale: scaling entries must be >= 0");
    DenseTensor out = V;
    scale_mode_in_place(out, r, d);
    return out;
}

std::pair<DenseTensor, RoundingReport> round_to_polytope(
    const DenseTensor& V, const std::vector<std::vector<double>>& targets) {
    const int m = V.shape.modes, n = V.shape.points;
    if (static_cast<int>(targets.size()) != m)
        throw std::invalid_argument("round_to_polytope: need one target per mode");
    for (const auto& t : targets) {
        if (static_cast<int>(t.size()) != n)
            throw std::invalid_argument("round_to_polytope: target length must be n");
        double sum = 0.0;
        for (double v : t) {
            if (!(v >= 0.0))
                throw std::invalid_argument("round_to_polytope: target entries must be >= 0");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw std::invalid_argument("round_to_polytope: targets must sum to 1 within 1e-6");
    }
    for (double v : V.data)
        if (!(v >= 0.0)) throw std::invalid_argument("round_to_polytope: input entries must be >= 0");
    {
        CompensatedSum mass;
        for (double v : V.data) mass.add(v);
        if (std::abs(mass.value() - 1.0) > 1e-6)
            throw std::invalid_argument("round_to_polytope: input mass must be 1 within 1e-6");
    }

    RoundingReport report;
    report.input_violation.resize(static_cast<std::size_t>(m));
    for (int r = 0; r < m; ++r)
        report.input_violation[static_cast<std::size_t>(r)] =
            l1_diff(targets[static_cast<std::size_t>(r)], marginal(V, r));
    {
        CompensatedSum b;
        for (double v : report.input_violation) b.add(v);
        report.bound = 2.0 * b.value();
    }

    // Cap every mode's marginal at its target. Scaling all m modes makes every
    // deficit vector nonnegative, which the correction term requires.
    DenseTensor W = V;
    std::vector<double> factors(static_cast<std::size_t>(n));
    for (int r = 0; r < m; ++r) {
        std::vector<double> cur = marginal(W, r);
        const auto& tgt = targets[static_cast<std::size_t>(r)];
        bool any = false;
        for (int j = 0; j < n; ++j) {
            const double c = cur[static_cast<std::size_t>(j)];
            double f = 1.0;  // zero current marginal (incl. 0/0): keep the slice
            if (c > 0.0) f = std::min(tgt[static_cast<std::size_t>(j)] / c, 1.0);
            factors[static_cast<std::size_t>(j)] = f;
            if (f != 1.0) any = true;
        }
        if (any) scale_mode_in_place(W, r, factors);
    }

    // Per-mode deficits against the fully scaled tensor; all share the same
    // total mass (what the scalings removed), so the correction's mode-r
    // marginal is exactly the mode-r deficit.
    std::vector<std::vector<double>> deficit(static_cast<std::size_t>(m));
    for (int r = 0; r < m; ++r) {
        std::vector<double> cur = marginal(W, r);
        auto& d = deficit[static_cast<std::size_t>(r)];
        d.resize(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
            d[static_cast<std::size_t>(j)] = targets[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] -
                                             cur[static_cast<std::size_t>(j)];
    }
    CompensatedSum last_mass_acc;
    for (double v : deficit[static_cast<std::size_t>(m - 1)]) last_mass_acc.add(std::abs(v));
    const double last_mass = last_mass_acc.value();

    if (last_mass > 0.0) {
        double denom = 1.0;
        for (int r = 0; r < m - 1; ++r) denom *= last_mass;
        std::vector<int> idx(static_cast<std::size_t>(m), 0);
        for (std::int64_t flat = 0; flat < W.shape.count; ++flat) {
            double prod = 1.0;
            for (int r = 0; r < m; ++r)
                prod *= deficit[static_cast<std::size_t>(r)][static_cast<std::size_t>(idx[static_cast<std::size_t>(r)])];
            W.data[static_cast<std::size_t>(flat)] += prod / denom;
            for (int r = m - 1; r >= 0; --r) {
                if (++idx[static_cast<std::size_t>(r)] < n) break;
                idx[static_cast<std::size_t>(r)] = 0;
            }
        }
    }

    // Floating-point noise can leave infinitesimally negative entries.
    CompensatedSum clamped;
    for (double& v : W.data)
        if (v < 0.0) {
            clamped.add(-v);
            v = 0.0;
        }
    report.clamped_mass = clamped.value();
    if (report.clamped_mass > 1e-12) {
        CompensatedSum mass;
        for (double v : W.data) mass.add(v);
        const double s = mass.value();
        if (s > 0.0)
            for (double& v : W.data) v /= s;
    }

    {
        CompensatedSum ch;
        for (std::size_t i = 0; i < W.data.size(); ++i) ch.add(std::abs(W.data[i] - V.data[i]));
        report.l1_change = ch.value();
    }
    return {std::move(W), report};
}

}  // namespace mmot
