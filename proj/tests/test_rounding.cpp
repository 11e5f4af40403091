#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mmot/instance.hpp"
#include "mmot/rounding.hpp"
#include "mmot/tensor.hpp"
#include "test_support.hpp"

using namespace mmot;

namespace {

// Build an approximately feasible tensor: a product measure of the targets,
// perturbed multiplicatively and renormalized to mass 1.
DenseTensor perturbed_product(const std::vector<std::vector<double>>& targets,
                              SplitMix64& rng, double noise) {
    const int m = static_cast<int>(targets.size());
    const int n = static_cast<int>(targets[0].size());
    DenseTensor V(TensorShape(m, n));
    for (std::int64_t flat = 0; flat < V.shape.count; ++flat) {
        double value = 1.0;
        for (int k = 0; k < m; ++k) {
            const auto idx = static_cast<std::size_t>((flat / V.shape.stride(k)) % n);
            value *= targets[static_cast<std::size_t>(k)][idx];
        }
        V[flat] = value * (1.0 + noise * (2.0 * rng.next_unit() - 1.0));
    }
    CompensatedSum mass;
    for (double v : V.data) mass.add(v);
    for (auto& v : V.data) v /= mass.value();
    return V;
}

void check_feasible(const DenseTensor& rounded,
                    const std::vector<std::vector<double>>& targets, double tol = 1e-10) {
    for (int k = 0; k < rounded.shape.modes; ++k) {
        CHECK(l1_diff(marginal(rounded, k), targets[static_cast<std::size_t>(k)]) <= tol);
    }
    for (double v : rounded.data) CHECK(v >= 0.0);
}

}  // namespace

TEST_CASE("mode_scale: identity, annihilation, loop oracle") {
    SplitMix64 rng(41);
    const DenseTensor V = test::random_tensor(3, 2, rng);

    const DenseTensor same = mode_scale(V, 1, {1.0, 1.0});
    CHECK(same.data == V.data);

    const DenseTensor zero = mode_scale(V, 0, {0.0, 0.0});
    for (double v : zero.data) CHECK(v == 0.0);

    const std::vector<double> d{2.0, 3.0};
    const DenseTensor scaled = mode_scale(V, 1, d);
    for (std::int64_t flat = 0; flat < V.shape.count; ++flat) {
        const auto idx = static_cast<std::size_t>((flat / V.shape.stride(1)) % 2);
        CHECK(scaled[flat] == V[flat] * d[idx]);
    }

    CHECK_THROWS_AS(mode_scale(V, 3, d), std::invalid_argument);
    CHECK_THROWS_AS(mode_scale(V, 0, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(mode_scale(V, 0, {-1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("rounding a feasible tensor returns it bit-for-bit") {
    // Product measure of its own marginals: already feasible.
    std::vector<std::vector<double>> targets{{0.3, 0.7}, {0.6, 0.4}};
    DenseTensor V(TensorShape(2, 2));
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            V[i * 2 + j] = targets[0][static_cast<std::size_t>(i)] *
                           targets[1][static_cast<std::size_t>(j)];
        }
    }
    const auto [rounded, report] = round_to_polytope(V, targets);
    CHECK(rounded.data == V.data);
    CHECK(report.l1_change == 0.0);
    for (double v : report.input_violation) CHECK(v <= 1e-15);
}

TEST_CASE("rounding the hand-checkable 2x2 example") {
    DenseTensor V(TensorShape(2, 2));
    V[0] = 0.6;  // (0,0)
    V[3] = 0.4;  // (1,1)
    const std::vector<std::vector<double>> targets{{0.5, 0.5}, {0.5, 0.5}};
    const auto [rounded, report] = round_to_polytope(V, targets);
    // Scaling caps the first row at 0.5; the deficits (0, 0.1) in both modes
    // re-enter as their outer product over 0.1, landing on entry (1,1).
    CHECK(rounded[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(rounded[1] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(rounded[2] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(rounded[3] == doctest::Approx(0.5).epsilon(1e-14));
    check_feasible(rounded, targets);
    CHECK(report.l1_change <= report.bound + 1e-9);
    // Each mode's marginal of V is (0.6, 0.4), an l1 distance of 0.2 from its
    // target, so the guarantee is 2 * (0.2 + 0.2).
    CHECK(report.bound == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("rounding fixes a tensor whose violation hides in the last mode") {
    // Mode-0 marginals already match, so a rounder that never rescales the
    // final mode would return this tensor unchanged -- and infeasible.
    DenseTensor V(TensorShape(2, 2));
    V[1] = 0.5;  // (0,1)
    V[3] = 0.5;  // (1,1)
    const std::vector<std::vector<double>> targets{{0.5, 0.5}, {0.5, 0.5}};
    const auto [rounded, report] = round_to_polytope(V, targets);
    check_feasible(rounded, targets);
    for (double v : rounded.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(report.l1_change <= report.bound + 1e-9);
}

TEST_CASE("rounding a perturbed 3x3x3 product measure restores exact marginals") {
    SplitMix64 rng(42);
    std::vector<std::vector<double>> targets;
    for (int k = 0; k < 3; ++k) targets.push_back(test::random_simplex_vector(3, rng));
    const DenseTensor V = perturbed_product(targets, rng, 0.3);
    const auto [rounded, report] = round_to_polytope(V, targets);
    check_feasible(rounded, targets);

    // The report's violation entries match a direct recomputation, and the
    // certified inequality holds.
    CompensatedSum change;
    for (std::size_t i = 0; i < V.data.size(); ++i) {
        change.add(std::abs(V.data[i] - rounded.data[i]));
    }
    CHECK(report.l1_change == doctest::Approx(change.value()).epsilon(1e-12));
    double total_violation = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double want = l1_diff(marginal(V, k), targets[static_cast<std::size_t>(k)]);
        CHECK(report.input_violation[static_cast<std::size_t>(k)] ==
              doctest::Approx(want).epsilon(1e-12));
        total_violation += want;
    }
    CHECK(report.bound == doctest::Approx(2.0 * total_violation).epsilon(1e-12));
    CHECK(report.l1_change <= report.bound + 1e-9);
}

TEST_CASE("the l1 change respects its bound across random shapes and violation scales") {
    SplitMix64 rng(43);
    const double noises[] = {1e-8, 1e-4, 0.05, 0.3, 0.5};
    int case_index = 0;
    for (int m = 2; m <= 4; ++m) {
        for (int n = 2; n <= 4; ++n) {
            for (double noise : noises) {
                std::vector<std::vector<double>> targets;
                for (int k = 0; k < m; ++k) {
                    targets.push_back(test::random_simplex_vector(n, rng));
                }
                const DenseTensor V = perturbed_product(targets, rng, noise);
                const auto [rounded, report] = round_to_polytope(V, targets);
                INFO("case ", case_index, ": m=", m, " n=", n, " noise=", noise);
                check_feasible(rounded, targets);
                CHECK(report.l1_change <= report.bound + 1e-9);
                CHECK(report.clamped_mass <= 1e-12);
                ++case_index;
            }
        }
    }
}

TEST_CASE("rounding is idempotent") {
    SplitMix64 rng(44);
    std::vector<std::vector<double>> targets;
    for (int k = 0; k < 3; ++k) targets.push_back(test::random_simplex_vector(3, rng));
    const DenseTensor V = perturbed_product(targets, rng, 0.4);
    const auto [once, report1] = round_to_polytope(V, targets);
    const auto [twice, report2] = round_to_polytope(once, targets);
    for (std::size_t i = 0; i < once.data.size(); ++i) {
        CHECK(std::abs(once.data[i] - twice.data[i]) <= 1e-12);
    }
    CHECK(report2.l1_change <= 1e-10);
}

TEST_CASE("the per-mode deficits after scaling share one l1 mass") {
    // Every mode's deficit vector sums to 1 - (mass after scaling); this is
    // what makes the outer-product correction restore all marginals at once.
    SplitMix64 rng(45);
    std::vector<std::vector<double>> targets;
    for (int k = 0; k < 3; ++k) targets.push_back(test::random_simplex_vector(3, rng));
    DenseTensor V = perturbed_product(targets, rng, 0.5);

    // Reproduce the scaling stage only: cap each mode's marginal at its target.
    DenseTensor scaled = V;
    for (int r = 0; r < 3; ++r) {
        const auto current = marginal(scaled, r);
        std::vector<double> x(3, 1.0);
        for (int i = 0; i < 3; ++i) {
            const double cur = current[static_cast<std::size_t>(i)];
            const double goal = targets[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
            if (cur > 0.0) x[static_cast<std::size_t>(i)] = std::min(goal / cur, 1.0);
        }
        scaled = mode_scale(scaled, r, x);
    }
    CompensatedSum mass;
    for (double v : scaled.data) mass.add(v);
    const double deficit_mass = 1.0 - mass.value();
    for (int r = 0; r < 3; ++r) {
        const auto current = marginal(scaled, r);
        CompensatedSum err;
        for (int i = 0; i < 3; ++i) {
            err.add(targets[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] -
                    current[static_cast<std::size_t>(i)]);
        }
        CHECK(err.value() == doctest::Approx(deficit_mass).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("rounding validates its inputs") {
    std::vector<std::vector<double>> targets{{0.5, 0.5}, {0.5, 0.5}};
    DenseTensor neg(TensorShape(2, 2), 0.3);
    neg[0] = -0.2;
    CHECK_THROWS_AS(round_to_polytope(neg, targets), std::invalid_argument);

    DenseTensor heavy(TensorShape(2, 2), 0.5);  // mass 2
    CHECK_THROWS_AS(round_to_polytope(heavy, targets), std::invalid_argument);

    DenseTensor ok(TensorShape(2, 2), 0.25);
    CHECK_THROWS_AS(round_to_polytope(ok, {{0.5, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(round_to_polytope(ok, {{0.5, 0.5}, {0.7, 0.7}}), std::invalid_argument);
}
