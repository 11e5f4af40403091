#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "mmot/instance.hpp"
#include "mmot/lp.hpp"
#include "mmot/tensor.hpp"
#include "test_support.hpp"

using namespace mmot;

namespace {

// Independent ground truth: enumerate every basis of the transport LP and
// take the best feasible basic solution. The constraint system keeps all n
// rows of mode 0 and the first n-1 rows of every later mode (rank mn-(m-1));
// with continuous random data the optimum sits on a nondegenerate vertex.
double best_vertex_value(const DenseTensor& cost,
                         const std::vector<std::vector<double>>& marginals) {
    const int m = cost.shape.modes;
    const int n = cost.shape.points;
    const auto vars = static_cast<int>(cost.shape.count);
    const int rows = n + (m - 1) * (n - 1);

    // Dense constraint matrix columns and right-hand side.
    std::vector<std::vector<double>> col(static_cast<std::size_t>(vars),
                                         std::vector<double>(static_cast<std::size_t>(rows), 0.0));
    std::vector<double> rhs(static_cast<std::size_t>(rows), 0.0);
    for (int j = 0; j < vars; ++j) {
        for (int k = 0; k < m; ++k) {
            const auto idx = static_cast<int>((j / cost.shape.stride(k)) % n);
            if (k == 0) {
                col[static_cast<std::size_t>(j)][static_cast<std::size_t>(idx)] = 1.0;
            } else if (idx < n - 1) {
                const int row = n + (k - 1) * (n - 1) + idx;
                col[static_cast<std::size_t>(j)][static_cast<std::size_t>(row)] = 1.0;
            }
        }
    }
    for (int i = 0; i < n; ++i) rhs[static_cast<std::size_t>(i)] = marginals[0][static_cast<std::size_t>(i)];
    for (int k = 1; k < m; ++k) {
        for (int i = 0; i < n - 1; ++i) {
            rhs[static_cast<std::size_t>(n + (k - 1) * (n - 1) + i)] =
                marginals[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
        }
    }

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i) pick[static_cast<std::size_t>(i)] = i;

    std::vector<double> a(static_cast<std::size_t>(rows * (rows + 1)));
    while (true) {
        // Solve the square system over the picked columns by elimination.
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < rows; ++c) {
                a[static_cast<std::size_t>(r * (rows + 1) + c)] =
                    col[static_cast<std::size_t>(pick[static_cast<std::size_t>(c)])]
                       [static_cast<std::size_t>(r)];
            }
            a[static_cast<std::size_t>(r * (rows + 1) + rows)] = rhs[static_cast<std::size_t>(r)];
        }
        bool singular = false;
        for (int p = 0; p < rows && !singular; ++p) {
            int piv = p;
            for (int r = p + 1; r < rows; ++r) {
                if (std::abs(a[static_cast<std::size_t>(r * (rows + 1) + p)]) >
                    std::abs(a[static_cast<std::size_t>(piv * (rows + 1) + p)])) {
                    piv = r;
                }
            }
            if (std::abs(a[static_cast<std::size_t>(piv * (rows + 1) + p)]) < 1e-10) {
                singular = true;
                break;
            }
            if (piv != p) {
                for (int c = p; c <= rows; ++c) {
                    std::swap(a[static_cast<std::size_t>(p * (rows + 1) + c)],
                              a[static_cast<std::size_t>(piv * (rows + 1) + c)]);
                }
            }
            const double d = a[static_cast<std::size_t>(p * (rows + 1) + p)];
            for (int r = p + 1; r < rows; ++r) {
                const double f = a[static_cast<std::size_t>(r * (rows + 1) + p)] / d;
                if (f == 0.0) continue;
                for (int c = p; c <= rows; ++c) {
                    a[static_cast<std::size_t>(r * (rows + 1) + c)] -=
                        f * a[static_cast<std::size_t>(p * (rows + 1) + c)];
                }
            }
        }
        if (!singular) {
            std::vector<double> x(static_cast<std::size_t>(rows));
            bool feasible = true;
            for (int p = rows - 1; p >= 0; --p) {
                double v = a[static_cast<std::size_t>(p * (rows + 1) + rows)];
                for (int c = p + 1; c < rows; ++c) {
                    v -= a[static_cast<std::size_t>(p * (rows + 1) + c)] *
                         x[static_cast<std::size_t>(c)];
                }
                x[static_cast<std::size_t>(p)] = v / a[static_cast<std::size_t>(p * (rows + 1) + p)];
                if (x[static_cast<std::size_t>(p)] < -1e-9) feasible = false;
            }
            if (feasible) {
                double value = 0.0;
                for (int c = 0; c < rows; ++c) {
                    value += cost[pick[static_cast<std::size_t>(c)]] * x[static_cast<std::size_t>(c)];
                }
                best = std::min(best, value);
            }
        }
        // Next combination of `rows` columns out of `vars`.
        int i = rows - 1;
        while (i >= 0 && pick[static_cast<std::size_t>(i)] == vars - rows + i) --i;
        if (i < 0) break;
        ++pick[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < rows; ++j) {
            pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
        }
    }
    return best;
}

void check_lp_solution(const LPSolution& sol, const DenseTensor& cost,
                       const std::vector<std::vector<double>>& marginals) {
    REQUIRE(sol.status == LPStatus::optimal);
    for (double v : sol.plan.data) CHECK(v >= 0.0);
    for (std::size_t k = 0; k < marginals.size(); ++k) {
        CHECK(l1_diff(marginal(sol.plan, static_cast<int>(k)), marginals[k]) <= 1e-9);
    }
    CHECK(sol.optimal_value == doctest::Approx(inner(cost, sol.plan)).epsilon(1e-10));
}

}  // namespace

TEST_CASE("antidiagonal 2x2 cost is solved by the diagonal plan at value 0") {
    DenseTensor cost(TensorShape(2, 2));
    cost[1] = 1.0;
    cost[2] = 1.0;
    const std::vector<std::vector<double>> marginals{{0.5, 0.5}, {0.5, 0.5}};
    const LPSolution sol = lp_solve(cost, marginals);
    check_lp_solution(sol, cost, marginals);
    CHECK(sol.optimal_value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sol.plan[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(sol.plan[1] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(sol.plan[2] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(sol.plan[3] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("constant cost is worth the constant under any feasible marginals") {
    SplitMix64 rng(55);
    DenseTensor cost(TensorShape(3, 3), 0.7);
    std::vector<std::vector<double>> marginals;
    for (int k = 0; k < 3; ++k) marginals.push_back(test::random_simplex_vector(3, rng));
    const LPSolution sol = lp_solve(cost, marginals);
    check_lp_solution(sol, cost, marginals);
    CHECK(sol.optimal_value == doctest::Approx(0.7).epsilon(1e-10));
}

TEST_CASE("degenerate point marginals force the single feasible vertex") {
    DenseTensor cost(TensorShape(2, 2));
    cost[1] = 0.35;  // entry (0,1): the only admissible cell
    cost[0] = 0.9;
    cost[2] = 0.9;
    cost[3] = 0.9;
    const std::vector<std::vector<double>> marginals{{1.0, 0.0}, {0.0, 1.0}};
    const LPSolution sol = lp_solve(cost, marginals);
    check_lp_solution(sol, cost, marginals);
    CHECK(sol.optimal_value == doctest::Approx(0.35).epsilon(1e-12));
    CHECK(sol.plan[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("simplex optimum matches exhaustive vertex enumeration at m=2, n=3") {
    for (std::uint64_t seed = 300; seed < 304; ++seed) {
        SplitMix64 rng(seed);
        const DenseTensor cost = test::random_tensor(2, 3, rng);
        std::vector<std::vector<double>> marginals;
        for (int k = 0; k < 2; ++k) marginals.push_back(test::random_simplex_vector(3, rng));
        const LPSolution sol = lp_solve(cost, marginals);
        check_lp_solution(sol, cost, marginals);
        const double truth = best_vertex_value(cost, marginals);
        CHECK(sol.optimal_value == doctest::Approx(truth).epsilon(1e-9));
    }
}

TEST_CASE("simplex optimum matches exhaustive vertex enumeration at m=3, n=3") {
    // One full validation run at the pinned oracle scale: C(27,7) = 888030
    // bases, a few seconds of elimination work.
    SplitMix64 rng(301);
    const DenseTensor cost = test::random_tensor(3, 3, rng);
    std::vector<std::vector<double>> marginals;
    for (int k = 0; k < 3; ++k) marginals.push_back(test::random_simplex_vector(3, rng));
    const LPSolution sol = lp_solve(cost, marginals);
    check_lp_solution(sol, cost, marginals);
    const double truth = best_vertex_value(cost, marginals);
    CHECK(sol.optimal_value == doctest::Approx(truth).epsilon(1e-9));
}

TEST_CASE("the lp oracle accepts every simplex-marginal instance it can hold") {
    // The product measure is always feasible, so random valid inputs must
    // come back optimal across shapes.
    for (std::uint64_t seed = 310; seed < 313; ++seed) {
        const Instance inst = generate_instance(2 + static_cast<int>(seed % 3), 3, seed);
        const LPSolution sol = lp_solve(inst.cost, inst.marginals);
        check_lp_solution(sol, inst.cost, inst.marginals);
    }
}

TEST_CASE("oracle scale cap and input validation") {
    DenseTensor big(TensorShape(5, 7));  // 16807 entries > 10^4
    std::vector<std::vector<double>> marginals(5, std::vector<double>(7, 1.0 / 7.0));
    CHECK_THROWS_AS(lp_solve(big, marginals), std::invalid_argument);

    DenseTensor cost(TensorShape(2, 2), 0.5);
    CHECK_THROWS_AS(lp_solve(cost, {{0.5, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(lp_solve(cost, {{0.5, 0.5}, {0.7, 0.7}}), std::invalid_argument);
    CHECK_THROWS_AS(lp_solve(cost, {{0.5, 0.5}, {-0.5, 1.5}}), std::invalid_argument);
}
