// Command-line front end: instance generation, certified solves, paired
// benchmarking of the accelerated solver against the greedy baseline, and
// the exact LP oracle for small instances.
//
// Exit codes: 0 success (certified), 2 incomplete (iteration cap hit or a
// benchmark cell failed), 1 error (bad input, malformed file, oversized
// oracle call).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmot/baselines.hpp"
#include "mmot/instance.hpp"
#include "mmot/lp.hpp"
#include "mmot/serialize.hpp"
#include "mmot/solver.hpp"

namespace {

// format_double, with a decimal point forced onto integral finite values so
// printed optima always read as floating point ("0.0", not "0").
std::string print_double(double v) {
    std::string s = mmot::format_double(v);
    if (s.find_first_of(".eE") == std::string::npos && std::isfinite(v)) s += ".0";
    return s;
}

double median_of(std::vector<std::int64_t> values) {
    std::sort(values.begin(), values.end());
    const std::size_t k = values.size();
    if (k == 0) return std::numeric_limits<double>::quiet_NaN();
    if (k % 2 == 1) return static_cast<double>(values[k / 2]);
    return (static_cast<double>(values[k / 2 - 1]) + static_cast<double>(values[k / 2])) / 2.0;
}

struct SolveArgs {
    std::string instance_path;
    double eps = 0.0;
    std::string algorithm = "pdaam";
    std::string record_out;
    std::string plan_out;
    std::int64_t max_iters = -1;
    int threads = 1;
    bool trace = false;
};

int run_solve(const SolveArgs& args) {
    const mmot::Instance inst = mmot::read_instance(args.instance_path);
    const mmot::Algorithm algo =
        (args.algorithm == "pdaam") ? mmot::Algorithm::pdaam : mmot::Algorithm::sinkhorn;
    mmot::SolveOptions options;
    options.threads = args.threads;
    options.trace = args.trace;
    const mmot::MotResult result =
        mmot::solve_mot(inst, args.eps, algo, args.max_iters, options);
    const mmot::RunRecord record = mmot::make_run_record(result, algo);
    const std::string doc = mmot::run_record_to_json(record);
    if (args.record_out.empty()) {
        std::cout << doc;
    } else {
        mmot::write_text_file(args.record_out, doc);
    }
    if (!args.plan_out.empty()) mmot::write_plan(args.plan_out, result.plan);
    return result.inner.complete ? 0 : 2;
}

struct CompareArgs {
    int m = 4;
    int n = 15;
    std::vector<double> eps_list = {0.25, 0.1, 0.05, 0.025, 0.0125};
    std::uint64_t base_seed = 33;
    int seed_count = 5;
    std::string csv_out = "compare.csv";
    std::int64_t max_iters = -1;
    int threads = 1;
};

int run_compare(const CompareArgs& args) {
    if (args.seed_count < 1) throw std::invalid_argument("compare needs at least one seed");
    if (args.eps_list.empty()) throw std::invalid_argument("compare needs at least one eps");
    std::vector<mmot::CompareRow> rows;
    bool all_certified = true;
    for (int s = 0; s < args.seed_count; ++s) {
        const std::uint64_t seed = args.base_seed + static_cast<std::uint64_t>(s);
        const mmot::Instance inst = mmot::generate_instance(args.m, args.n, seed);
        for (const double eps : args.eps_list) {
            for (const mmot::Algorithm algo :
                 {mmot::Algorithm::pdaam, mmot::Algorithm::sinkhorn}) {
                mmot::CompareRow row;
                row.seed = seed;
                row.m = args.m;
                row.n = args.n;
                row.eps = eps;
                row.algorithm = (algo == mmot::Algorithm::pdaam) ? "pdaam" : "sinkhorn";
                try {
                    mmot::SolveOptions options;
                    options.threads = args.threads;
                    const mmot::MotResult result =
                        mmot::solve_mot(inst, eps, algo, args.max_iters, options);
                    row.iterations = result.inner.iterations;
                    row.wall_ms = result.inner.wall_ms;
                    row.final_gap = result.inner.gap;
                    row.final_violation = result.inner.violation;
                    if (!result.inner.complete) all_certified = false;
                } catch (const std::exception& e) {
                    std::cerr << "cell failed (seed " << seed << ", eps "
                              << mmot::format_double(eps) << ", " << row.algorithm
                              << "): " << e.what() << "\n";
                    row.iterations = -1;  // flags the failed cell
                    row.wall_ms = 0.0;
                    row.final_gap = std::numeric_limits<double>::quiet_NaN();
                    row.final_violation = std::numeric_limits<double>::quiet_NaN();
                    all_certified = false;
                }
                rows.push_back(std::move(row));
            }
        }
    }
    mmot::write_text_file(args.csv_out, mmot::compare_csv(rows));
    for (const double eps : args.eps_list) {
        std::vector<std::int64_t> accelerated;
        std::vector<std::int64_t> baseline;
        for (const mmot::CompareRow& row : rows) {
            if (row.eps != eps || row.iterations < 0) continue;
            (row.algorithm == "pdaam" ? accelerated : baseline).push_back(row.iterations);
        }
        std::cout << "eps=" << mmot::format_double(eps) << ": pdaam median iterations "
                  << print_double(median_of(accelerated)) << ", sinkhorn median iterations "
                  << print_double(median_of(baseline)) << "\n";
    }
    std::cout << "wrote " << args.csv_out << "\n";
    return all_certified ? 0 : 2;
}

int run_oracle(const std::string& instance_path, const std::string& plan_out) {
    const mmot::Instance inst = mmot::read_instance(instance_path);
    const mmot::LPSolution solution = mmot::lp_solve(inst.cost, inst.marginals);
    if (solution.status == mmot::LPStatus::iteration_limit) {
        std::cerr << "error: simplex hit its pivot budget before optimality\n";
        return 2;
    }
    if (solution.status == mmot::LPStatus::infeasible) {
        std::cerr << "error: the marginal constraint system is infeasible\n";
        return 1;
    }
    std::cout << print_double(solution.optimal_value) << "\n";
    const std::string out = plan_out.empty() ? instance_path + ".lp_plan" : plan_out;
    mmot::write_plan(out, solution.plan);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Certified approximate solver for multimarginal transport problems"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "Generate a seeded random instance file");
    int gen_m = 3;
    int gen_n = 4;
    std::uint64_t gen_seed = 0;
    std::string gen_out = "instance.json";
    gen->add_option("--m", gen_m, "number of marginals (>= 2)");
    gen->add_option("--n", gen_n, "points per marginal (>= 2)");
    gen->add_option("--seed", gen_seed, "PRNG seed");
    gen->add_option("--out", gen_out, "output path");

    auto* solve = app.add_subcommand("solve", "Solve an instance to accuracy eps");
    SolveArgs solve_args;
    solve->add_option("instance", solve_args.instance_path, "instance file")->required();
    solve->add_option("--eps", solve_args.eps, "target accuracy (> 0)")->required();
    solve->add_option("--algorithm", solve_args.algorithm, "pdaam (accelerated) or sinkhorn")
        ->check(CLI::IsMember({"pdaam", "sinkhorn"}));
    solve->add_option("--out", solve_args.record_out, "run-record JSON path (stdout if omitted)");
    solve->add_option("--emit-plan", solve_args.plan_out,
                      "write the rounded plan (raw float64-le + .json sidecar)");
    solve->add_option("--max-iters", solve_args.max_iters, "iteration cap override");
    solve->add_option("--threads", solve_args.threads, "marginal-reduction threads");
    solve->add_flag("--trace", solve_args.trace, "record per-iteration diagnostics");

    auto* compare = app.add_subcommand(
        "compare", "Run both algorithms over a seed/eps grid and emit a CSV");
    CompareArgs compare_args;
    compare->add_option("--m", compare_args.m, "number of marginals");
    compare->add_option("--n", compare_args.n, "points per marginal");
    compare->add_option("--eps", compare_args.eps_list, "eps values for the grid");
    compare->add_option("--seed", compare_args.base_seed,
                        "base seed; cells use seed .. seed+seeds-1");
    compare->add_option("--seeds", compare_args.seed_count, "number of seeds");
    compare->add_option("--out", compare_args.csv_out, "CSV output path");
    compare->add_option("--max-iters", compare_args.max_iters, "iteration cap override");
    compare->add_option("--threads", compare_args.threads, "marginal-reduction threads");

    auto* oracle = app.add_subcommand("oracle", "Exact LP optimum (small instances only)");
    std::string oracle_instance;
    std::string oracle_plan;
    oracle->add_option("instance", oracle_instance, "instance file")->required();
    oracle->add_option("--emit-plan", oracle_plan,
                       "plan output path (default: <instance>.lp_plan)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            mmot::write_instance(gen_out, mmot::generate_instance(gen_m, gen_n, gen_seed));
            return 0;
        }
        if (solve->parsed()) return run_solve(solve_args);
        if (compare->parsed()) return run_compare(compare_args);
        if (oracle->parsed()) return run_oracle(oracle_instance, oracle_plan);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
