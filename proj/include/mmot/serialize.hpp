#pragma once
// File formats: instance documents (JSON, one canonical line), run records
// (JSON), transport plans (raw little-endian float64 array plus a JSON
// sidecar header), and the comparison CSV.

#include <cstdint>
#include <string>
#include <vector>

#include "mmot/instance.hpp"
#include "mmot/solver.hpp"

namespace mmot {

// Canonical single-line JSON document (object key order: version, m, n,
// cost, marginals, seed) terminated by one newline. Writing what read()
// produced is byte-identical for files in this canonical form.
std::string instance_to_json(const Instance& inst);

// Parses and fully validates; throws InstanceError naming the first invalid
// field, or std::runtime_error for malformed JSON.
Instance instance_from_json(const std::string& text);

void write_instance(const std::string& path, const Instance& inst);
Instance read_instance(const std::string& path);

// Everything one solve produced, ready for serialization.
struct RunRecord {
    std::string algorithm;  // "pdaam" or "sinkhorn"
    double eps = 0.0;
    std::int64_t iterations = 0;
    double wall_ms = 0.0;
    double final_gap = 0.0;
    double final_violation = 0.0;
    double primal_cost = 0.0;
    bool complete = false;
    bool has_certificate = false;  // the accelerated solver carries one
    Certificate certificate;
    std::vector<TraceRow> trace;   // empty = omitted from the document
};

RunRecord make_run_record(const MotResult& result, Algorithm algorithm);
std::string run_record_to_json(const RunRecord& record);
void write_run_record(const std::string& path, const RunRecord& record);

// Raw little-endian float64 array at `path` (row-major, first index
// slowest) plus a JSON sidecar at `path` + ".json" recording shape and
// encoding. read_plan needs both files.
void write_plan(const std::string& path, const DenseTensor& plan);
DenseTensor read_plan(const std::string& path);

// One comparison cell: an (instance seed, eps, algorithm) run.
struct CompareRow {
    std::uint64_t seed = 0;
    int m = 0;
    int n = 0;
    double eps = 0.0;
    std::string algorithm;
    std::int64_t iterations = 0;  // -1 marks a failed cell
    double wall_ms = 0.0;
    double final_gap = 0.0;
    double final_violation = 0.0;
};

// Header "seed,m,n,eps,algorithm,iterations,wall_ms,final_gap,final_violation"
// plus one line per row; doubles in shortest round-trip form.
std::string compare_csv(const std::vector<CompareRow>& rows);

// Shortest decimal string that parses back to exactly this double
// ("nan"/"inf"/"-inf" for non-finite values).
std::string format_double(double v);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace mmot
