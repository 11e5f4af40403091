#include "mmot/serialize.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace mmot {
namespace {

using ordered_json = nlohmann::ordered_json;

// Keeps doubles bit-exact regardless of host byte order.
void to_little_endian_bytes(const std::vector<double>& values, std::string& out) {
    out.resize(values.size() * sizeof(double));
    std::memcpy(out.data(), values.data(), out.size());
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            char* p = out.data() + i * sizeof(double);
            for (std::size_t b = 0; b < sizeof(double) / 2; ++b) {
                std::swap(p[b], p[sizeof(double) - 1 - b]);
            }
        }
    }
}

void from_little_endian_bytes(const std::string& bytes, std::vector<double>& out) {
    if (bytes.size() % sizeof(double) != 0) {
        throw std::runtime_error("plan data size is not a multiple of 8 bytes");
    }
    out.resize(bytes.size() / sizeof(double));
    std::string tmp = bytes;
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            char* p = tmp.data() + i * sizeof(double);
            for (std::size_t b = 0; b < sizeof(double) / 2; ++b) {
                std::swap(p[b], p[sizeof(double) - 1 - b]);
            }
        }
    }
    std::memcpy(out.data(), tmp.data(), tmp.size());
}

ordered_json certificate_to_json(const Certificate& c) {
    ordered_json j;
    j["eps_target"] = c.eps_target;
    j["gap"] = c.gap;
    j["marginal_violation"] = c.marginal_violation;
    j["lipschitz_bound"] = c.lipschitz_bound;
    j["radius_bound"] = c.radius_bound;
    j["rate_gap_bound"] = c.rate_gap_bound;
    j["rate_violation_bound"] = c.rate_violation_bound;
    return j;
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    std::string out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw std::runtime_error("read failed: " + path);
    return out;
}

std::string instance_to_json(const Instance& inst) {
    ordered_json j;
    j["version"] = inst.version;
    j["m"] = inst.m;
    j["n"] = inst.n;
    j["cost"] = inst.cost.data;
    j["marginals"] = inst.marginals;
    if (inst.seed.has_value()) j["seed"] = *inst.seed;
    return j.dump() + "\n";
}

Instance instance_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const ordered_json::parse_error& e) {
        throw std::runtime_error(std::string("instance file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw InstanceError("document", "top level must be a JSON object");

    auto require = [&](const char* field) -> const ordered_json& {
        auto it = j.find(field);
        if (it == j.end()) throw InstanceError(field, "missing");
        return *it;
    };
    auto require_int = [&](const char* field) {
        const ordered_json& v = require(field);
        if (!v.is_number_integer()) throw InstanceError(field, "must be an integer");
        return v.get<std::int64_t>();
    };

    Instance inst;
    const std::int64_t version = require_int("version");
    if (version != kInstanceFormatVersion) {
        throw InstanceError("version", "unsupported (expected " +
                                           std::to_string(kInstanceFormatVersion) + ")");
    }
    inst.version = static_cast<int>(version);
    const std::int64_t m = require_int("m");
    const std::int64_t n = require_int("n");
    if (m < 2 || m > 64) throw InstanceError("m", "must be an integer in [2, 64]");
    if (n < 1) throw InstanceError("n", "must be a positive integer");
    inst.m = static_cast<int>(m);
    inst.n = static_cast<int>(n);
    TensorShape shape;
    try {
        shape = TensorShape(inst.m, inst.n);
    } catch (const std::invalid_argument& e) {
        throw InstanceError("n", e.what());
    }

    const ordered_json& jc = require("cost");
    if (!jc.is_array()) throw InstanceError("cost", "must be an array of numbers");
    if (static_cast<std::int64_t>(jc.size()) != shape.count) {
        throw InstanceError("cost", "length must be n^m = " + std::to_string(shape.count));
    }
    inst.cost = DenseTensor(shape);
    try {
        inst.cost.data = jc.get<std::vector<double>>();
    } catch (const ordered_json::exception&) {
        throw InstanceError("cost", "entries must be numbers");
    }

    const ordered_json& jp = require("marginals");
    if (!jp.is_array() || static_cast<std::int64_t>(jp.size()) != m) {
        throw InstanceError("marginals", "must be an array of m arrays");
    }
    inst.marginals.resize(static_cast<std::size_t>(m));
    for (std::int64_t k = 0; k < m; ++k) {
        const std::string field = "marginals[" + std::to_string(k) + "]";
        const ordered_json& row = jp[static_cast<std::size_t>(k)];
        if (!row.is_array() || static_cast<std::int64_t>(row.size()) != n) {
            throw InstanceError(field, "must be an array of n numbers");
        }
        try {
            inst.marginals[static_cast<std::size_t>(k)] = row.get<std::vector<double>>();
        } catch (const ordered_json::exception&) {
            throw InstanceError(field, "entries must be numbers");
        }
    }

    if (auto it = j.find("seed"); it != j.end()) {
        if (!it->is_number_unsigned() && !it->is_number_integer()) {
            throw InstanceError("seed", "must be a 64-bit integer");
        }
        inst.seed = it->get<std::uint64_t>();
    }

    validate_instance(inst);
    return inst;
}

void write_instance(const std::string& path, const Instance& inst) {
    write_text_file(path, instance_to_json(inst));
}

Instance read_instance(const std::string& path) {
    return instance_from_json(read_text_file(path));
}

RunRecord make_run_record(const MotResult& result, Algorithm algorithm) {
    RunRecord r;
    r.algorithm = (algorithm == Algorithm::pdaam) ? "pdaam" : "sinkhorn";
    r.eps = result.certificate.eps_target;
    r.iterations = result.inner.iterations;
    r.wall_ms = result.inner.wall_ms;
    r.final_gap = result.inner.gap;
    r.final_violation = result.inner.violation;
    r.primal_cost = result.primal_cost;
    r.complete = result.inner.complete;
    r.has_certificate = (algorithm == Algorithm::pdaam);
    r.certificate = result.certificate;
    r.trace = result.inner.trace;
    return r;
}

std::string run_record_to_json(const RunRecord& record) {
    ordered_json j;
    j["algorithm"] = record.algorithm;
    j["eps"] = record.eps;
    j["iterations"] = record.iterations;
    j["wall_ms"] = record.wall_ms;
    j["final_gap"] = record.final_gap;
    j["final_violation"] = record.final_violation;
    j["primal_cost"] = record.primal_cost;
    j["complete"] = record.complete;
    if (record.has_certificate) j["certificate"] = certificate_to_json(record.certificate);
    if (!record.trace.empty()) {
        ordered_json rows = ordered_json::array();
        for (const TraceRow& row : record.trace) {
            ordered_json r;
            r["iteration"] = row.iteration;
            r["dual_value"] = row.dual_value;
            r["gap"] = row.gap;
            r["violation"] = row.violation;
            r["violation_l2"] = row.violation_l2;
            r["block"] = row.block;
            rows.push_back(std::move(r));
        }
        j["trace"] = std::move(rows);
    }
    return j.dump() + "\n";
}

void write_run_record(const std::string& path, const RunRecord& record) {
    write_text_file(path, run_record_to_json(record));
}

void write_plan(const std::string& path, const DenseTensor& plan) {
    std::string bytes;
    to_little_endian_bytes(plan.data, bytes);
    write_text_file(path, bytes);
    ordered_json j;
    j["version"] = 1;
    j["m"] = plan.shape.modes;
    j["n"] = plan.shape.points;
    j["count"] = plan.shape.count;
    j["dtype"] = "float64";
    j["byte_order"] = "little-endian";
    j["layout"] = "row-major, first index slowest";
    write_text_file(path + ".json", j.dump() + "\n");
}

DenseTensor read_plan(const std::string& path) {
    ordered_json j;
    try {
        j = ordered_json::parse(read_text_file(path + ".json"));
    } catch (const ordered_json::parse_error& e) {
        throw std::runtime_error(std::string("plan sidecar is not valid JSON: ") + e.what());
    }
    const int m = j.at("m").get<int>();
    const int n = j.at("n").get<int>();
    if (j.at("dtype").get<std::string>() != "float64" ||
        j.at("byte_order").get<std::string>() != "little-endian") {
        throw std::runtime_error("plan sidecar declares an unsupported encoding");
    }
    DenseTensor plan(TensorShape(m, n));
    std::vector<double> values;
    from_little_endian_bytes(read_text_file(path), values);
    if (static_cast<std::int64_t>(values.size()) != plan.shape.count) {
        throw std::runtime_error("plan data length does not match the sidecar shape");
    }
    plan.data = std::move(values);
    return plan;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
    std::string out = "seed,m,n,eps,algorithm,iterations,wall_ms,final_gap,final_violation\n";
    for (const CompareRow& r : rows) {
        out += std::to_string(r.seed);
        out += ',';
        out += std::to_string(r.m);
        out += ',';
        out += std::to_string(r.n);
        out += ',';
        out += format_double(r.eps);
        out += ',';
        out += r.algorithm;
        out += ',';
        out += std::to_string(r.iterations);
        out += ',';
        out += format_double(r.wall_ms);
        out += ',';
        out += format_double(r.final_gap);
        out += ',';
        out += format_double(r.final_violation);
        out += '\n';
    }
    return out;
}

}  // namespace mmot
