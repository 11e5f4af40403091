#pragma once
// Problem instances: the cost tensor plus one probability marginal per mode,
// deterministic generation from a 64-bit seed, and validation.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmot/tensor.hpp"

namespace mmot {

inline constexpr int kInstanceFormatVersion = 1;

struct Instance {
    int version = kInstanceFormatVersion;
    int m = 0;
    int n = 0;
    DenseTensor cost;                           // entries >= 0
    std::vector<std::vector<double>> marginals; // m vectors on the simplex
    std::optional<std::uint64_t> seed;          // provenance, if generated
};

// splitmix64: tiny, splittable, well-known mixing PRNG. next_unit() maps the
// top 53 bits to [0, 1).
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        z = z ^ (z >> 31);
        return z;
    }
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

// Deterministic instance: draw the n^m cost entries first (uniform [0,1)),
// then each marginal in mode order as n uniforms normalized by their plain
// left-to-right sum. Identical (m, n, seed) always yields identical bits.
Instance generate_instance(int m, int n, std::uint64_t seed);

// Raised by instance validation; `field` names the first invalid field.
struct InstanceError : std::invalid_argument {
    std::string field;
    InstanceError(std::string f, const std::string& why)
        : std::invalid_argument("invalid instance: field '" + f + "': " + why),
          field(std::move(f)) {}
};

// Full structural check (lengths, nonnegative cost, marginals on the simplex
// within 1e-9). Throws InstanceError naming the first invalid field.
void validate_instance(const Instance& inst);

}  // namespace mmot
