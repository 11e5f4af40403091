#include "mmot/instance.hpp"

#include <cmath>
#include <stdexcept>

namespace mmot {

Instance generate_instance(int m, int n, std::uint64_t seed) {
    if (m < 2) throw std::invalid_argument("generate_instance: m must be >= 2");
    if (n < 2) throw std::invalid_argument("generate_instance: n must be >= 2");
    TensorShape shape(m, n);  // throws if n^m exceeds the cap
    Instance inst;
    inst.m = m;
    inst.n = n;
    inst.seed = seed;
    inst.cost = DenseTensor(shape);
    SplitMix64 rng(seed);
    for (std::int64_t i = 0; i < shape.count; ++i) inst.cost[i] = rng.next_unit();
    inst.marginals.resize(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        std::vector<double> v(static_cast<std::size_t>(n));
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            v[static_cast<std::size_t>(j)] = rng.next_unit();
            s += v[static_cast<std::size_t>(j)];
        }
        for (int j = 0; j < n; ++j) v[static_cast<std::size_t>(j)] /= s;
        inst.marginals[static_cast<std::size_t>(k)] = std::move(v);
    }
    return inst;
}

void validate_instance(const Instance& inst) {
    if (inst.version != kInstanceFormatVersion)
        throw InstanceError("version", "unsupported value");
    if (inst.m < 2) throw InstanceError("m", "must be an integer >= 2");
    if (inst.n < 1) throw InstanceError("n", "must be an integer >= 1");
    std::int64_t expect = 1;
    for (int k = 0; k < inst.m; ++k) {
        if (expect > (std::int64_t{1} << 31) / inst.n)
            throw InstanceError("n", "n^m exceeds the dense element cap");
        expect *= inst.n;
    }
    if (inst.cost.shape.count != expect ||
        static_cast<std::int64_t>(inst.cost.data.size()) != expect)
        throw InstanceError("cost", "length must be n^m");
    for (double c : inst.cost.data) {
        if (!std::isfinite(c)) throw InstanceError("cost", "entries must be finite");
        if (c < 0.0) throw InstanceError("cost", "entries must be >= 0");
    }
    if (static_cast<int>(inst.marginals.size()) != inst.m)
        throw InstanceError("marginals", "must hold m vectors");
    for (int k = 0; k < inst.m; ++k) {
        const auto& p = inst.marginals[static_cast<std::size_t>(k)];
        const std::string field = "marginals[" + std::to_string(k) + "]";
        if (static_cast<int>(p.size()) != inst.n) throw InstanceError(field, "length must be n");
        CompensatedSum s;
        for (double v : p) {
            if (!std::isfinite(v)) throw InstanceError(field, "entries must be finite");
            if (v < 0.0) throw InstanceError(field, "entries must be >= 0");
            s.add(v);
        }
        if (std::abs(s.value() - 1.0) > 1e-9) throw InstanceError(field, "must sum to 1");
    }
}

}  // namespace mmot
