#pragma once
// Dense order-m tensors with equal mode size, flat row-major storage
// (first index slowest-varying), and the reductions the solver needs.
// All reductions accumulate with Neumaier compensated summation so the
// documented tolerances hold at every supported size.

#include <cmath>
#include <cstdint>
#include <vector>

namespace mmot {

// Compensated (Neumaier) accumulator: exact enough for 1e-12-relative
// contracts on sums of up to ~2^31 doubles.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double v) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            carry += (sum - t) + v;
        else
            carry += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

struct TensorShape {
    int modes = 0;        // m >= 2
    int points = 0;       // n >= 1, same for every mode
    std::int64_t count = 0;  // n^m, overflow-checked against the cap

    TensorShape() = default;
    // Throws std::invalid_argument when m < 2, n < 1, or n^m exceeds the cap.
    TensorShape(int m, int n, std::int64_t element_cap = (std::int64_t{1} << 31));

    // Stride of mode k (0-based): n^(m-1-k).
    std::int64_t stride(int k) const;
    bool operator==(const TensorShape&) const = default;
};

struct DenseTensor {
    TensorShape shape;
    std::vector<double> data;

    DenseTensor() = default;
    explicit DenseTensor(TensorShape s, double fill = 0.0)
        : shape(s), data(static_cast<std::size_t>(s.count), fill) {}

    double& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
};

// Mode-k marginal: out[j] = sum of A over all entries with index_k = j.
// k is 0-based; out of range throws std::invalid_argument.
std::vector<double> marginal(const DenseTensor& A, int k);

// All m marginals. threads > 1 fans the independent per-mode reductions out
// to that many workers; each mode is still reduced serially, so the result
// is bit-identical to the single-threaded one.
std::vector<std::vector<double>> all_marginals(const DenseTensor& A, int threads = 1);

// Frobenius inner product; shapes must match.
double inner(const DenseTensor& A, const DenseTensor& B);

double norm1(const DenseTensor& A);
double norm_inf(const DenseTensor& A);

// -sum_i A_i ln A_i with 0 ln 0 = 0; negative entries throw.
double entropy(const DenseTensor& A);

// Helpers shared by several modules.
double l1_diff(const std::vector<double>& a, const std::vector<double>& b);
double sum_of(const std::vector<double>& a);

}  // namespace mmot
