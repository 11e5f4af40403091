#include "mmot/tensor.hpp"

#include <stdexcept>
#include <string>
#include <thread>

namespace mmot {

TensorShape::TensorShape(int m, int n, std::int64_t element_cap) : modes(m), points(n) {
    if (m < 2) throw std::invalid_argument("tensor shape: modes must be >= 2");
    if (n < 1) throw std::invalid_argument("tensor shape: points per mode must be >= 1");
    std::int64_t c = 1;
    for (int k = 0; k < m; ++k) {
        if (c > element_cap / n)
            throw std::invalid_argument("tensor shape: element count n^m exceeds cap " +
                                        std::to_string(element_cap));
        c *= n;
    }
    count = c;
}

std::int64_t TensorShape::stride(int k) const {
    std::int64_t s = 1;
    for (int i = k + 1; i < modes; ++i) s *= points;
    return s;
}

std::vector<double> marginal(const DenseTensor& A, int k) {
    const int m = A.shape.modes, n = A.shape.points;
    if (k < 0 || k >= m) throw std::invalid_argument("marginal: mode index out of range");
    const std::int64_t stride = A.shape.stride(k);
    const std::int64_t outer = A.shape.count / (stride * n);
    std::vector<CompensatedSum> acc(static_cast<std::size_t>(n));
    const double* p = A.data.data();
    for (std::int64_t o = 0; o < outer; ++o)
        for (int j = 0; j < n; ++j) {
            const double* row = p + (o * n + j) * stride;
            CompensatedSum& a = acc[static_cast<std::size_t>(j)];
            for (std::int64_t i = 0; i < stride; ++i) a.add(row[i]);
        }
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(j)] = acc[static_cast<std::size_t>(j)].value();
    return out;
}

std::vector<std::vector<double>> all_marginals(const DenseTensor& A, int threads) {
    const int m = A.shape.modes;
    std::vector<std::vector<double>> out(static_cast<std::size_t>(m));
    if (threads <= 1 || m == 1) {
        for (int k = 0; k < m; ++k) out[static_cast<std::size_t>(k)] = marginal(A, k);
        return out;
    }
    // One worker per mode (each mode reduced serially -> bit-identical output).
    std::vector<std::thread> pool;
    int workers = threads < m ? threads : m;
    auto run_modes = [&](int w) {
        for (int k = w; k < m; k += workers) out[static_cast<std::size_t>(k)] = marginal(A, k);
    };
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run_modes, w);
    for (auto& t : pool) t.join();
    return out;
}

double inner(const DenseTensor& A, const DenseTensor& B) {
    if (!(A.shape == B.shape)) throw std::invalid_argument("inner: shape mismatch");
    CompensatedSum s;
    for (std::size_t i = 0; i < A.data.size(); ++i) s.add(A.data[i] * B.data[i]);
    return s.value();
}

double norm1(const DenseTensor& A) {
    CompensatedSum s;
    for (double v : A.data) s.add(std::abs(v));
    return s.value();
}

double norm_inf(const DenseTensor& A) {
    double m = 0.0;
    for (double v : A.data) {
        double a = std::abs(v);
        if (a > m) m = a;
    }
    return m;
}

double entropy(const DenseTensor& A) {
    CompensatedSum s;
    for (double v : A.data) {
        if (v < 0.0) throw std::invalid_argument("entropy: negative entry");
        if (v > 0.0) s.add(v * std::log(v));
    }
    return -s.value();
}

double l1_diff(const std::vector<double>& a, const std::vector<double>& b) {
    CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add(std::abs(a[i] - b[i]));
    return s.value();
}

double sum_of(const std::vector<double>& a) {
    CompensatedSum s;
    for (double v : a) s.add(v);
    return s.value();
}

}  // namespace mmot
