#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hopencls {

// Dense row-major matrix of doubles. The only tensor shape the project needs:
// batches are rows, features/heads are columns.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v);
    bool all_finite() const;
};

inline bool same_shape(const Tensor2& a, const Tensor2& b) { return a.same_shape(b); }

// c = a(m×k) · b(k×n)
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
// c = aᵀ · b, a stored (k×m) -> result (m×n)
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);
// c = a · bᵀ, b stored (n×k) -> result (m×n)
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);

}  // namespace hopencls
