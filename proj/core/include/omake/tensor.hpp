#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "omake/rng.hpp"

namespace omake::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float64 tensor. Plain value type; autodiff bookkeeping
// lives in Graph, not here.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor scalar(double v);
    static Tensor vector(std::vector<double> v, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                         bool requires_grad = false);
    static Tensor identity(std::size_t n);
    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false);
    static Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi,
                               bool requires_grad = false);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // 2-D helpers; a rank-1 tensor counts as a single row.
    std::size_t rows() const;
    std::size_t cols() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }
    std::span<const double> span() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;
    double item() const; // single-element tensors only

    bool requires_grad() const { return requires_grad_; }
    void set_requires_grad(bool b) { requires_grad_ = b; }

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    Shape shape_;
    std::vector<double> data_;
    bool requires_grad_ = false;
};

// Row-wise temperature softmax on a flat row-major buffer, stabilized by
// row-max subtraction. Shared kernel for graph ops and soft-label blending.
void softmax_rows_inplace(std::span<double> data, std::size_t cols, double temperature);

double l2_norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
double cosine(std::span<const double> a, std::span<const double> b);
void l2_normalize_inplace(std::span<double> v);

} // namespace omake::numerics
