#include "omake/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "omake/errors.hpp"

namespace omake::numerics {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill), requires_grad_(requires_grad) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)), requires_grad_(requires_grad) {
    if (data_.size() != shape_size(shape_)) {
        throw DimensionError("tensor: data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vector(std::vector<double> v, bool requires_grad) {
    const std::size_t n = v.size();
    return Tensor({n}, std::move(v), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                      bool requires_grad) {
    return Tensor({rows, cols}, std::move(data), requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
    Tensor t(std::move(shape), 0.0, requires_grad);
    for (auto& v : t.values()) v = rng.normal(0.0, stddev);
    return t;
}

Tensor Tensor::rand_uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
    Tensor t(std::move(shape), 0.0, requires_grad);
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

std::size_t Tensor::rows() const {
    if (rank() == 2) return shape_[0];
    if (rank() == 1) return 1;
    throw DimensionError("tensor: rows() on rank-" + std::to_string(rank()) + " tensor");
}

std::size_t Tensor::cols() const {
    if (rank() == 2) return shape_[1];
    if (rank() == 1) return shape_[0];
    throw DimensionError("tensor: cols() on rank-" + std::to_string(rank()) + " tensor");
}

double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }

double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

double Tensor::item() const {
    if (data_.size() != 1) {
        throw ContractError("tensor: item() requires a single-element tensor, got shape " +
                            shape_str(shape_));
    }
    return data_[0];
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void softmax_rows_inplace(std::span<double> data, std::size_t cols, double temperature) {
    if (temperature <= 0.0) {
        throw ParameterError("softmax_rows: temperature must be > 0, got " +
                             std::to_string(temperature));
    }
    if (cols == 0) throw DimensionError("softmax_rows: zero columns");
    const std::size_t rows = data.size() / cols;
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = data.data() + r * cols;
        double mx = row[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            row[c] = std::exp((row[c] - mx) / temperature);
            sum += row[c];
        }
        for (std::size_t c = 0; c < cols; ++c) row[c] /= sum;
    }
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

void l2_normalize_inplace(std::span<double> v) {
    const double n = l2_norm(v);
    if (n < 1e-12) return;
    for (double& x : v) x /= n;
}

} // namespace omake::numerics
