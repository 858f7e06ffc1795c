#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "omake/tensor.hpp"

namespace omake::numerics {

class Graph;

// Handle to a node inside one Graph. Cheap to copy, invalid by default.
struct Value {
    std::uint32_t id = UINT32_MAX;
    bool valid() const { return id != UINT32_MAX; }
};

// Gradients of named leaves after backward, keyed by leaf name.
// std::map keeps iteration order deterministic.
using GradientMap = std::map<std::string, Tensor>;

// Dynamic computation tape. Ops are recorded at call time; backward walks
// the tape in reverse, which is a valid topological order by construction.
// One graph is single-threaded; distinct graphs share no mutable state.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // --- leaves ---------------------------------------------------------
    Value leaf(Tensor t, std::string name = {});
    Value constant(Tensor t);                                // never receives grad
    Value constant(double v) { return constant(Tensor::scalar(v)); }
    // Named parameter leaf, memoized: the same name maps to one node so
    // gradients accumulate across every use within the graph.
    Value param(const std::string& name, const Tensor& t);
    // Copy of the forward value with gradient flow cut.
    Value detach(Value v);

    // --- elementwise ----------------------------------------------------
    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value div(Value a, Value b);
    Value add_scalar(Value a, double c);
    Value mul_scalar(Value a, double c);
    Value tanh(Value a);
    Value exp(Value a);
    Value log(Value a);

    // --- linear algebra ---------------------------------------------------
    Value matmul(Value a, Value b);
    Value transpose(Value a);
    Value reshape(Value a, Shape shape);
    // matrix (R x C) plus a length-C row vector broadcast over rows
    Value add_rowvec(Value m, Value v);
    // divide every element by a single-element scalar node
    Value div_by_scalar(Value a, Value s);

    // --- reductions / shaping -------------------------------------------
    Value sum(Value a);                        // -> shape {1}
    Value mean_pool_rows(Value a);             // (R x C) -> (C)
    Value stack_rows(std::span<const Value> rows); // k vectors (d) -> (k x d)
    Value row(Value m, std::size_t r);         // (R x C) -> (C)
    Value gather_rows(Value m, std::vector<std::size_t> idx); // (V x d) -> (|idx| x d)

    // --- softmax family ---------------------------------------------------
    // Row-wise softmax of a/temperature, stabilized by row-max subtraction.
    Value softmax_rows(Value a, double temperature);
    Value log_softmax_rows(Value a, double temperature);

    // --- norms ------------------------------------------------------------
    // L2-normalize a rank-1 tensor, or each row of a rank-2 tensor.
    Value l2_normalize_rows(Value a);

    // --- composites -------------------------------------------------------
    Value dot(Value a, Value b) { return sum(mul(a, b)); }

    // --- access -----------------------------------------------------------
    const Tensor& value(Value v) const;
    double scalar_value(Value v) const { return value(v).item(); }
    const Tensor& grad(Value v) const;         // valid after backward
    std::size_t node_count() const { return nodes_.size(); }

    // Backward from a scalar loss. Returns gradients of every named leaf
    // that requires grad. Accumulation order is fixed, so results are
    // bitwise deterministic for identical graphs.
    GradientMap backward(Value loss);

private:
    struct Node {
        Tensor value;
        Tensor grad;               // allocated during backward
        bool requires_grad = false;
        std::string name;          // nonempty for named leaves
        std::function<void(Graph&)> backprop; // null for leaves
    };

    Value push(Tensor value, bool requires_grad, std::function<void(Graph&)> backprop);
    Node& node(Value v);
    const Node& node(Value v) const;
    Tensor& grad_buf(Value v);
    bool needs_grad(Value v) const { return node(v).requires_grad; }
    void check_same_shape(Value a, Value b, const char* op) const;

    std::vector<Node> nodes_;
    std::unordered_map<std::string, std::uint32_t> named_;
    bool backward_done_ = false;
};

} // namespace omake::numerics
