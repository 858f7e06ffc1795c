#include "omake/graph.hpp"

#include <cmath>

#include "omake/errors.hpp"

namespace omake::numerics {

Graph::Node& Graph::node(Value v) {
    if (!v.valid() || v.id >= nodes_.size()) throw ContractError("graph: invalid value handle");
    return nodes_[v.id];
}

const Graph::Node& Graph::node(Value v) const {
    if (!v.valid() || v.id >= nodes_.size()) throw ContractError("graph: invalid value handle");
    return nodes_[v.id];
}

Tensor& Graph::grad_buf(Value v) {
    Node& n = node(v);
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

Value Graph::push(Tensor value, bool requires_grad, std::function<void(Graph&)> backprop) {
    nodes_.push_back(Node{std::move(value), Tensor(), requires_grad, {}, std::move(backprop)});
    return Value{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Graph::check_same_shape(Value a, Value b, const char* op) const {
    if (node(a).value.shape() != node(b).value.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             shape_str(node(a).value.shape()) + " vs " +
                             shape_str(node(b).value.shape()));
    }
}

Value Graph::leaf(Tensor t, std::string name) {
    const bool rg = t.requires_grad();
    Value v = push(std::move(t), rg, nullptr);
    if (!name.empty()) {
        node(v).name = std::move(name);
        named_.emplace(node(v).name, v.id);
    }
    return v;
}

Value Graph::constant(Tensor t) {
    t.set_requires_grad(false);
    return push(std::move(t), false, nullptr);
}

Value Graph::param(const std::string& name, const Tensor& t) {
    auto it = named_.find(name);
    if (it != named_.end()) return Value{it->second};
    Tensor copy = t;
    copy.set_requires_grad(true);
    return leaf(std::move(copy), name);
}

Value Graph::detach(Value v) { return constant(node(v).value); }

Value Graph::add(Value a, Value b) {
    check_same_shape(a, b, "add");
    Tensor out = node(a).value;
    const Tensor& bv = node(b).value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    const bool rg = needs_grad(a) || needs_grad(b);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, b, o](Graph& g) {
            const Tensor& go = g.node(o).grad;
            if (g.needs_grad(a)) {
                Tensor& ga = g.grad_buf(a);
                for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
            }
            if (g.needs_grad(b)) {
                Tensor& gb = g.grad_buf(b);
                for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
            }
        };
    }
    return o;
}

Value Graph::sub(Value a, Value b) {
    check_same_shape(a, b, "sub");
    Tensor out = node(a).value;
    const Tensor& bv = node(b).value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    const bool rg = needs_grad(a) || needs_grad(b);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, b, o](Graph& g) {
            const Tensor& go = g.node(o).grad;
            if (g.needs_grad(a)) {
                Tensor& ga = g.grad_buf(a);
                for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
            }
            if (g.needs_grad(b)) {
                Tensor& gb = g.grad_buf(b);
                for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
            }
        };
    }
    return o;
}

Value Graph::mul(Value a, Value b) {
    check_same_shape(a, b, "mul");
    Tensor out = node(a).value;
    const Tensor& bv = node(b).value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const bool rg = needs_grad(a) || needs_grad(b);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, b, o](Graph& g) {
            const Tensor& go = g.node(o).grad;
            const Tensor& av = g.node(a).value;
            const Tensor& bv2 = g.node(b).value;
            if (g.needs_grad(a)) {
                Tensor& ga = g.grad_buf(a);
                for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bv2[i];
            }
            if (g.needs_grad(b)) {
                Tensor& gb = g.grad_buf(b);
                for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
            }
        };
    }
    return o;
}

Value Graph::div(Value a, Value b) {
    check_same_shape(a, b, "div");
    Tensor out = node(a).value;
    const Tensor& bv = node(b).value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
    const bool rg = needs_grad(a) || needs_grad(b);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, b, o](Graph& g) {
            const Tensor& go = g.node(o).grad;
            const Tensor& av = g.node(a).value;
            const Tensor& bv2 = g.node(b).value;
            if (g.needs_grad(a)) {
                Tensor& ga = g.grad_buf(a);
                for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / bv2[i];
            }
            if (g.needs_grad(b)) {
                Tensor& gb = g.grad_buf(b);
                for (std::size_t i = 0; i < go.size(); ++i)
                    gb[i] -= go[i] * av[i] / (bv2[i] * bv2[i]);
            }
        };
    }
    return o;
}

Value Graph::add_scalar(Value a, double c) {
    Tensor out = node(a).value;
    for (auto& v : out.values()) v += c;
    const bool rg = needs_grad(a);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, o](Graph& g) {
            const Tensor& go = g.node(o).grad;
            Tensor& ga = g.grad_buf(a);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        };
    }
    return o;
}

Value Graph::mul_scalar(Value a, double c) {
    Tensor out = node(a).value;
    for (auto& v : out.values()) v *= c;
    const bool rg = needs_grad(a);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, o, c](Graph& g) {
            const Tensor& go = g.node(o).grad;
            Tensor& ga = g.grad_buf(a);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * c;
        };
    }
    return o;
}

Value Graph::tanh(Value a) {
    Tensor out = node(a).value;
    for (auto& v : out.values()) v = std::tanh(v);
    const bool rg = needs_grad(a);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, o](Graph& g) {
            const Tensor& go = g.node(o).grad;
            const Tensor& yv = g.node(o).value;
            Tensor& ga = g.grad_buf(a);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (1.0 - yv[i] * yv[i]);
        };
    }
    return o;
}

Value Graph::exp(Value a) {
    Tensor out = node(a).value;
    for (auto& v : out.values()) v = std::exp(v);
    const bool rg = needs_grad(a);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, o](Graph& g) {
            const Tensor& go = g.node(o).grad;
            const Tensor& yv = g.node(o).value;
            Tensor& ga = g.grad_buf(a);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * yv[i];
        };
    }
    return o;
}

Value Graph::log(Value a) {
    Tensor out = node(a).value;
    for (auto& v : out.values()) v = std::log(v);
    const bool rg = needs_grad(a);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, o](Graph& g) {
            const Tensor& go = g.node(o).grad;
            const Tensor& av = g.node(a).value;
            Tensor& ga = g.grad_buf(a);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / av[i];
        };
    }
    return o;
}

Value Graph::matmul(Value a, Value b) {
    const Tensor& av = node(a).value;
    const Tensor& bv = node(b).value;
    if (av.rank() != 2 || bv.rank() != 2) {
        throw DimensionError("matmul: expects rank-2 tensors, got " + shape_str(av.shape()) +
                             " and " + shape_str(bv.shape()));
    }
    const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
    if (bv.shape()[0] != k) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(av.shape()) +
                             " vs " + shape_str(bv.shape()));
    }
    Tensor out({m, n});
    const double* A = av.data();
    const double* B = bv.data();
    double* C = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = B + p * n;
            double* crow = C + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
    const bool rg = needs_grad(a) || needs_grad(b);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, b, o, m, k, n](Graph& g) {
            const double* G = g.node(o).grad.data();
            const double* A2 = g.node(a).value.data();
            const double* B2 = g.node(b).value.data();
            if (g.needs_grad(a)) {
                double* GA = g.grad_buf(a).data();
                // dA = dC * B^T
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        const double* grow = G + i * n;
                        const double* brow = B2 + p * n;
                        for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                        GA[i * k + p] += s;
                    }
                }
            }
            if (g.needs_grad(b)) {
                double* GB = g.grad_buf(b).data();
                // dB = A^T * dC
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = A2[i * k + p];
                        if (aip == 0.0) continue;
                        const double* grow = G + i * n;
                        double* gbrow = GB + p * n;
                        for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                    }
                }
            }
        };
    }
    return o;
}

Value Graph::transpose(Value a) {
    const Tensor& av = node(a).value;
    if (av.rank() != 2) throw DimensionError("transpose: expects rank-2 tensor");
    const std::size_t r = av.shape()[0], c = av.shape()[1];
    Tensor out({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
    const bool rg = needs_grad(a);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, o, r, c](Graph& g) {
            const Tensor& go = g.node(o).grad;
            Tensor& ga = g.grad_buf(a);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[j * r + i];
        };
    }
    return o;
}

Value Graph::reshape(Value a, Shape shape) {
    const Tensor& av = node(a).value;
    if (shape_size(shape) != av.size()) {
        throw DimensionError("reshape: size mismatch, " + shape_str(av.shape()) + " to " +
                             shape_str(shape));
    }
    Tensor out(std::move(shape), av.values());
    const bool rg = needs_grad(a);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, o](Graph& g) {
            const Tensor& go = g.node(o).grad;
            Tensor& ga = g.grad_buf(a);
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        };
    }
    return o;
}

Value Graph::add_rowvec(Value m, Value v) {
    const Tensor& mv = node(m).value;
    const Tensor& vv = node(v).value;
    if (mv.rank() != 2 || vv.rank() != 1 || vv.size() != mv.shape()[1]) {
        throw DimensionError("add_rowvec: need (R x C) and (C), got " + shape_str(mv.shape()) +
                             " and " + shape_str(vv.shape()));
    }
    const std::size_t r = mv.shape()[0], c = mv.shape()[1];
    Tensor out = mv;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] += vv[j];
    const bool rg = needs_grad(m) || needs_grad(v);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [m, v, o, r, c](Graph& g) {
            const Tensor& go = g.node(o).grad;
            if (g.needs_grad(m)) {
                Tensor& gm = g.grad_buf(m);
                for (std::size_t i = 0; i < go.size(); ++i) gm[i] += go[i];
            }
            if (g.needs_grad(v)) {
                Tensor& gv = g.grad_buf(v);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gv[j] += go[i * c + j];
            }
        };
    }
    return o;
}

Value Graph::div_by_scalar(Value a, Value s) {
    const Tensor& sv = node(s).value;
    if (sv.size() != 1) throw DimensionError("div_by_scalar: divisor must be single-element");
    const double d = sv[0];
    Tensor out = node(a).value;
    for (auto& v : out.values()) v /= d;
    const bool rg = needs_grad(a) || needs_grad(s);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, s, o](Graph& g) {
            const Tensor& go = g.node(o).grad;
            const double d2 = g.node(s).value[0];
            if (g.needs_grad(a)) {
                Tensor& ga = g.grad_buf(a);
                for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] / d2;
            }
            if (g.needs_grad(s)) {
                const Tensor& yv = g.node(o).value;
                double acc = 0.0;
                for (std::size_t i = 0; i < go.size(); ++i) acc += go[i] * yv[i];
                g.grad_buf(s)[0] -= acc / d2;
            }
        };
    }
    return o;
}

Value Graph::sum(Value a) {
    const Tensor& av = node(a).value;
    double s = 0.0;
    for (double v : av.values()) s += v;
    const bool rg = needs_grad(a);
    Value o = push(Tensor::scalar(s), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, o](Graph& g) {
            const double go = g.node(o).grad[0];
            Tensor& ga = g.grad_buf(a);
            for (auto& v : ga.values()) v += go;
        };
    }
    return o;
}

Value Graph::mean_pool_rows(Value a) {
    const Tensor& av = node(a).value;
    if (av.rank() != 2) throw DimensionError("mean_pool_rows: expects rank-2 tensor");
    const std::size_t r = av.shape()[0], c = av.shape()[1];
    if (r == 0) throw ContractError("mean_pool_rows: zero rows");
    Tensor out({c});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += av[i * c + j];
    for (auto& v : out.values()) v /= static_cast<double>(r);
    const bool rg = needs_grad(a);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, o, r, c](Graph& g) {
            const Tensor& go = g.node(o).grad;
            Tensor& ga = g.grad_buf(a);
            const double inv = 1.0 / static_cast<double>(r);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[j] * inv;
        };
    }
    return o;
}

Value Graph::stack_rows(std::span<const Value> rows) {
    if (rows.empty()) throw ContractError("stack_rows: empty row list");
    const std::size_t d = node(rows[0]).value.size();
    bool rg = false;
    for (Value r : rows) {
        const Tensor& t = node(r).value;
        if (t.rank() != 1 || t.size() != d) {
            throw DimensionError("stack_rows: all rows must be rank-1 of equal length");
        }
        rg = rg || needs_grad(r);
    }
    Tensor out({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Tensor& t = node(rows[i]).value;
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = t[j];
    }
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        std::vector<Value> rs(rows.begin(), rows.end());
        node(o).backprop = [rs, o, d](Graph& g) {
            const Tensor& go = g.node(o).grad;
            for (std::size_t i = 0; i < rs.size(); ++i) {
                if (!g.needs_grad(rs[i])) continue;
                Tensor& gr = g.grad_buf(rs[i]);
                for (std::size_t j = 0; j < d; ++j) gr[j] += go[i * d + j];
            }
        };
    }
    return o;
}

Value Graph::row(Value m, std::size_t r) {
    const Tensor& mv = node(m).value;
    if (mv.rank() != 2) throw DimensionError("row: expects rank-2 tensor");
    const std::size_t rows = mv.shape()[0], c = mv.shape()[1];
    if (r >= rows) throw DimensionError("row: index out of range");
    Tensor out({c});
    for (std::size_t j = 0; j < c; ++j) out[j] = mv[r * c + j];
    const bool rg = needs_grad(m);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [m, o, r, c](Graph& g) {
            const Tensor& go = g.node(o).grad;
            Tensor& gm = g.grad_buf(m);
            for (std::size_t j = 0; j < c; ++j) gm[r * c + j] += go[j];
        };
    }
    return o;
}

Value Graph::gather_rows(Value m, std::vector<std::size_t> idx) {
    const Tensor& mv = node(m).value;
    if (mv.rank() != 2) throw DimensionError("gather_rows: expects rank-2 tensor");
    const std::size_t rows = mv.shape()[0], c = mv.shape()[1];
    for (std::size_t i : idx) {
        if (i >= rows) throw DimensionError("gather_rows: index out of range");
    }
    Tensor out({idx.size(), c});
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = mv[idx[i] * c + j];
    const bool rg = needs_grad(m);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [m, o, idx = std::move(idx), c](Graph& g) {
            const Tensor& go = g.node(o).grad;
            Tensor& gm = g.grad_buf(m);
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < c; ++j) gm[idx[i] * c + j] += go[i * c + j];
        };
    }
    return o;
}

Value Graph::softmax_rows(Value a, double temperature) {
    if (temperature <= 0.0) {
        throw ParameterError("softmax_rows: temperature must be > 0, got " +
                             std::to_string(temperature));
    }
    const Tensor& av = node(a).value;
    const std::size_t c = av.rank() == 2 ? av.shape()[1] : av.size();
    Tensor out = av;
    softmax_rows_inplace(out.values(), c, temperature);
    const bool rg = needs_grad(a);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, o, c, temperature](Graph& g) {
            const Tensor& go = g.node(o).grad;
            const Tensor& yv = g.node(o).value;
            Tensor& ga = g.grad_buf(a);
            const std::size_t rows = yv.size() / c;
            for (std::size_t r = 0; r < rows; ++r) {
                double dotgy = 0.0;
                for (std::size_t j = 0; j < c; ++j)
                    dotgy += go[r * c + j] * yv[r * c + j];
                for (std::size_t j = 0; j < c; ++j) {
                    ga[r * c + j] +=
                        yv[r * c + j] * (go[r * c + j] - dotgy) / temperature;
                }
            }
        };
    }
    return o;
}

Value Graph::log_softmax_rows(Value a, double temperature) {
    if (temperature <= 0.0) {
        throw ParameterError("log_softmax_rows: temperature must be > 0, got " +
                             std::to_string(temperature));
    }
    const Tensor& av = node(a).value;
    const std::size_t c = av.rank() == 2 ? av.shape()[1] : av.size();
    const std::size_t rows = av.size() / c;
    Tensor out = av;
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = out.data() + r * c;
        double mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < c; ++j) lse += std::exp((row[j] - mx) / temperature);
        lse = std::log(lse);
        for (std::size_t j = 0; j < c; ++j) row[j] = (row[j] - mx) / temperature - lse;
    }
    const bool rg = needs_grad(a);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, o, c, temperature](Graph& g) {
            const Tensor& go = g.node(o).grad;
            const Tensor& yv = g.node(o).value;
            Tensor& ga = g.grad_buf(a);
            const std::size_t rows2 = yv.size() / c;
            for (std::size_t r = 0; r < rows2; ++r) {
                double gsum = 0.0;
                for (std::size_t j = 0; j < c; ++j) gsum += go[r * c + j];
                for (std::size_t j = 0; j < c; ++j) {
                    const double p = std::exp(yv[r * c + j]);
                    ga[r * c + j] += (go[r * c + j] - p * gsum) / temperature;
                }
            }
        };
    }
    return o;
}

Value Graph::l2_normalize_rows(Value a) {
    const Tensor& av = node(a).value;
    if (av.rank() != 1 && av.rank() != 2) {
        throw DimensionError("l2_normalize_rows: expects rank-1 or rank-2 tensor");
    }
    const std::size_t c = av.rank() == 2 ? av.shape()[1] : av.size();
    const std::size_t rows = av.size() / c;
    Tensor out = av;
    std::vector<double> norms(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += out[r * c + j] * out[r * c + j];
        const double n = std::max(std::sqrt(s), 1e-12);
        norms[r] = n;
        for (std::size_t j = 0; j < c; ++j) out[r * c + j] /= n;
    }
    const bool rg = needs_grad(a);
    Value o = push(std::move(out), rg, nullptr);
    if (rg) {
        node(o).backprop = [a, o, c, norms = std::move(norms)](Graph& g) {
            const Tensor& go = g.node(o).grad;
            const Tensor& yv = g.node(o).value;
            Tensor& ga = g.grad_buf(a);
            const std::size_t rows2 = yv.size() / c;
            for (std::size_t r = 0; r < rows2; ++r) {
                double gy = 0.0;
                for (std::size_t j = 0; j < c; ++j) gy += go[r * c + j] * yv[r * c + j];
                for (std::size_t j = 0; j < c; ++j) {
                    ga[r * c + j] += (go[r * c + j] - gy * yv[r * c + j]) / norms[r];
                }
            }
        };
    }
    return o;
}

const Tensor& Graph::value(Value v) const { return node(v).value; }

const Tensor& Graph::grad(Value v) const {
    const Node& n = node(v);
    if (n.grad.empty()) {
        throw ContractError("graph: gradient not available (run backward first, and only "
                            "requires-grad nodes receive one)");
    }
    return n.grad;
}

GradientMap Graph::backward(Value loss) {
    const Node& ln = node(loss);
    if (ln.value.size() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " +
                            shape_str(ln.value.shape()));
    }
    // Reset any grads from a previous backward on this graph.
    if (backward_done_) {
        for (auto& n : nodes_) n.grad = Tensor();
    }
    backward_done_ = true;
    grad_buf(loss)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backprop || n.grad.empty()) continue;
        n.backprop(*this);
    }
    GradientMap grads;
    for (const auto& [name, id] : named_) {
        Node& n = nodes_[id];
        if (!n.requires_grad) continue;
        if (n.grad.empty()) n.grad = Tensor(n.value.shape());
        grads.emplace(name, n.grad);
    }
    return grads;
}

} // namespace omake::numerics
