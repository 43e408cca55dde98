#include "foca/tensor.hpp"

#include "foca/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace foca {

namespace {

thread_local bool g_no_grad = false;

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_to_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                             " vs " + b.shape_str());
    }
}

void require_matrix(const Tensor& x, const char* op) {
    if (x.ndim() != 2) {
        throw DimensionError(std::string(op) + ": expected a matrix, got " + x.shape_str());
    }
}

} // namespace

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::active() { return g_no_grad; }

// --- Tensor basics ---

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    auto n = std::make_shared<detail::TensorNode>();
    n->values.assign(shape_numel(shape), value);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> values,
                         bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw DimensionError("from_data: " + shape_to_str(shape) + " needs " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(values.size()));
    }
    auto n = std::make_shared<detail::TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data({1}, {v}, requires_grad);
}

const std::vector<std::size_t>& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->values.size(); }
const std::vector<double>& Tensor::values() const { return node_->values; }
std::vector<double>& Tensor::values() { return node_->values; }

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item: tensor " + shape_str() + " is not scalar");
    return node_->values[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
    if (node_->grad.empty()) throw Error("grad: no gradient recorded; run backward() first");
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

bool Tensor::all_finite() const {
    for (double v : node_->values)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const { return shape_to_str(node_->shape); }

void Tensor::backward() const {
    if (numel() != 1) throw DimensionError("backward: root must be scalar, got " + shape_str());
    // Iterative topological order over the parent DAG.
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> visited;
    struct Frame {
        detail::TensorNode* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            detail::TensorNode* p = f.node->parents[f.next_parent++].get();
            if (visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }
    // Post-order leaves the root last; walk it in reverse.
    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorNode* n = *it;
        if (n->backward_fn && n->requires_grad) {
            n->ensure_grad();
            for (auto& p : n->parents)
                if (p->requires_grad) p->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

// Central op factory: wires the graph unless grad is suppressed.
Tensor make_op(std::vector<std::size_t> shape, std::vector<double> values,
               std::vector<Tensor> parents,
               std::function<void(detail::TensorNode&)> backward_fn) {
    auto n = std::make_shared<detail::TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    bool track = false;
    if (!g_no_grad) {
        for (const auto& p : parents)
            if (p.requires_grad()) track = true;
    }
    if (track) {
        n->requires_grad = true;
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node_ptr());
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(n));
}

// --- elementwise ---

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& x, const char* /*name*/, Fwd fwd, Bwd bwd) {
    std::vector<double> out(x.numel());
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
    return make_op(x.shape(), std::move(out), {x}, [bwd](detail::TensorNode& self) {
        auto& px = *self.parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < self.values.size(); ++i)
            px.grad[i] += bwd(px.values[i], self.values[i], self.grad[i]);
    });
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](detail::TensorNode& self) {
        for (int k = 0; k < 2; ++k) {
            auto& p = *self.parents[k];
            if (!p.requires_grad) continue;
            for (std::size_t i = 0; i < self.values.size(); ++i) p.grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](detail::TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.values.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += self.grad[i];
            if (pb.requires_grad) pb.grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](detail::TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.values.size(); ++i) {
            if (pa.requires_grad) pa.grad[i] += self.grad[i] * pb.values[i];
            if (pb.requires_grad) pb.grad[i] += self.grad[i] * pa.values[i];
        }
    });
}

Tensor div_elem(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] / b.values()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](detail::TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        for (std::size_t i = 0; i < self.values.size(); ++i) {
            double inv = 1.0 / pb.values[i];
            if (pa.requires_grad) pa.grad[i] += self.grad[i] * inv;
            if (pb.requires_grad) pb.grad[i] -= self.grad[i] * pa.values[i] * inv * inv;
        }
    });
}

Tensor add_scalar(const Tensor& a, double s) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + s;
    return make_op(a.shape(), std::move(out), {a}, [](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.values.size(); ++i) p.grad[i] += self.grad[i];
    });
}

Tensor mul_scalar(const Tensor& a, double s) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * s;
    return make_op(a.shape(), std::move(out), {a}, [s](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.values.size(); ++i) p.grad[i] += self.grad[i] * s;
    });
}

Tensor relu(const Tensor& x) {
    return unary_op(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
        [](double xv, double, double g) { return xv > 0.0 ? g : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x, "sigmoid",
        [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
        [](double, double y, double g) { return g * y * (1.0 - y); });
}

Tensor exp_elem(const Tensor& x) {
    return unary_op(
        x, "exp", [](double v) { return std::exp(v); },
        [](double, double y, double g) { return g * y; });
}

Tensor log_elem(const Tensor& x) {
    return unary_op(
        x, "log", [](double v) { return std::log(v); },
        [](double xv, double, double g) { return g / xv; });
}

Tensor sqrt_elem(const Tensor& x) {
    return unary_op(
        x, "sqrt", [](double v) { return std::sqrt(v); },
        [](double, double y, double g) { return g / (2.0 * y); });
}

// --- linear algebra ---

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    if (a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: inner dimensions disagree, " + a.shape_str() + " vs " +
                             b.shape_str());
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
            const double aval = av[i * k + t];
            if (aval == 0.0) continue;
            const double* brow = &bv[t * n];
            double* orow = &out[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += aval * brow[j];
        }
    }
    return make_op({m, n}, std::move(out), {a, b}, [m, k, n](detail::TensorNode& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        // dA = g * B^T
        if (pa.requires_grad) {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t t = 0; t < k; ++t) {
                    double acc = 0.0;
                    const double* grow = &self.grad[i * n];
                    const double* brow = &pb.values[t * n];
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    pa.grad[i * k + t] += acc;
                }
        }
        // dB = A^T * g
        if (pb.requires_grad) {
            for (std::size_t t = 0; t < k; ++t)
                for (std::size_t i = 0; i < m; ++i) {
                    const double aval = pa.values[i * k + t];
                    if (aval == 0.0) continue;
                    const double* grow = &self.grad[i * n];
                    double* brow = &pb.grad[t * n];
                    for (std::size_t j = 0; j < n; ++j) brow[j] += aval * grow[j];
                }
        }
    });
}

Tensor transpose(const Tensor& x) {
    require_matrix(x, "transpose");
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(m * n);
    const auto& xv = x.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
    return make_op({n, m}, std::move(out), {x}, [m, n](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[j * m + i];
    });
}

// --- rows / reductions ---

Tensor softmax_rows(const Tensor& x) {
    require_matrix(x, "softmax_rows");
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(m * n);
    const auto& xv = x.values();
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = &xv[i * n];
        double mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = std::exp(row[j] - mx);
            denom += out[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= denom;
    }
    return make_op({m, n}, std::move(out), {x}, [m, n](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
            const double* y = &self.values[i * n];
            const double* g = &self.grad[i * n];
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += y[j] * g[j];
            for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += y[j] * (g[j] - dot);
        }
    });
}

Tensor row_logsumexp(const Tensor& x) {
    require_matrix(x, "row_logsumexp");
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(m);
    const auto& xv = x.values();
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = &xv[i * n];
        double mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
        out[i] = mx + std::log(s);
    }
    return make_op({m}, std::move(out), {x}, [m, n](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
            const double lse = self.values[i];
            const double g = self.grad[i];
            for (std::size_t j = 0; j < n; ++j)
                p.grad[i * n + j] += g * std::exp(p.values[i * n + j] - lse);
        }
    });
}

Tensor row_sum(const Tensor& x) {
    require_matrix(x, "row_sum");
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i] += x.values()[i * n + j];
    return make_op({m}, std::move(out), {x}, [m, n](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[i];
    });
}

Tensor mean_rows(const Tensor& x) {
    require_matrix(x, "mean_rows");
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += x.values()[i * n + j];
    for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
    return make_op({1, n}, std::move(out), {x}, [m, n](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += self.grad[j] * inv;
    });
}

Tensor max_rows(const Tensor& x) {
    require_matrix(x, "max_rows");
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(n);
    auto argmax = std::make_shared<std::vector<std::size_t>>(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
        double best = x.values()[j];
        std::size_t bi = 0;
        for (std::size_t i = 1; i < m; ++i) {
            double v = x.values()[i * n + j];
            if (v > best) {
                best = v;
                bi = i;
            }
        }
        out[j] = best;
        (*argmax)[j] = bi;
    }
    return make_op({1, n}, std::move(out), {x}, [n, argmax](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t j = 0; j < n; ++j) p.grad[(*argmax)[j] * n + j] += self.grad[j];
    });
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (double v : x.values()) s += v;
    return make_op({1}, {s}, {x}, [](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < p.values.size(); ++i) p.grad[i] += self.grad[0];
    });
}

Tensor mean_all(const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(x.numel());
    double s = 0.0;
    for (double v : x.values()) s += v;
    return make_op({1}, {s * inv}, {x}, [inv](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < p.values.size(); ++i) p.grad[i] += self.grad[0] * inv;
    });
}

Tensor diag(const Tensor& x) {
    require_matrix(x, "diag");
    if (x.dim(0) != x.dim(1))
        throw DimensionError("diag: expected square matrix, got " + x.shape_str());
    const std::size_t m = x.dim(0);
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = x.values()[i * m + i];
    return make_op({m}, std::move(out), {x}, [m](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) p.grad[i * m + i] += self.grad[i];
    });
}

// --- broadcast helpers ---

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    require_matrix(x, "add_rowvec");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (v.numel() != n)
        throw DimensionError("add_rowvec: vector " + v.shape_str() + " does not match columns of " +
                             x.shape_str());
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x.values()[i * n + j] + v.values()[j];
    return make_op({m, n}, std::move(out), {x, v}, [m, n](detail::TensorNode& self) {
        auto& px = *self.parents[0];
        auto& pv = *self.parents[1];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (px.requires_grad) px.grad[i * n + j] += self.grad[i * n + j];
                if (pv.requires_grad) pv.grad[j] += self.grad[i * n + j];
            }
    });
}

Tensor div_colvec(const Tensor& x, const Tensor& v) {
    require_matrix(x, "div_colvec");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (v.numel() != m)
        throw DimensionError("div_colvec: vector " + v.shape_str() + " does not match rows of " +
                             x.shape_str());
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x.values()[i * n + j] / v.values()[i];
    return make_op({m, n}, std::move(out), {x, v}, [m, n](detail::TensorNode& self) {
        auto& px = *self.parents[0];
        auto& pv = *self.parents[1];
        for (std::size_t i = 0; i < m; ++i) {
            const double inv = 1.0 / pv.values[i];
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (px.requires_grad) px.grad[i * n + j] += self.grad[i * n + j] * inv;
                acc += self.grad[i * n + j] * self.values[i * n + j];
            }
            if (pv.requires_grad) pv.grad[i] -= acc * inv;
        }
    });
}

Tensor sub_colvec(const Tensor& x, const Tensor& v) {
    require_matrix(x, "sub_colvec");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (v.numel() != m)
        throw DimensionError("sub_colvec: vector " + v.shape_str() + " does not match rows of " +
                             x.shape_str());
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x.values()[i * n + j] - v.values()[i];
    return make_op({m, n}, std::move(out), {x, v}, [m, n](detail::TensorNode& self) {
        auto& px = *self.parents[0];
        auto& pv = *self.parents[1];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (px.requires_grad) px.grad[i * n + j] += self.grad[i * n + j];
                if (pv.requires_grad) pv.grad[i] -= self.grad[i * n + j];
            }
    });
}

Tensor standardize_rows(const Tensor& x, double eps) {
    require_matrix(x, "standardize_rows");
    const double inv_n = 1.0 / static_cast<double>(x.dim(1));
    Tensor mean = mul_scalar(row_sum(x), inv_n);
    Tensor centered = sub_colvec(x, mean);
    Tensor var = mul_scalar(row_sum(mul(centered, centered)), inv_n);
    Tensor std_dev = sqrt_elem(add_scalar(var, eps));
    return div_colvec(centered, std_dev);
}

Tensor mul_channels(const Tensor& x, const Tensor& v) {
    if (x.ndim() != 3)
        throw DimensionError("mul_channels: expected [H,W,C] tensor, got " + x.shape_str());
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (v.numel() != c)
        throw DimensionError("mul_channels: vector " + v.shape_str() + " does not match channels of " +
                             x.shape_str());
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < h * w; ++i)
        for (std::size_t k = 0; k < c; ++k) out[i * c + k] = x.values()[i * c + k] * v.values()[k];
    return make_op(x.shape(), std::move(out), {x, v}, [h, w, c](detail::TensorNode& self) {
        auto& px = *self.parents[0];
        auto& pv = *self.parents[1];
        for (std::size_t i = 0; i < h * w; ++i)
            for (std::size_t k = 0; k < c; ++k) {
                if (px.requires_grad) px.grad[i * c + k] += self.grad[i * c + k] * pv.values[k];
                if (pv.requires_grad) pv.grad[k] += self.grad[i * c + k] * px.values[i * c + k];
            }
    });
}

// --- structure ---

Tensor reshape(const Tensor& x, std::vector<std::size_t> new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw DimensionError("reshape: cannot view " + x.shape_str() + " as " +
                             shape_to_str(new_shape));
    return make_op(std::move(new_shape), x.values(), {x}, [](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < self.values.size(); ++i) p.grad[i] += self.grad[i];
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no parts");
    std::size_t n = 0, total_rows = 0;
    for (const auto& p : parts) {
        if (p.ndim() != 2) throw DimensionError("concat_rows: expected matrices, got " + p.shape_str());
        if (n == 0)
            n = p.dim(1);
        else if (p.dim(1) != n)
            throw DimensionError("concat_rows: column mismatch " + p.shape_str());
        total_rows += p.dim(0);
    }
    std::vector<double> out;
    out.reserve(total_rows * n);
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    auto sizes = std::make_shared<std::vector<std::size_t>>();
    for (const auto& p : parts) sizes->push_back(p.numel());
    return make_op({total_rows, n}, std::move(out), parts, [sizes](detail::TensorNode& self) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            auto& p = *self.parents[k];
            if (p.requires_grad)
                for (std::size_t i = 0; i < (*sizes)[k]; ++i) p.grad[i] += self.grad[off + i];
            off += (*sizes)[k];
        }
    });
}

Tensor gather(const Tensor& x, std::vector<std::size_t> indices,
              std::vector<std::size_t> out_shape) {
    if (shape_numel(out_shape) != indices.size())
        throw DimensionError("gather: index count does not match output shape");
    std::vector<double> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= x.numel()) throw DimensionError("gather: index out of range");
        out[i] = x.values()[indices[i]];
    }
    auto idx = std::make_shared<std::vector<std::size_t>>(std::move(indices));
    return make_op(std::move(out_shape), std::move(out), {x}, [idx](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < idx->size(); ++i) p.grad[(*idx)[i]] += self.grad[i];
    });
}

// --- spatial ---

Tensor avg_pool_spatial(const Tensor& x) {
    if (x.ndim() != 3)
        throw DimensionError("avg_pool_spatial: expected [H,W,C] tensor, got " + x.shape_str());
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (h == 0 || w == 0)
        throw DimensionError("avg_pool_spatial: empty spatial extent " + x.shape_str());
    std::vector<double> out(c, 0.0);
    for (std::size_t i = 0; i < h * w; ++i)
        for (std::size_t k = 0; k < c; ++k) out[k] += x.values()[i * c + k];
    const double inv = 1.0 / static_cast<double>(h * w);
    for (std::size_t k = 0; k < c; ++k) out[k] *= inv;
    return make_op({c}, std::move(out), {x}, [h, w, c, inv](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < h * w; ++i)
            for (std::size_t k = 0; k < c; ++k) p.grad[i * c + k] += self.grad[k] * inv;
    });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
              std::size_t pad) {
    if (x.ndim() != 3) throw DimensionError("conv2d: input must be [H,W,C], got " + x.shape_str());
    if (w.ndim() != 4) throw DimensionError("conv2d: kernel must be [k,k,Cin,Cout], got " + w.shape_str());
    if (stride == 0) throw ParameterError("conv2d: stride must be >= 1");
    const std::size_t H = x.dim(0), W = x.dim(1), Ci = x.dim(2);
    const std::size_t kh = w.dim(0), kw = w.dim(1);
    if (w.dim(2) != Ci)
        throw DimensionError("conv2d: kernel channels " + w.shape_str() + " do not match input " +
                             x.shape_str());
    const std::size_t Co = w.dim(3);
    if (b.numel() != Co) throw DimensionError("conv2d: bias size does not match output channels");
    if (H + 2 * pad < kh || W + 2 * pad < kw)
        throw DimensionError("conv2d: kernel larger than padded input");
    const std::size_t Ho = (H + 2 * pad - kh) / stride + 1;
    const std::size_t Wo = (W + 2 * pad - kw) / stride + 1;
    std::vector<double> out(Ho * Wo * Co);
    const auto& xv = x.values();
    const auto& wv = w.values();
    for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox)
            for (std::size_t co = 0; co < Co; ++co) {
                double acc = b.values()[co];
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                              static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                        const double* xpix = &xv[(static_cast<std::size_t>(iy) * W +
                                                  static_cast<std::size_t>(ix)) * Ci];
                        const double* wrow = &wv[((ky * kw + kx) * Ci) * Co + co];
                        for (std::size_t ci = 0; ci < Ci; ++ci) acc += xpix[ci] * wrow[ci * Co];
                    }
                }
                out[(oy * Wo + ox) * Co + co] = acc;
            }
    return make_op({Ho, Wo, Co}, std::move(out), {x, w, b},
                   [H, W, Ci, kh, kw, Co, Ho, Wo, stride, pad](detail::TensorNode& self) {
                       auto& px = *self.parents[0];
                       auto& pw = *self.parents[1];
                       auto& pb = *self.parents[2];
                       for (std::size_t oy = 0; oy < Ho; ++oy)
                           for (std::size_t ox = 0; ox < Wo; ++ox)
                               for (std::size_t co = 0; co < Co; ++co) {
                                   const double g = self.grad[(oy * Wo + ox) * Co + co];
                                   if (g == 0.0) continue;
                                   if (pb.requires_grad) pb.grad[co] += g;
                                   for (std::size_t ky = 0; ky < kh; ++ky) {
                                       const std::ptrdiff_t iy =
                                           static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                           static_cast<std::ptrdiff_t>(pad);
                                       if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                                       for (std::size_t kx = 0; kx < kw; ++kx) {
                                           const std::ptrdiff_t ix =
                                               static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                               static_cast<std::ptrdiff_t>(pad);
                                           if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W))
                                               continue;
                                           const std::size_t xoff =
                                               (static_cast<std::size_t>(iy) * W +
                                                static_cast<std::size_t>(ix)) * Ci;
                                           const std::size_t woff = ((ky * kw + kx) * Ci) * Co + co;
                                           for (std::size_t ci = 0; ci < Ci; ++ci) {
                                               if (px.requires_grad)
                                                   px.grad[xoff + ci] +=
                                                       g * pw.values[woff + ci * Co];
                                               if (pw.requires_grad)
                                                   pw.grad[woff + ci * Co] +=
                                                       g * px.values[xoff + ci];
                                           }
                                       }
                                   }
                               }
                   });
}

// --- normalization ---

Tensor l2_normalize_rows(const Tensor& z) {
    require_matrix(z, "l2_normalize_rows");
    const std::size_t m = z.dim(0), n = z.dim(1);
    std::vector<double> out(m * n);
    std::vector<double> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += z.values()[i * n + j] * z.values()[i * n + j];
        norms[i] = std::sqrt(s);
        if (norms[i] <= kNormEpsilon)
            throw DegenerateVectorError("l2_normalize: row " + std::to_string(i) + " has norm " +
                                        std::to_string(norms[i]) + " <= 1e-12");
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = z.values()[i * n + j] / norms[i];
    }
    auto nrm = std::make_shared<std::vector<double>>(std::move(norms));
    return make_op({m, n}, std::move(out), {z}, [m, n, nrm](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
            const double* u = &self.values[i * n];
            const double* g = &self.grad[i * n];
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += u[j] * g[j];
            const double inv = 1.0 / (*nrm)[i];
            for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += (g[j] - dot * u[j]) * inv;
        }
    });
}

Tensor l2_normalize(const Tensor& z) {
    if (z.ndim() != 1)
        throw DimensionError("l2_normalize: expected a vector, got " + z.shape_str());
    Tensor rows = l2_normalize_rows(reshape(z, {1, z.numel()}));
    return reshape(rows, {z.numel()});
}

// --- fused stable losses ---

Tensor ce_with_logits(const Tensor& logits, std::size_t target) {
    Tensor flat = logits.ndim() == 2 && logits.dim(0) == 1 ? reshape(logits, {logits.numel()}) : logits;
    if (flat.ndim() != 1)
        throw DimensionError("ce_with_logits: expected logit vector, got " + logits.shape_str());
    const std::size_t k = flat.numel();
    if (target >= k)
        throw DataError("ce_with_logits: target " + std::to_string(target) + " out of range for " +
                        std::to_string(k) + " classes");
    const auto& xv = flat.values();
    double mx = xv[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, xv[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(xv[j] - mx);
    const double lse = mx + std::log(s);
    return make_op({1}, {lse - xv[target]}, {flat}, [k, target, lse](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        const double g = self.grad[0];
        for (std::size_t j = 0; j < k; ++j) {
            double soft = std::exp(p.values[j] - lse);
            p.grad[j] += g * (soft - (j == target ? 1.0 : 0.0));
        }
    });
}

Tensor bce_with_logits_mean(const Tensor& logits, const std::vector<std::uint8_t>& target) {
    if (logits.numel() != target.size())
        throw DimensionError("bce_with_logits: logits " + logits.shape_str() + " vs " +
                             std::to_string(target.size()) + " target values");
    const std::size_t n = logits.numel();
    const auto& xv = logits.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = xv[i];
        const double m = target[i] ? 1.0 : 0.0;
        acc += std::max(x, 0.0) - x * m + std::log1p(std::exp(-std::abs(x)));
    }
    const double inv = 1.0 / static_cast<double>(n);
    auto tgt = std::make_shared<std::vector<std::uint8_t>>(target);
    return make_op({1}, {acc * inv}, {logits}, [n, inv, tgt](detail::TensorNode& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        const double g = self.grad[0] * inv;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = p.values[i];
            const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
            p.grad[i] += g * (sig - ((*tgt)[i] ? 1.0 : 0.0));
        }
    });
}

// --- gradient checking ---

GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<std::pair<std::string, Tensor>>& params,
                                  double h, double tol) {
    if (!(h >= 1e-7 && h <= 1e-3))
        throw ParameterError("finite_diff_check: h must lie in [1e-7, 1e-3]");

    // One analytic pass.
    for (const auto& [name, t] : params) {
        Tensor handle = t;
        handle.zero_grad();
    }
    Tensor loss = f();
    if (!loss.all_finite())
        throw EvaluationError("finite_diff_check: objective is not finite");
    loss.backward();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& [name, t] : params)
        analytic.push_back(t.has_grad() ? t.grad() : std::vector<double>(t.numel(), 0.0));

    auto probe = [&]() {
        NoGradGuard ng;
        Tensor out = f();
        double v = out.item();
        if (!std::isfinite(v)) throw EvaluationError("finite_diff_check: probe value is not finite");
        return v;
    };

    GradCheckReport report;
    report.tol = tol;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor t = params[pi].second;
        GradCheckEntry entry;
        entry.name = params[pi].first;
        for (std::size_t i = 0; i < t.numel(); ++i) {
            const double saved = t.values()[i];
            t.values()[i] = saved + h;
            const double fp = probe();
            t.values()[i] = saved - h;
            const double fm = probe();
            t.values()[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[pi][i];
            const double denom = std::max(std::abs(a), std::abs(numeric));
            const double err = denom < 1e-6 ? std::abs(a - numeric) : std::abs(a - numeric) / denom;
            if (err > entry.max_rel_err) {
                entry.max_rel_err = err;
                entry.worst_index = i;
            }
        }
        report.worst = std::max(report.worst, entry.max_rel_err);
        report.per_param.push_back(std::move(entry));
    }
    report.passed = report.worst <= tol;
    return report;
}

} // namespace foca
