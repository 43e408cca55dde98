#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace foca {

namespace detail {

struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad; // empty until backward touches it
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    // Pulls this node's grad and accumulates into the parents' grads.
    std::function<void(TensorNode&)> backward_fn;

    std::size_t numel() const { return values.size(); }
    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
};

} // namespace detail

// Disables graph construction while alive. Forward values are still
// computed; nothing records parents or backward closures. Used for
// inference and for the finite-difference probe evaluations.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
    static bool active();

private:
    bool previous_;
};

// Dense row-major double tensor with reverse-mode differentiation.
// Value-semantic handle over a shared node; ops never mutate their inputs.
// Leaves (parameters, inputs) are the only tensors whose values get
// rewritten in place, by the optimizer and the gradient checker.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
    static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> values,
                            bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const;
    std::size_t ndim() const { return shape().size(); }
    std::size_t dim(std::size_t i) const { return shape()[i]; }
    std::size_t numel() const;

    const std::vector<double>& values() const;
    std::vector<double>& values(); // leaf mutation only
    double item() const;           // scalar tensors

    bool requires_grad() const;
    bool has_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad();

    // Reverse pass from a scalar root. Grad accumulates (+=) into every
    // reachable tensor that requires grad.
    void backward() const;

    bool all_finite() const;
    std::string shape_str() const;

    detail::TensorNode* node() const { return node_.get(); }
    const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::TensorNode> node_;

    friend Tensor make_op(std::vector<std::size_t> shape, std::vector<double> values,
                          std::vector<Tensor> parents,
                          std::function<void(detail::TensorNode&)> backward_fn);
};

// Op factory: builds a node from computed values and wires the reverse
// edges unless a NoGradGuard is active or no parent requires grad.
Tensor make_op(std::vector<std::size_t> shape, std::vector<double> values,
               std::vector<Tensor> parents,
               std::function<void(detail::TensorNode&)> backward_fn);

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div_elem(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp_elem(const Tensor& x);
Tensor log_elem(const Tensor& x);
Tensor sqrt_elem(const Tensor& x);

// --- linear algebra ---
Tensor matmul(const Tensor& a, const Tensor& b); // [m,k]x[k,n] -> [m,n]
Tensor transpose(const Tensor& m);               // [m,n] -> [n,m]

// --- rows / reductions ---
Tensor softmax_rows(const Tensor& x);   // [m,n], row-max stabilized
Tensor row_logsumexp(const Tensor& x);  // [m,n] -> [m]
Tensor row_sum(const Tensor& x);        // [m,n] -> [m]
Tensor mean_rows(const Tensor& x);      // [m,n] -> [1,n]
Tensor max_rows(const Tensor& x);       // [m,n] -> [1,n], first argmax on ties
Tensor sum_all(const Tensor& x);        // -> scalar
Tensor mean_all(const Tensor& x);       // -> scalar
Tensor diag(const Tensor& x);           // [m,m] -> [m]

// --- broadcast helpers ---
Tensor add_rowvec(const Tensor& x, const Tensor& v);  // [m,n] + [n] per row
Tensor div_colvec(const Tensor& x, const Tensor& v);  // row i of [m,n] divided by v[i]
Tensor sub_colvec(const Tensor& x, const Tensor& v);  // row i of [m,n] minus v[i]
Tensor mul_channels(const Tensor& x, const Tensor& v); // [H,W,C] scaled per channel by v[C]

// Per-row z-score: (x - mean) / sqrt(var + eps). Conditioning for token
// matrices whose raw scales differ by orders of magnitude.
Tensor standardize_rows(const Tensor& x, double eps = 1e-6);

// --- structure ---
Tensor reshape(const Tensor& x, std::vector<std::size_t> new_shape);
Tensor concat_rows(const std::vector<Tensor>& parts); // same column count
Tensor gather(const Tensor& x, std::vector<std::size_t> indices,
              std::vector<std::size_t> out_shape);

// --- spatial ---
Tensor avg_pool_spatial(const Tensor& x); // [H,W,C] -> [C]
// x:[H,W,Cin], w:[k,k,Cin,Cout], b:[Cout]; zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::size_t stride, std::size_t pad);

// --- normalization ---
inline constexpr double kNormEpsilon = 1e-12;
Tensor l2_normalize(const Tensor& z);       // [d]
Tensor l2_normalize_rows(const Tensor& z);  // [n,d], every row

// --- fused stable losses ---
Tensor ce_with_logits(const Tensor& logits, std::size_t target); // [k] or [1,k] -> scalar
// Mean stable binary cross-entropy of logits against a 0/1 target field.
Tensor bce_with_logits_mean(const Tensor& logits, const std::vector<std::uint8_t>& target);

// --- gradient checking ---
struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_param;
    double worst = 0.0;
    double tol = 0.0;
    bool passed = false;
};

// Central finite differences against the analytic gradient of f().
// f must rebuild its graph from the current parameter values on every call.
GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<std::pair<std::string, Tensor>>& params,
                                  double h, double tol);

} // namespace foca
