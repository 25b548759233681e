#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "imgcot/errors.hpp"
#include "imgcot/rng.hpp"

namespace imgcot {

// Dense row-major tensor with reverse-mode autodiff. Ops record a tape of
// parent links plus a backprop closure; backward() walks the tape in reverse
// topological order and accumulates gradients into requires_grad leaves.
//
// The primitive set is fixed (matmul, add, mul, reshape, transpose, softmax,
// layernorm, gelu, embedding/gather, mse, cross_entropy, stop_gradient);
// everything else in the project is composed from these.

using Shape = std::vector<int>;

struct TensorNode;

class Tensor {
public:
    Tensor() = default;

    // Leaf constructors.
    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double v, bool requires_grad = false);
    static Tensor from_data(const Shape& shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    // Gaussian init, deterministic under the given rng.
    static Tensor randn(const Shape& shape, Rng& rng, double stddev,
                        bool requires_grad = true);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int rows() const;
    int cols() const;
    std::size_t numel() const;

    std::vector<double>& value();
    const std::vector<double>& value() const;
    // Gradient buffer; allocated on demand, zero before first backward.
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    bool requires_grad() const;
    void zero_grad();

    double item() const;  // scalar tensors only

    TensorNode* node() const { return node_.get(); }

private:
    friend struct TensorNode;
    friend Tensor make_op(const std::string&, const Shape&, std::vector<Tensor>,
                          std::function<void(TensorNode&)>);
    std::shared_ptr<TensorNode> node_;
};

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::string op;  // empty for leaves
    std::vector<Tensor> parents;
    std::function<void(TensorNode&)> backprop;

    std::size_t numel() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

// --- primitives -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);

// add/mul broadcast the right operand when it is a [1,n] row, an [m,1]
// column, or a [1,1] scalar.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, const Shape& shape);
Tensor transpose(const Tensor& a);
Tensor softmax(const Tensor& a);                    // row-wise
Tensor layernorm(const Tensor& a, double eps = 1e-5);  // row-wise, no affine
Tensor gelu(const Tensor& a);
// Row lookup: out[i] = table[ids[i]]. `embedding` and `gather_rows` share the
// same kernel; the two names mirror their distinct roles.
Tensor embedding(const Tensor& table, const std::vector<int>& ids);
Tensor gather_rows(const Tensor& a, const std::vector<int>& ids);
// Scalar: sum_i w_i * mean_j (a_ij - b_ij)^2. Differentiable in both a and b.
Tensor mse(const Tensor& a, const Tensor& b, const std::vector<double>& row_weights);
// Scalar: sum_i w_i * CE(softmax(logits_i), targets[i]). Rows with w=0 skipped.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     const std::vector<double>& row_weights);
Tensor stop_gradient(const Tensor& a);

// --- composed helpers (no new primitives) -----------------------------------

Tensor scale(const Tensor& a, double s);        // mul by constant scalar
Tensor sub(const Tensor& a, const Tensor& b);   // add(a, scale(b, -1))

// Runs reverse-mode accumulation from a scalar loss. Frees the tape (non-leaf
// backprop closures and parent links) afterwards.
void backward(const Tensor& loss);

// Max over coordinates of |g_analytic - g_numeric| / max(1, |g_numeric|) using
// central differences with step eps. `params` are the leaves to probe;
// `loss_fn` must rebuild the graph from current leaf values on each call.
double finite_diff_check(const std::function<Tensor()>& loss_fn,
                         const std::vector<Tensor>& params, double eps = 1e-4);

}  // namespace imgcot
