#include "imgcot/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "imgcot/kernels.hpp"

namespace imgcot {

namespace {

std::size_t shape_numel(const Shape& s) {
    require(!s.empty(), "tensor shape must be non-empty");
    std::size_t n = 1;
    for (int d : s) {
        require(d > 0, "tensor dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

int shape_rows(const Shape& s) { return s[0]; }

int shape_cols(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t i = 1; i < s.size(); ++i) n *= static_cast<std::size_t>(s[i]);
    return static_cast<int>(n == 0 ? 1 : n);
}

void check_finite(const char* op, const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericFailure(std::string(op) + ": non-finite value produced");
        }
    }
}

enum class Bcast { Same, Row, Col, Scalar };

Bcast broadcast_mode(const Shape& a, const Shape& b) {
    const int am = shape_rows(a), an = shape_cols(a);
    const int bm = shape_rows(b), bn = shape_cols(b);
    if (bm == 1 && bn == 1) return Bcast::Scalar;
    if (am == bm && an == bn) return Bcast::Same;
    if (bm == 1 && bn == an) return Bcast::Row;
    if (bn == 1 && bm == am) return Bcast::Col;
    throw ContractViolation("add/mul: incompatible shapes for broadcast");
}

}  // namespace

// --- Tensor basics ----------------------------------------------------------

Tensor make_op(const std::string& op, const Shape& shape, std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backprop) {
    Tensor t;
    t.node_ = std::make_shared<TensorNode>();
    t.node_->shape = shape;
    t.node_->value.resize(shape_numel(shape));
    t.node_->op = op;
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    t.node_->requires_grad = rg;
    if (rg) {
        t.node_->parents = std::move(parents);
        t.node_->backprop = std::move(backprop);
    }
    return t;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    return from_data(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad);
}

Tensor Tensor::full(const Shape& shape, double v, bool requires_grad) {
    return from_data(shape, std::vector<double>(shape_numel(shape), v), requires_grad);
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool requires_grad) {
    require(shape_numel(shape) == data.size(), "data length must equal product of shape");
    Tensor t;
    t.node_ = std::make_shared<TensorNode>();
    t.node_->shape = shape;
    t.node_->value = std::move(data);
    t.node_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data({1, 1}, {v}, requires_grad);
}

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stddev, bool requires_grad) {
    std::vector<double> data(shape_numel(shape));
    for (double& x : data) x = rng.normal(0.0, stddev);
    return from_data(shape, std::move(data), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
int Tensor::rows() const { return shape_rows(node_->shape); }
int Tensor::cols() const { return shape_cols(node_->shape); }
std::size_t Tensor::numel() const { return node_->value.size(); }
std::vector<double>& Tensor::value() { return node_->value; }
const std::vector<double>& Tensor::value() const { return node_->value; }
std::vector<double>& Tensor::grad() {
    node_->ensure_grad();
    return node_->grad;
}
const std::vector<double>& Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}
bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

double Tensor::item() const {
    require(numel() == 1, "item() requires a scalar tensor");
    return node_->value[0];
}

// --- primitives -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    require(static_cast<std::size_t>(b.rows()) == k, "matmul: inner dimensions differ");
    Tensor out = make_op("matmul", {static_cast<int>(m), static_cast<int>(n)}, {a, b},
                         [m, k, n](TensorNode& node) {
                             Tensor a = node.parents[0];
                             Tensor b = node.parents[1];
                             if (a.requires_grad()) {
                                 // dA = dC * B^T
                                 std::vector<double> bt(k * n);
                                 const auto& bv = b.value();
                                 for (std::size_t p = 0; p < k; ++p)
                                     for (std::size_t j = 0; j < n; ++j)
                                         bt[j * k + p] = bv[p * n + j];
                                 std::vector<double> da(m * k);
                                 kernels::matmul(node.grad.data(), bt.data(), da.data(), m, n, k);
                                 auto& ag = a.grad();
                                 for (std::size_t i = 0; i < da.size(); ++i) ag[i] += da[i];
                             }
                             if (b.requires_grad()) {
                                 // dB = A^T * dC
                                 std::vector<double> at(k * m);
                                 const auto& av = a.value();
                                 for (std::size_t i = 0; i < m; ++i)
                                     for (std::size_t p = 0; p < k; ++p)
                                         at[p * m + i] = av[i * k + p];
                                 std::vector<double> db(k * n);
                                 kernels::matmul(at.data(), node.grad.data(), db.data(), k, m, n);
                                 auto& bg = b.grad();
                                 for (std::size_t i = 0; i < db.size(); ++i) bg[i] += db[i];
                             }
                         });
    kernels::matmul(a.value().data(), b.value().data(), out.value().data(), m, k, n);
    check_finite("matmul", out.value());
    return out;
}

namespace {

Tensor elementwise_binary(const char* name, const Tensor& a, const Tensor& b, bool is_mul) {
    const Bcast mode = broadcast_mode(a.shape(), b.shape());
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = make_op(name, a.shape(), {a, b}, [mode, m, n, is_mul](TensorNode& node) {
        Tensor a = node.parents[0];
        Tensor b = node.parents[1];
        const auto& g = node.grad;
        if (a.requires_grad()) {
            auto& ag = a.grad();
            if (!is_mul) {
                for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i];
            } else {
                const auto& bv = b.value();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const std::size_t idx = i * n + j;
                        double bvij = mode == Bcast::Same   ? bv[idx]
                                      : mode == Bcast::Row  ? bv[j]
                                      : mode == Bcast::Col  ? bv[i]
                                                            : bv[0];
                        ag[idx] += g[idx] * bvij;
                    }
            }
        }
        if (b.requires_grad()) {
            auto& bg = b.grad();
            const auto& av = a.value();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const std::size_t idx = i * n + j;
                    const double contrib = is_mul ? g[idx] * av[idx] : g[idx];
                    switch (mode) {
                        case Bcast::Same: bg[idx] += contrib; break;
                        case Bcast::Row: bg[j] += contrib; break;
                        case Bcast::Col: bg[i] += contrib; break;
                        case Bcast::Scalar: bg[0] += contrib; break;
                    }
                }
        }
    });
    const auto& av = a.value();
    const auto& bv = b.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t idx = i * n + j;
            double bvij = mode == Bcast::Same   ? bv[idx]
                          : mode == Bcast::Row  ? bv[j]
                          : mode == Bcast::Col  ? bv[i]
                                                : bv[0];
            ov[idx] = is_mul ? av[idx] * bvij : av[idx] + bvij;
        }
    check_finite(name, out.value());
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise_binary("add", a, b, false); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise_binary("mul", a, b, true); }

Tensor reshape(const Tensor& a, const Shape& shape) {
    require(shape_numel(shape) == a.numel(), "reshape: element count must be preserved");
    Tensor out = make_op("reshape", shape, {a}, [](TensorNode& node) {
        Tensor a = node.parents[0];
        if (!a.requires_grad()) return;
        auto& ag = a.grad();
        for (std::size_t i = 0; i < node.grad.size(); ++i) ag[i] += node.grad[i];
    });
    out.value() = a.value();
    return out;
}

Tensor transpose(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = make_op("transpose", {static_cast<int>(n), static_cast<int>(m)}, {a},
                         [m, n](TensorNode& node) {
                             Tensor a = node.parents[0];
                             if (!a.requires_grad()) return;
                             auto& ag = a.grad();
                             for (std::size_t i = 0; i < m; ++i)
                                 for (std::size_t j = 0; j < n; ++j)
                                     ag[i * n + j] += node.grad[j * m + i];
                         });
    const auto& av = a.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ov[j * m + i] = av[i * n + j];
    return out;
}

Tensor softmax(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = make_op("softmax", a.shape(), {a}, [m, n](TensorNode& node) {
        Tensor a = node.parents[0];
        if (!a.requires_grad()) return;
        auto& ag = a.grad();
        const auto& y = node.value;
        const auto& g = node.grad;
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
            for (std::size_t j = 0; j < n; ++j)
                ag[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
        }
    });
    kernels::softmax_rows(a.value().data(), out.value().data(), m, n);
    check_finite("softmax", out.value());
    return out;
}

Tensor layernorm(const Tensor& a, double eps) {
    const std::size_t m = a.rows(), n = a.cols();
    require(n >= 1, "layernorm: empty rows");
    // Stash inv-std per row for the backward pass.
    auto inv_std = std::make_shared<std::vector<double>>(m);
    Tensor out = make_op("layernorm", a.shape(), {a}, [m, n, inv_std](TensorNode& node) {
        Tensor a = node.parents[0];
        if (!a.requires_grad()) return;
        auto& ag = a.grad();
        const auto& y = node.value;
        const auto& g = node.grad;
        for (std::size_t i = 0; i < m; ++i) {
            double gmean = 0.0, gymean = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                gmean += g[i * n + j];
                gymean += g[i * n + j] * y[i * n + j];
            }
            gmean /= static_cast<double>(n);
            gymean /= static_cast<double>(n);
            const double is = (*inv_std)[i];
            for (std::size_t j = 0; j < n; ++j)
                ag[i * n + j] += is * (g[i * n + j] - gmean - y[i * n + j] * gymean);
        }
    });
    const auto& av = a.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += av[i * n + j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = av[i * n + j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < n; ++j) ov[i * n + j] = (av[i * n + j] - mean) * is;
    }
    check_finite("layernorm", out.value());
    return out;
}

Tensor gelu(const Tensor& a) {
    Tensor out = make_op("gelu", a.shape(), {a}, [](TensorNode& node) {
        Tensor a = node.parents[0];
        if (!a.requires_grad()) return;
        kernels::gelu_grad(a.value().data(), node.grad.data(), a.grad().data(),
                           a.value().size());
    });
    kernels::gelu(a.value().data(), out.value().data(), a.numel());
    check_finite("gelu", out.value());
    return out;
}

namespace {
Tensor row_lookup(const char* name, const Tensor& table, const std::vector<int>& ids) {
    require(!ids.empty(), std::string(name) + ": empty index list");
    const std::size_t n = table.cols();
    const int v = table.rows();
    for (int id : ids)
        require(id >= 0 && id < v, std::string(name) + ": index out of range");
    auto idx = std::make_shared<std::vector<int>>(ids);
    Tensor out = make_op(name, {static_cast<int>(ids.size()), static_cast<int>(n)},
                         {table}, [n, idx](TensorNode& node) {
                             Tensor table = node.parents[0];
                             if (!table.requires_grad()) return;
                             auto& tg = table.grad();
                             for (std::size_t i = 0; i < idx->size(); ++i) {
                                 const std::size_t r = static_cast<std::size_t>((*idx)[i]);
                                 for (std::size_t j = 0; j < n; ++j)
                                     tg[r * n + j] += node.grad[i * n + j];
                             }
                         });
    const auto& tv = table.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::size_t r = static_cast<std::size_t>(ids[i]);
        std::copy(tv.begin() + r * n, tv.begin() + (r + 1) * n, ov.begin() + i * n);
    }
    return out;
}
}  // namespace

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
    return row_lookup("embedding", table, ids);
}
Tensor gather_rows(const Tensor& a, const std::vector<int>& ids) {
    return row_lookup("gather", a, ids);
}

Tensor mse(const Tensor& a, const Tensor& b, const std::vector<double>& row_weights) {
    const std::size_t m = a.rows(), n = a.cols();
    require(b.rows() == a.rows() && b.cols() == a.cols(), "mse: shape mismatch");
    require(row_weights.size() == m, "mse: weight count must equal row count");
    auto w = std::make_shared<std::vector<double>>(row_weights);
    Tensor out = make_op("mse", {1, 1}, {a, b}, [m, n, w](TensorNode& node) {
        Tensor a = node.parents[0];
        Tensor b = node.parents[1];
        const double g = node.grad[0];
        const auto& av = a.value();
        const auto& bv = b.value();
        double* ag = a.requires_grad() ? a.grad().data() : nullptr;
        double* bg = b.requires_grad() ? b.grad().data() : nullptr;
        for (std::size_t i = 0; i < m; ++i) {
            const double c = g * 2.0 * (*w)[i] / static_cast<double>(n);
            if (c == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                const double d = c * (av[i * n + j] - bv[i * n + j]);
                if (ag) ag[i * n + j] += d;
                if (bg) bg[i * n + j] -= d;
            }
        }
    });
    double loss = 0.0;
    const auto& av = a.value();
    const auto& bv = b.value();
    for (std::size_t i = 0; i < m; ++i) {
        if (row_weights[i] == 0.0) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = av[i * n + j] - bv[i * n + j];
            s += d * d;
        }
        loss += row_weights[i] * s / static_cast<double>(n);
    }
    out.value()[0] = loss;
    check_finite("mse", out.value());
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     const std::vector<double>& row_weights) {
    const std::size_t m = logits.rows(), n = logits.cols();
    require(targets.size() == m, "cross_entropy: target count must equal row count");
    require(row_weights.size() == m, "cross_entropy: weight count must equal row count");
    auto tg = std::make_shared<std::vector<int>>(targets);
    auto w = std::make_shared<std::vector<double>>(row_weights);
    Tensor out = make_op("cross_entropy", {1, 1}, {logits}, [m, n, tg, w](TensorNode& node) {
        Tensor logits = node.parents[0];
        if (!logits.requires_grad()) return;
        const double g = node.grad[0];
        const auto& lv = logits.value();
        auto& lg = logits.grad();
        std::vector<double> p(n);
        for (std::size_t i = 0; i < m; ++i) {
            if ((*w)[i] == 0.0) continue;
            kernels::softmax_rows_serial(lv.data() + i * n, p.data(), 1, n);
            const double c = g * (*w)[i];
            for (std::size_t j = 0; j < n; ++j) lg[i * n + j] += c * p[j];
            lg[i * n + static_cast<std::size_t>((*tg)[i])] -= c;
        }
    });
    double loss = 0.0;
    const auto& lv = logits.value();
    for (std::size_t i = 0; i < m; ++i) {
        if (row_weights[i] == 0.0) continue;
        require(targets[i] >= 0 && targets[i] < static_cast<int>(n),
                "cross_entropy: target out of range");
        double mx = lv[i * n];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, lv[i * n + j]);
        double se = 0.0;
        for (std::size_t j = 0; j < n; ++j) se += std::exp(lv[i * n + j] - mx);
        loss += row_weights[i] *
                (std::log(se) + mx - lv[i * n + static_cast<std::size_t>(targets[i])]);
    }
    out.value()[0] = loss;
    check_finite("cross_entropy", out.value());
    return out;
}

Tensor stop_gradient(const Tensor& a) {
    // Forward identity; no parent links, so nothing flows back.
    Tensor out = Tensor::from_data(a.shape(), a.value(), false);
    return out;
}

// --- composed helpers -------------------------------------------------------

Tensor scale(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }
Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

// --- backward ---------------------------------------------------------------

void backward(const Tensor& loss) {
    require(loss.defined() && loss.numel() == 1, "backward: loss must be a scalar tensor");
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS for the topological order.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* p = node->parents[next++].node();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (TensorNode* n : order) n->ensure_grad();
    loss.node()->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* n = *it;
        if (n->backprop) {
            for (double g : n->grad) {
                if (!std::isfinite(g))
                    throw NumericFailure("backward(" + n->op + "): non-finite gradient");
            }
            n->backprop(*n);
        }
    }

    // Consume the tape; leaves keep their accumulated grads.
    for (TensorNode* n : order) {
        if (n->backprop) {
            n->backprop = nullptr;
            n->parents.clear();
        }
    }
}

double finite_diff_check(const std::function<Tensor()>& loss_fn,
                         const std::vector<Tensor>& params, double eps) {
    require(eps > 0.0, "finite_diff_check: eps must be positive");
    for (const auto& p : params) {
        Tensor q = p;
        q.zero_grad();
    }
    Tensor loss = loss_fn();
    require(loss.numel() == 1, "finite_diff_check: function must be scalar-valued");
    backward(loss);

    double worst = 0.0;
    for (const auto& p : params) {
        Tensor q = p;
        auto& v = q.value();
        const auto& g = q.grad();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double saved = v[i];
            v[i] = saved + eps;
            const double up = loss_fn().item();
            v[i] = saved - eps;
            const double dn = loss_fn().item();
            v[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(dn))
                throw NumericFailure("finite_diff_check: function not finite at probe point");
            const double numeric = (up - dn) / (2.0 * eps);
            const double err = std::abs(g[i] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace imgcot
