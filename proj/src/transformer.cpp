#include "imgcot/transformer.hpp"

#include <cmath>
#include <map>

namespace imgcot {

namespace {
constexpr double kInitStd = 0.02;
constexpr double kMaskValue = -1e30;

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add(matmul(x, w), b);
}

Tensor ln_affine(const Tensor& x, const Tensor& g, const Tensor& b) {
    return add(mul(layernorm(x), g), b);
}
}  // namespace

Tensor causal_mask(int seq_len) {
    static std::map<int, Tensor> cache;
    auto it = cache.find(seq_len);
    if (it != cache.end()) return it->second;
    std::vector<double> m(static_cast<std::size_t>(seq_len) * seq_len, 0.0);
    for (int i = 0; i < seq_len; ++i)
        for (int j = i + 1; j < seq_len; ++j)
            m[static_cast<std::size_t>(i) * seq_len + j] = kMaskValue;
    Tensor t = Tensor::from_data({seq_len, seq_len}, std::move(m));
    cache.emplace(seq_len, t);
    return t;
}

Tensor head_selector(int dim, int heads, int head) {
    const int dh = dim / heads;
    std::vector<double> s(static_cast<std::size_t>(dim) * dh, 0.0);
    for (int i = 0; i < dh; ++i)
        s[static_cast<std::size_t>(head * dh + i) * dh + i] = 1.0;
    return Tensor::from_data({dim, dh}, std::move(s));
}

Tensor row_block_selector(int rows_total, int rows_b, int offset) {
    std::vector<double> s(static_cast<std::size_t>(rows_total) * rows_b, 0.0);
    for (int i = 0; i < rows_b; ++i)
        s[static_cast<std::size_t>(offset + i) * rows_b + i] = 1.0;
    return Tensor::from_data({rows_total, rows_b}, std::move(s));
}

Transformer::Transformer(const TransformerConfig& cfg, std::string prefix,
                         ParamStore& params, Rng* rng)
    : cfg_(cfg), prefix_(std::move(prefix)) {
    require(cfg.dim % cfg.heads == 0, "transformer: dim must be divisible by heads");
    const int d = cfg.dim;
    const int m = cfg.dim * cfg.mlp_ratio;
    for (int b = 0; b < cfg.blocks; ++b) {
        const std::string p = prefix_ + ".b" + std::to_string(b) + ".";
        auto ensure = [&](const std::string& name, const Shape& shape, double init_std,
                          double fill) {
            if (rng) {
                params.add(name, init_std > 0.0
                                     ? Tensor::randn(shape, *rng, init_std, true)
                                     : Tensor::full(shape, fill, true));
            } else {
                require(params.has(name), "transformer: missing parameter " + name);
            }
        };
        ensure(p + "ln1.g", {1, d}, 0.0, 1.0);
        ensure(p + "ln1.b", {1, d}, 0.0, 0.0);
        ensure(p + "wq", {d, d}, kInitStd, 0.0);
        ensure(p + "wk", {d, d}, kInitStd, 0.0);
        ensure(p + "wv", {d, d}, kInitStd, 0.0);
        ensure(p + "wo", {d, d}, kInitStd, 0.0);
        ensure(p + "bo", {1, d}, 0.0, 0.0);
        ensure(p + "ln2.g", {1, d}, 0.0, 1.0);
        ensure(p + "ln2.b", {1, d}, 0.0, 0.0);
        ensure(p + "w1", {d, m}, kInitStd, 0.0);
        ensure(p + "b1", {1, m}, 0.0, 0.0);
        ensure(p + "w2", {m, d}, kInitStd, 0.0);
        ensure(p + "b2", {1, d}, 0.0, 0.0);
    }
    if (rng) {
        params.add(prefix_ + ".lnf.g", Tensor::full({1, d}, 1.0, true));
        params.add(prefix_ + ".lnf.b", Tensor::full({1, d}, 0.0, true));
    } else {
        require(params.has(prefix_ + ".lnf.g"), "transformer: missing final layernorm");
    }
}

Tensor Transformer::forward(const ParamStore& params, const Tensor& x, bool causal) const {
    require(x.cols() == cfg_.dim, "transformer: input width mismatch");
    const int T = x.rows();
    const int dh = cfg_.dim / cfg_.heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor h = x;
    for (int b = 0; b < cfg_.blocks; ++b) {
        const std::string p = prefix_ + ".b" + std::to_string(b) + ".";
        auto P = [&](const char* n) { return params.get(p + n); };

        Tensor a_in = ln_affine(h, P("ln1.g"), P("ln1.b"));
        Tensor q = matmul(a_in, P("wq"));
        Tensor k = matmul(a_in, P("wk"));
        Tensor v = matmul(a_in, P("wv"));

        Tensor concat;  // sum of per-head outputs projected back to full width
        for (int hd = 0; hd < cfg_.heads; ++hd) {
            Tensor sel = head_selector(cfg_.dim, cfg_.heads, hd);
            Tensor qh = matmul(q, sel);
            Tensor kh = matmul(k, sel);
            Tensor vh = matmul(v, sel);
            Tensor scores = scale(matmul(qh, transpose(kh)), att_scale);
            if (causal) scores = add(scores, causal_mask(T));
            Tensor out_h = matmul(softmax(scores), vh);
            Tensor widened = matmul(out_h, transpose(sel));
            concat = concat.defined() ? add(concat, widened) : widened;
        }
        Tensor attn = add(matmul(concat, P("wo")), P("bo"));
        h = add(h, attn);

        Tensor m_in = ln_affine(h, P("ln2.g"), P("ln2.b"));
        Tensor mlp = affine(gelu(affine(m_in, P("w1"), P("b1"))), P("w2"), P("b2"));
        h = add(h, mlp);
    }
    return ln_affine(h, params.get(prefix_ + ".lnf.g"), params.get(prefix_ + ".lnf.b"));
}

}  // namespace imgcot
