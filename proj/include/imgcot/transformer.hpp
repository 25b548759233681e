#pragma once

#include <string>

#include "imgcot/optim.hpp"
#include "imgcot/tensor.hpp"

namespace imgcot {

// Pre-LN transformer stack shared by the visual tokenizer and the reasoner.
// Parameters live in a ParamStore under a name prefix so checkpointing and
// the optimizer see one flat table. The forward pass builds an autodiff
// graph from the fixed primitive set (attention heads are column-selected
// via constant selector matmuls).

struct TransformerConfig {
    int dim = 64;
    int heads = 4;
    int blocks = 2;
    int mlp_ratio = 4;
};

class Transformer {
public:
    // rng != nullptr: create and register fresh parameters.
    // rng == nullptr: bind to parameters already present (e.g. a checkpoint).
    Transformer(const TransformerConfig& cfg, std::string prefix, ParamStore& params,
                Rng* rng);

    // x is [T, dim]; returns [T, dim] after the final layernorm. The store
    // is passed per call so owners stay freely movable.
    Tensor forward(const ParamStore& params, const Tensor& x, bool causal) const;

    const TransformerConfig& config() const { return cfg_; }

private:
    TransformerConfig cfg_;
    std::string prefix_;
};

// Constant additive causal mask: 0 on/below the diagonal, a large negative
// number above. Cached per sequence length.
Tensor causal_mask(int seq_len);

// Constant [dim, dim/heads] selector for head h (used to slice and to
// re-concatenate head columns).
Tensor head_selector(int dim, int heads, int head);

// Constant 0/1 selector placing a [rows_b, d] block at row offset within a
// [rows_total, rows_b] matmul; concat of row blocks = sum of selector matmuls.
Tensor row_block_selector(int rows_total, int rows_b, int offset);

}  // namespace imgcot
