#pragma once

#include <memory>
#include <string>
#include <vector>

#include "imgcot/optim.hpp"
#include "imgcot/render.hpp"
#include "imgcot/transformer.hpp"

namespace imgcot::vqtok {

// 1D vector-quantized visual tokenizer: a page is patchified, encoded by a
// transformer with n learnable latent queries appended, quantized against a
// learnable codebook (nearest neighbor, straight-through gradient), and
// decoded back to pixels from the quantized latents alone.

struct VqConfig {
    int page_h = 64;
    int page_w = 64;
    int patch = 8;
    int dim = 64;           // must equal the reasoner hidden size
    int latent_tokens = 8;  // n
    int codebook_size = 256;
    int enc_blocks = 2;
    int dec_blocks = 2;
    int heads = 4;
    double commit_beta = 0.25;

    int patches_per_page() const { return (page_h / patch) * (page_w / patch); }
    void validate() const;
};

struct LatentCode {
    std::vector<int> indices;                    // n entries in [0, k)
    std::vector<std::vector<double>> embeddings; // n rows, each a codebook row
    std::string source_page;
};

struct TrainStepReport {
    double rec = 0.0;
    double codebook = 0.0;
    double commit = 0.0;
    double total = 0.0;
};

// Exhaustive nearest-neighbor lookup with ties broken toward the smallest
// index. `h` is n rows of width d, `entries` is k rows of width d.
std::vector<int> nearest_indices(const std::vector<double>& h, int n,
                                 const std::vector<double>& entries, int k, int d);

class VqTokenizer {
public:
    VqTokenizer(const VqConfig& cfg, uint64_t seed);

    // Continuous latent embeddings h = E(I), an [n, d] value matrix.
    std::vector<double> encode(const render::RenderedPage& page);

    // Nearest-neighbor quantization of an [n, d] h matrix; increments usage.
    LatentCode quantize(const std::vector<double>& h);

    // Decode quantized embeddings back to a page (values clamped to [0,255]).
    render::RenderedPage decode(const LatentCode& code);

    // One optimizer step on L_rec + L_codebook + beta * L_commit over a batch.
    TrainStepReport train_step(const std::vector<render::RenderedPage>& batch,
                               AdamW& opt, const Schedule& schedule, int step);

    // Reset entries whose usage since the last reset is below `threshold` to
    // random encoder outputs drawn from `batch_h` rows; clears all counters.
    int reinit_dead_codes(const std::vector<std::vector<double>>& batch_h,
                          uint64_t threshold, Rng& rng);

    void save(const std::string& path) const;
    static VqTokenizer load(const std::string& path);

    const VqConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const std::vector<double>& codebook_values() const;
    const std::vector<uint64_t>& usage() const { return usage_; }
    void reset_usage();

    // Graph-building pieces, used by train_step and by gradient tests.
    Tensor encode_graph(const render::RenderedPage& page) const;
    Tensor decode_graph(const Tensor& z_hat) const;  // normalized [0,1] pixels
    Tensor straight_through(const Tensor& h, const std::vector<int>& indices) const;

private:
    explicit VqTokenizer(const VqConfig& cfg);
    void bind_or_init(Rng* rng);

    VqConfig cfg_;
    ParamStore params_;
    std::vector<uint64_t> usage_;
    std::unique_ptr<Transformer> enc_;
    std::unique_ptr<Transformer> dec_;
};

// Page pixels normalized to [0,1], one row per patch ([patches, patch*patch]).
std::vector<double> patchify(const render::RenderedPage& page, int patch);

}  // namespace imgcot::vqtok
