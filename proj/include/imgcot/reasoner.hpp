#pragma once

#include <memory>
#include <string>
#include <vector>

#include "imgcot/optim.hpp"
#include "imgcot/transformer.hpp"
#include "imgcot/vqtok.hpp"

namespace imgcot::reasoner {

// Autoregressive reasoner over a mixed sequence: question text, a
// begin-of-thought marker, n continuous latent positions (visual thought
// tokens), an end-of-latent marker, then the answer text. A latent head
// regresses the next latent embedding while a text head predicts the next
// character; the two supervision streams share one denominator.

struct Vocab {
    // Special ids come first so they are stable across charsets.
    static constexpr int kBot = 0;  // begin-of-thought
    static constexpr int kEol = 1;  // end-of-latent-span
    static constexpr int kEos = 2;  // end-of-sequence
    static constexpr int kEll = 3;  // ellipsis standing in for removed steps
    static constexpr int kSpecials = 4;

    std::string charset;  // printable characters, in id order after specials

    static Vocab build(const std::string& charset);

    int size() const { return kSpecials + static_cast<int>(charset.size()); }
    int id_of(char c) const;  // throws ContractViolation for unknown chars

    // Plain character encoding; no specials are produced or appended.
    std::vector<int> encode_text(const std::string& text) const;
    // Like encode_text but "..." becomes a single ellipsis token and an
    // end-of-sequence token is appended.
    std::vector<int> encode_output(const std::string& text) const;
    // Inverse mapping; ellipsis prints as "...", other specials print as "".
    std::string decode(const std::vector<int>& ids) const;
};

struct TrainingSample {
    std::vector<int> question;                    // character ids
    std::vector<std::vector<double>> latents;     // n rows of width d
    std::vector<int> output;                      // character ids ending in eos
};

// Row positions of the spans within the assembled sequence:
//   [0, |q|)            question
//   |q|                 begin-of-thought
//   [s_z, e_z)          latent rows,  s_z = |q| + 1, e_z = s_z + n
//   e_z                 end-of-latent marker
//   [s_o, e_o)          output rows,  s_o = e_z + 1, e_o = s_o + |output|
// The sequence length equals e_o.
struct SampleLayout {
    int s_z = 0;
    int e_z = 0;
    int s_o = 0;
    int e_o = 0;
    int length() const { return e_o; }
};

SampleLayout layout_of(const TrainingSample& sample);

// Builds a sample from raw texts and a tokenizer latent code; output text is
// the plain concatenation the caller wants supervised (end-of-sequence is
// appended by the encoding).
TrainingSample assemble_sample(const std::string& q_text, const vqtok::LatentCode& latent,
                               const std::string& output_text, const Vocab& vocab,
                               int dim);

struct LossReport {
    Tensor graph;          // scalar; feed to backward()
    double latent_sum = 0; // sum of per-position latent regression errors
    double text_sum = 0;   // sum of per-position text cross-entropies
    int denominator = 0;   // n + |output|
    double total = 0;      // (latent_sum + text_sum) / denominator
};

struct InferResult {
    std::vector<std::vector<double>> latents;  // n rows emitted by the model
    std::vector<int> latent_indices;           // codebook ids when re-quantized
    std::vector<int> output_ids;               // text ids, eos included if seen
    std::string text;                          // decoded, eos stripped
    bool truncated = false;                    // hit max_output before eos
    int steps = 0;                             // total autoregressive steps
};

struct ReasonerConfig {
    int dim = 64;
    int heads = 4;
    int blocks = 4;
    int context = 512;
    int latent_tokens = 8;  // n

    void validate() const;
};

class ReasonerNet {
public:
    ReasonerNet(const ReasonerConfig& cfg, const Vocab& vocab, uint64_t seed);

    // Builds the mixed-loss graph for one sample. Components are reported
    // per call; graph is live until backward() consumes it.
    LossReport mixed_loss(const TrainingSample& sample) const;

    // Gradient-accumulated step over a batch; returns the mean total loss.
    double train_step(const std::vector<TrainingSample>& batch, AdamW& opt,
                      const Schedule& schedule, int step);

    // Emit exactly n latent rows (optionally snapped to the tokenizer's
    // codebook after each step), the end-of-latent marker, then greedy text
    // until end-of-sequence or max_output characters.
    InferResult infer(const std::vector<int>& question, int max_output,
                      const vqtok::VqTokenizer* requantize = nullptr) const;

    // Per-token log-probabilities of a plain text id sequence under the text
    // head, teacher-forced with a begin-of-thought row in front so every
    // token gets a score. Latent rows are not involved.
    std::vector<double> text_logprobs(const std::vector<int>& ids) const;

    // Raw text-head logits for the same teacher-forced pass, row-major
    // [|ids|, vocab]; row i scores the prediction of ids[i]. Lets callers
    // cross-check the log-softmax arithmetic independently.
    std::vector<double> text_logits(const std::vector<int>& ids) const;

    void save(const std::string& path) const;
    static ReasonerNet load(const std::string& path);

    const ReasonerConfig& config() const { return cfg_; }
    const Vocab& vocab() const { return vocab_; }
    ParamStore& params() { return params_; }

private:
    explicit ReasonerNet(const ReasonerConfig& cfg, const Vocab& vocab);
    void bind_or_init(Rng* rng);
    // States, text logits and latent predictions for an assembled sequence.
    struct Heads {
        Tensor text_logits;   // [T, V]
        Tensor latent_preds;  // [T, d]
    };
    Heads forward(const std::vector<int>& ids,
                  const std::vector<std::vector<double>>& latents,
                  const std::vector<int>& latent_rows) const;

    ReasonerConfig cfg_;
    Vocab vocab_;
    ParamStore params_;
    std::unique_ptr<Transformer> tf_;
};

struct TrainOptions {
    int epochs = 5;
    int batch_size = 4;
    double base_lr = 1e-3;
    double weight_decay = 0.1;
    uint64_t seed = 0;
    std::string checkpoint_dir;  // empty: no per-epoch checkpoints
};

// Shuffled mini-batch training; returns the per-epoch mean loss curve.
// Deterministic under a fixed seed; halts with NumericFailure on NaN.
std::vector<double> train(ReasonerNet& net, const std::vector<TrainingSample>& dataset,
                          const TrainOptions& opts);

}  // namespace imgcot::reasoner
