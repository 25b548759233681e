#pragma once

#include <string>
#include <utility>
#include <vector>

#include "imgcot/config.hpp"
#include "imgcot/dataset.hpp"
#include "imgcot/filter.hpp"
#include "imgcot/render.hpp"
#include "imgcot/synthetic.hpp"

namespace imgcot::pipeline {

// Wiring between the stages: render traces to pages, train the tokenizer on
// them, assemble latent training samples, train and evaluate the reasoner.
// Everything is a pure function of (config, seed).

reasoner::Vocab task_vocab();

render::RenderConfig cot_render_config(const config::PipelineConfig& cfg);
vqtok::VqConfig tokenizer_config(const config::PipelineConfig& cfg);
reasoner::ReasonerConfig reasoner_config(const config::PipelineConfig& cfg);

std::vector<render::RenderedPage> render_cot(const std::string& cot,
                                             const render::RenderConfig& rc);

// First `max_pages` pages rendered from the tasks' traces, in task order.
std::vector<render::RenderedPage> collect_pages(
    const std::vector<synthetic::ChainTask>& tasks, const render::RenderConfig& rc,
    int max_pages);

struct TokenizerTrainOptions {
    int steps = 500;
    int batch = 24;
    double lr = 1e-3;
    uint64_t seed = 0;
    int reinit_interval = 100;   // steps between dead-code sweeps; 0 disables
    uint64_t dead_threshold = 1; // usage below this counts as dead
};

struct TokenizerTrainReport {
    std::vector<double> rec;  // reconstruction loss per step
    int reinitialized = 0;    // codebook rows replaced across all sweeps
};

TokenizerTrainReport train_tokenizer(vqtok::VqTokenizer& tok,
                                     const std::vector<render::RenderedPage>& pages,
                                     const TokenizerTrainOptions& opts);

// Render each task's trace, encode its first page, quantize, and assemble a
// training sample whose output is the plain answer.
std::vector<reasoner::TrainingSample> build_samples(
    const std::vector<synthetic::ChainTask>& tasks, vqtok::VqTokenizer& tok,
    const render::RenderConfig& rc, const reasoner::Vocab& vocab);

struct EvalReport {
    double exact_match = 0.0;
    int latent_per_inference = 0;  // constant by the fixed-n contract
    int truncated = 0;
    double mean_text_tokens = 0.0;
};

EvalReport evaluate(const reasoner::ReasonerNet& net,
                    const std::vector<synthetic::ChainTask>& tasks,
                    const reasoner::Vocab& vocab, const vqtok::VqTokenizer* requantize,
                    int max_output);

struct EndToEndResult {
    TokenizerTrainReport tokenizer;
    std::vector<double> reasoner_curve;  // per-epoch mean loss
    EvalReport eval;
};

// render -> tokenize -> train reasoner -> infer, all from one config.
EndToEndResult run_end_to_end(const config::PipelineConfig& cfg);

// Run manifest: config hash, seed, and an FNV-1a digest per artifact file.
void write_manifest(const std::string& path, const config::PipelineConfig& cfg,
                    const std::vector<std::pair<std::string, std::string>>& artifacts);

}  // namespace imgcot::pipeline
