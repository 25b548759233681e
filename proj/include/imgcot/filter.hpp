#pragma once

#include <string>
#include <vector>

#include "imgcot/lmclient.hpp"
#include "imgcot/reasoner.hpp"

namespace imgcot::filter {

// Confidence-based trace compression: score every token of a reasoning
// trace, average per step, drop the steps the scorer finds easy (mean above
// the corpus threshold gamma), and collapse each removed run into one
// ellipsis.

struct StepSpan {
    std::size_t begin = 0;  // character range of the step text, delimiters excluded
    std::size_t end = 0;
    std::string text;
};

// Split on any of `delimiters`; empty fragments are dropped; spans index the
// original string.
std::vector<StepSpan> split_steps(const std::string& text, const std::string& delimiters);

struct ConfidenceProfile {
    std::vector<std::string> tokens;   // backend segmentation
    std::vector<double> conf;          // log-likelihood per token position
    std::vector<int> step_of;          // token -> step index
    std::vector<double> step_means;    // position 0 never contributes
    std::string model;
};

// Position 0 has no conditioning prefix and is excluded from every mean.
// Backend tokens are mapped to steps by the character offset of their first
// character; offsets between steps attach to the earlier step.
ConfidenceProfile confidence(const std::string& text, const std::string& delimiters,
                             lmclient::Scorer& scorer);

enum class Aggregation { kMean, kLiteralSum };

struct GammaEstimate {
    double gamma = 0.0;
    std::string corpus_id;
    std::size_t token_count = 0;  // scored positions only
    Aggregation mode = Aggregation::kMean;
};

// Mean (default) or raw sum of conf over all scored positions of all texts.
GammaEstimate estimate_gamma(const std::vector<std::string>& corpus,
                             const std::string& delimiters, lmclient::Scorer& scorer,
                             const std::string& corpus_id,
                             Aggregation mode = Aggregation::kMean);

struct FilteredTrace {
    std::string text;                 // original with removed runs replaced by "..."
    std::vector<int> retained;        // original indices of the surviving steps
    int original_steps = 0;
};

// A step is removed iff its mean confidence is strictly greater than gamma;
// equality retains. Each maximal run of removed steps becomes one ellipsis.
FilteredTrace filter_trace(const std::string& cot, double gamma,
                           const std::string& delimiters, lmclient::Scorer& scorer);

// Hybrid sample: output is filtered trace text concatenated with the answer.
reasoner::TrainingSample build_limgcot_sample(const std::string& q_text,
                                              const vqtok::LatentCode& latent,
                                              const FilteredTrace& trace,
                                              const std::string& answer,
                                              const reasoner::Vocab& vocab, int dim);

}  // namespace imgcot::filter
