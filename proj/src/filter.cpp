#include "imgcot/filter.hpp"

#include <cmath>
#include <limits>

namespace imgcot::filter {

namespace {
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }
}

std::vector<StepSpan> split_steps(const std::string& text,
                                  const std::string& delimiters) {
    std::vector<StepSpan> steps;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        const bool cut = i == text.size() || delimiters.find(text[i]) != std::string::npos;
        if (!cut) continue;
        std::size_t b = start, e = i;
        while (b < e && is_space(text[b])) ++b;
        while (e > b && is_space(text[e - 1])) --e;
        if (e > b) steps.push_back({b, e, text.substr(b, e - b)});
        start = i + 1;
    }
    return steps;
}

ConfidenceProfile confidence(const std::string& text, const std::string& delimiters,
                             lmclient::Scorer& scorer) {
    const std::vector<StepSpan> steps = split_steps(text, delimiters);
    require(!steps.empty(), "confidence: text contains no steps");

    lmclient::ScoreResponse r = scorer.score(text);
    require(r.tokens.size() == r.logprobs.size(), "confidence: backend length mismatch");

    ConfidenceProfile p;
    p.tokens = r.tokens;
    p.conf = r.logprobs;
    p.model = r.model;

    // Character offset -> step: a character belongs to the last step whose
    // text starts at or before it, so inter-step delimiters attach to the
    // earlier step.
    p.step_of.resize(p.tokens.size());
    std::size_t offset = 0;
    for (std::size_t i = 0; i < p.tokens.size(); ++i) {
        int s = 0;
        while (s + 1 < static_cast<int>(steps.size()) &&
               steps[static_cast<std::size_t>(s + 1)].begin <= offset)
            ++s;
        p.step_of[i] = s;
        offset += p.tokens[i].size();
    }

    std::vector<double> sums(steps.size(), 0.0);
    std::vector<int> counts(steps.size(), 0);
    for (std::size_t i = 1; i < p.conf.size(); ++i) {  // position 0 excluded
        sums[static_cast<std::size_t>(p.step_of[i])] += p.conf[i];
        ++counts[static_cast<std::size_t>(p.step_of[i])];
    }
    p.step_means.resize(steps.size());
    for (std::size_t s = 0; s < steps.size(); ++s) {
        // A step with no scored positions (only possible at the very front)
        // is always retained.
        p.step_means[s] = counts[s] > 0
                              ? sums[s] / counts[s]
                              : -std::numeric_limits<double>::infinity();
    }
    return p;
}

GammaEstimate estimate_gamma(const std::vector<std::string>& corpus,
                             const std::string& delimiters, lmclient::Scorer& scorer,
                             const std::string& corpus_id, Aggregation mode) {
    require(!corpus.empty(), "estimate_gamma: empty corpus");
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& text : corpus) {
        ConfidenceProfile p = confidence(text, delimiters, scorer);
        for (std::size_t i = 1; i < p.conf.size(); ++i) {
            sum += p.conf[i];
            ++count;
        }
    }
    require(count > 0, "estimate_gamma: no scored positions in the corpus");
    GammaEstimate g;
    g.corpus_id = corpus_id;
    g.token_count = count;
    g.mode = mode;
    g.gamma = mode == Aggregation::kMean ? sum / static_cast<double>(count) : sum;
    require(std::isfinite(g.gamma), "estimate_gamma: non-finite threshold");
    return g;
}

FilteredTrace filter_trace(const std::string& cot, double gamma,
                           const std::string& delimiters, lmclient::Scorer& scorer) {
    const std::vector<StepSpan> steps = split_steps(cot, delimiters);
    ConfidenceProfile p = confidence(cot, delimiters, scorer);

    FilteredTrace out;
    out.original_steps = static_cast<int>(steps.size());
    std::vector<bool> removed(steps.size());
    for (std::size_t s = 0; s < steps.size(); ++s) {
        removed[s] = p.step_means[s] > gamma;  // equality retains
        if (!removed[s]) out.retained.push_back(static_cast<int>(s));
    }

    // Splice: each maximal run of removed steps, including the text between
    // them, becomes one ellipsis; everything else is copied verbatim.
    std::string result;
    std::size_t cursor = 0;
    std::size_t s = 0;
    while (s < steps.size()) {
        if (!removed[s]) {
            ++s;
            continue;
        }
        std::size_t run_end = s;
        while (run_end + 1 < steps.size() && removed[run_end + 1]) ++run_end;
        result += cot.substr(cursor, steps[s].begin - cursor);
        result += "...";
        cursor = steps[run_end].end;
        s = run_end + 1;
    }
    result += cot.substr(cursor);
    out.text = std::move(result);
    return out;
}

reasoner::TrainingSample build_limgcot_sample(const std::string& q_text,
                                              const vqtok::LatentCode& latent,
                                              const FilteredTrace& trace,
                                              const std::string& answer,
                                              const reasoner::Vocab& vocab, int dim) {
    return reasoner::assemble_sample(q_text, latent, trace.text + answer, vocab, dim);
}

}  // namespace imgcot::filter
