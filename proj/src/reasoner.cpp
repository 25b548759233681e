#include "imgcot/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "imgcot/checkpoint.hpp"

namespace imgcot::reasoner {

Vocab Vocab::build(const std::string& charset) {
    Vocab v;
    v.charset = charset;
    std::string seen;
    for (char c : charset) {
        require(seen.find(c) == std::string::npos,
                std::string("vocab: duplicate character '") + c + "'");
        seen.push_back(c);
    }
    return v;
}

int Vocab::id_of(char c) const {
    auto pos = charset.find(c);
    require(pos != std::string::npos,
            std::string("vocab: character '") + c + "' not in charset");
    return kSpecials + static_cast<int>(pos);
}

std::vector<int> Vocab::encode_text(const std::string& text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (char c : text) ids.push_back(id_of(c));
    return ids;
}

std::vector<int> Vocab::encode_output(const std::string& text) const {
    std::vector<int> ids;
    for (std::size_t i = 0; i < text.size();) {
        if (text.compare(i, 3, "...") == 0) {
            ids.push_back(kEll);
            i += 3;
        } else {
            ids.push_back(id_of(text[i]));
            ++i;
        }
    }
    ids.push_back(kEos);
    return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kEll) {
            out += "...";
        } else if (id >= kSpecials) {
            require(id < size(), "vocab: id out of range");
            out.push_back(charset[static_cast<std::size_t>(id - kSpecials)]);
        }
        // bot/eol/eos decode to nothing
    }
    return out;
}

SampleLayout layout_of(const TrainingSample& sample) {
    const int n = static_cast<int>(sample.latents.size());
    require(n >= 1, "sample: at least one latent row is required");
    require(!sample.output.empty() && sample.output.back() == Vocab::kEos,
            "sample: output must end with the end-of-sequence token");
    SampleLayout l;
    l.s_z = static_cast<int>(sample.question.size()) + 1;
    l.e_z = l.s_z + n;
    l.s_o = l.e_z + 1;
    l.e_o = l.s_o + static_cast<int>(sample.output.size());
    return l;
}

TrainingSample assemble_sample(const std::string& q_text, const vqtok::LatentCode& latent,
                               const std::string& output_text, const Vocab& vocab,
                               int dim) {
    TrainingSample s;
    s.question = vocab.encode_text(q_text);
    s.output = vocab.encode_output(output_text);
    require(!latent.embeddings.empty(), "assemble_sample: need at least one latent row");
    for (const auto& row : latent.embeddings)
        require(static_cast<int>(row.size()) == dim,
                "assemble_sample: latent width does not match the model dimension");
    s.latents = latent.embeddings;
    layout_of(s);  // validates the span invariants
    return s;
}

void ReasonerConfig::validate() const {
    require(dim > 0 && heads > 0 && blocks > 0 && context > 0,
            "reasoner: all dimensions must be positive");
    require(dim % heads == 0, "reasoner: dim must be divisible by heads");
    require(latent_tokens >= 1, "reasoner: need at least one latent token");
}

ReasonerNet::ReasonerNet(const ReasonerConfig& cfg, const Vocab& vocab)
    : cfg_(cfg), vocab_(vocab) {
    cfg_.validate();
}

ReasonerNet::ReasonerNet(const ReasonerConfig& cfg, const Vocab& vocab, uint64_t seed)
    : ReasonerNet(cfg, vocab) {
    Rng rng(seed, /*stream=*/202);
    bind_or_init(&rng);
}

void ReasonerNet::bind_or_init(Rng* rng) {
    const int d = cfg_.dim;
    const int V = vocab_.size();
    if (rng) {
        params_.add("emb", Tensor::randn({V, d}, *rng, 0.02, true));
        params_.add("pos", Tensor::randn({cfg_.context, d}, *rng, 0.02, true));
        params_.add("text_head.w", Tensor::randn({d, V}, *rng, 0.02, true));
        params_.add("text_head.b", Tensor::full({1, V}, 0.0, true));
        params_.add("latent_head.w", Tensor::randn({d, d}, *rng, 0.02, true));
        params_.add("latent_head.b", Tensor::full({1, d}, 0.0, true));
    }
    TransformerConfig tc{d, cfg_.heads, cfg_.blocks, 4};
    tf_ = std::make_unique<Transformer>(tc, "rsn.tf", params_, rng);
}

ReasonerNet::Heads ReasonerNet::forward(
    const std::vector<int>& ids, const std::vector<std::vector<double>>& latents,
    const std::vector<int>& latent_rows) const {
    const int T = static_cast<int>(ids.size());
    const int d = cfg_.dim;
    require(T >= 1, "reasoner: empty sequence");
    require(T <= cfg_.context, "reasoner: sequence exceeds the context window");
    require(latents.size() == latent_rows.size(), "reasoner: latent row mismatch");

    // Token rows carry the embedding, latent rows carry the continuous
    // vector; a 0/1 column mask keeps the two streams from mixing.
    std::vector<double> mask(static_cast<std::size_t>(T), 1.0);
    std::vector<double> latent_data(static_cast<std::size_t>(T) * d, 0.0);
    for (std::size_t i = 0; i < latent_rows.size(); ++i) {
        const int r = latent_rows[i];
        require(r >= 0 && r < T, "reasoner: latent row out of range");
        require(static_cast<int>(latents[i].size()) == d, "reasoner: latent width");
        mask[static_cast<std::size_t>(r)] = 0.0;
        std::copy(latents[i].begin(), latents[i].end(),
                  latent_data.begin() + static_cast<std::size_t>(r) * d);
    }
    Tensor tok = embedding(params_.get("emb"), ids);
    Tensor masked = mul(tok, Tensor::from_data({T, 1}, std::move(mask)));
    Tensor lat = Tensor::from_data({T, d}, std::move(latent_data));
    std::vector<int> rows(static_cast<std::size_t>(T));
    std::iota(rows.begin(), rows.end(), 0);
    Tensor x = add(add(masked, lat), gather_rows(params_.get("pos"), rows));

    Tensor states = tf_->forward(params_, x, /*causal=*/true);
    Heads h;
    h.text_logits = add(matmul(states, params_.get("text_head.w")),
                        params_.get("text_head.b"));
    h.latent_preds = add(matmul(states, params_.get("latent_head.w")),
                         params_.get("latent_head.b"));
    return h;
}

LossReport ReasonerNet::mixed_loss(const TrainingSample& sample) const {
    const SampleLayout l = layout_of(sample);
    const int n = l.e_z - l.s_z;
    const int d = cfg_.dim;

    std::vector<int> ids(static_cast<std::size_t>(l.length()), 0);
    std::vector<int> latent_rows(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < sample.question.size(); ++i) ids[i] = sample.question[i];
    ids[static_cast<std::size_t>(l.s_z - 1)] = Vocab::kBot;
    for (int i = 0; i < n; ++i) latent_rows[static_cast<std::size_t>(i)] = l.s_z + i;
    ids[static_cast<std::size_t>(l.e_z)] = Vocab::kEol;
    for (std::size_t i = 0; i < sample.output.size(); ++i)
        ids[static_cast<std::size_t>(l.s_o) + i] = sample.output[i];

    Heads h = forward(ids, sample.latents, latent_rows);

    // Latent regression: the row before each latent predicts it.
    std::vector<int> pred_rows(static_cast<std::size_t>(n));
    std::vector<double> target(static_cast<std::size_t>(n) * d);
    for (int i = 0; i < n; ++i) {
        pred_rows[static_cast<std::size_t>(i)] = l.s_z - 1 + i;
        std::copy(sample.latents[static_cast<std::size_t>(i)].begin(),
                  sample.latents[static_cast<std::size_t>(i)].end(),
                  target.begin() + static_cast<std::size_t>(i) * d);
    }
    std::vector<double> ones_n(static_cast<std::size_t>(n), 1.0);
    Tensor l_latent = mse(gather_rows(h.latent_preds, pred_rows),
                          Tensor::from_data({n, d}, std::move(target)), ones_n);

    // Text prediction: the row before each output token predicts it. The
    // end-of-latent row itself is never a target, so its prediction from the
    // last latent row stays unsupervised.
    const int m = static_cast<int>(sample.output.size());
    std::vector<int> text_rows(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) text_rows[static_cast<std::size_t>(i)] = l.s_o - 1 + i;
    std::vector<double> ones_m(static_cast<std::size_t>(m), 1.0);
    Tensor l_text =
        cross_entropy(gather_rows(h.text_logits, text_rows), sample.output, ones_m);

    LossReport r;
    r.denominator = n + m;
    r.latent_sum = l_latent.item();
    r.text_sum = l_text.item();
    r.graph = scale(add(l_latent, l_text), 1.0 / r.denominator);
    r.total = r.graph.item();
    return r;
}

double ReasonerNet::train_step(const std::vector<TrainingSample>& batch, AdamW& opt,
                               const Schedule& schedule, int step) {
    require(!batch.empty(), "train_step: empty batch");
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    params_.zero_grads();
    double mean = 0.0;
    for (const auto& sample : batch) {
        LossReport r = mixed_loss(sample);
        backward(scale(r.graph, inv_b));
        mean += r.total * inv_b;
    }
    if (!std::isfinite(mean)) throw NumericFailure("reasoner train_step: NaN loss");
    opt.step(params_, schedule, step);
    return mean;
}

InferResult ReasonerNet::infer(const std::vector<int>& question, int max_output,
                               const vqtok::VqTokenizer* requantize) const {
    require(max_output >= 1, "infer: max_output must be positive");
    const int d = cfg_.dim;
    const int n = cfg_.latent_tokens;

    std::vector<int> ids(question);
    ids.push_back(Vocab::kBot);
    std::vector<std::vector<double>> latents;
    std::vector<int> latent_rows;
    InferResult res;

    for (int i = 0; i < n; ++i) {
        Heads h = forward(ids, latents, latent_rows);
        const auto& preds = h.latent_preds.value();
        const int last = static_cast<int>(ids.size()) - 1;
        std::vector<double> z(preds.begin() + static_cast<std::size_t>(last) * d,
                              preds.begin() + static_cast<std::size_t>(last + 1) * d);
        if (requantize) {
            const auto& cb = requantize->codebook_values();
            const int k = requantize->config().codebook_size;
            require(requantize->config().dim == d, "infer: tokenizer width mismatch");
            const int j = vqtok::nearest_indices(z, 1, cb, k, d)[0];
            z.assign(cb.begin() + static_cast<std::size_t>(j) * d,
                     cb.begin() + static_cast<std::size_t>(j + 1) * d);
            res.latent_indices.push_back(j);
        }
        latent_rows.push_back(static_cast<int>(ids.size()));
        latents.push_back(z);
        ids.push_back(0);  // placeholder; masked out by the latent row
        res.latents.push_back(std::move(z));
        ++res.steps;
    }
    ids.push_back(Vocab::kEol);

    const int V = vocab_.size();
    while (true) {
        Heads h = forward(ids, latents, latent_rows);
        const auto& logits = h.text_logits.value();
        const int last = static_cast<int>(ids.size()) - 1;
        const double* row = logits.data() + static_cast<std::size_t>(last) * V;
        const int next = static_cast<int>(std::max_element(row, row + V) - row);
        ids.push_back(next);
        res.output_ids.push_back(next);
        ++res.steps;
        if (next == Vocab::kEos) break;
        if (static_cast<int>(res.output_ids.size()) >= max_output) {
            res.truncated = true;
            break;
        }
    }
    res.text = vocab_.decode(res.output_ids);
    return res;
}

std::vector<double> ReasonerNet::text_logits(const std::vector<int>& ids) const {
    require(!ids.empty(), "text_logits: empty sequence");
    std::vector<int> seq;
    seq.reserve(ids.size() + 1);
    seq.push_back(Vocab::kBot);
    seq.insert(seq.end(), ids.begin(), ids.end());
    Heads h = forward(seq, {}, {});
    const auto& logits = h.text_logits.value();
    // Drop the final row; it predicts the position after the last token.
    return std::vector<double>(logits.begin(),
                               logits.begin() +
                                   static_cast<std::ptrdiff_t>(ids.size()) * vocab_.size());
}

std::vector<double> ReasonerNet::text_logprobs(const std::vector<int>& ids) const {
    require(!ids.empty(), "text_logprobs: empty sequence");
    std::vector<int> seq;
    seq.reserve(ids.size() + 1);
    seq.push_back(Vocab::kBot);
    seq.insert(seq.end(), ids.begin(), ids.end());

    Heads h = forward(seq, {}, {});
    const int V = vocab_.size();
    const auto& logits = h.text_logits.value();
    std::vector<double> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const double* row = logits.data() + i * static_cast<std::size_t>(V);
        const double mx = *std::max_element(row, row + V);
        double lse = 0.0;
        for (int v = 0; v < V; ++v) lse += std::exp(row[v] - mx);
        require(ids[i] >= 0 && ids[i] < V, "text_logprobs: id out of range");
        out[i] = row[ids[i]] - (mx + std::log(lse));
    }
    return out;
}

void ReasonerNet::save(const std::string& path) const {
    std::map<std::string, std::string> meta{
        {"kind", "reasoner"},
        {"dim", std::to_string(cfg_.dim)},
        {"heads", std::to_string(cfg_.heads)},
        {"blocks", std::to_string(cfg_.blocks)},
        {"context", std::to_string(cfg_.context)},
        {"latent_tokens", std::to_string(cfg_.latent_tokens)},
        {"charset", vocab_.charset},
    };
    save_checkpoint(path, params_, meta);
}

ReasonerNet ReasonerNet::load(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.meta["kind"] != "reasoner")
        throw ConfigError("reasoner load: checkpoint kind is '" + ck.meta["kind"] + "'");
    ReasonerConfig cfg;
    cfg.dim = std::stoi(ck.meta.at("dim"));
    cfg.heads = std::stoi(ck.meta.at("heads"));
    cfg.blocks = std::stoi(ck.meta.at("blocks"));
    cfg.context = std::stoi(ck.meta.at("context"));
    cfg.latent_tokens = std::stoi(ck.meta.at("latent_tokens"));
    ReasonerNet net(cfg, Vocab::build(ck.meta.at("charset")));
    net.params_ = std::move(ck.params);
    net.bind_or_init(nullptr);
    return net;
}

std::vector<double> train(ReasonerNet& net, const std::vector<TrainingSample>& dataset,
                          const TrainOptions& opts) {
    require(!dataset.empty(), "train: empty dataset");
    require(opts.epochs >= 1 && opts.batch_size >= 1, "train: bad epochs/batch size");
    const int N = static_cast<int>(dataset.size());
    const int steps_per_epoch = (N + opts.batch_size - 1) / opts.batch_size;

    Schedule sched;
    sched.base_lr = opts.base_lr;
    sched.total_steps = opts.epochs * steps_per_epoch;
    AdamW::Config ocfg;
    ocfg.weight_decay = opts.weight_decay;
    AdamW opt(ocfg);
    Rng shuffle_rng(opts.seed, /*stream=*/303);

    std::vector<int> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> curve;
    int step = 0;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        for (int i = N - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[shuffle_rng.below(static_cast<uint64_t>(i) + 1)]);
        double epoch_loss = 0.0;
        for (int b = 0; b < steps_per_epoch; ++b) {
            std::vector<TrainingSample> batch;
            for (int j = b * opts.batch_size; j < std::min(N, (b + 1) * opts.batch_size); ++j)
                batch.push_back(dataset[static_cast<std::size_t>(
                    order[static_cast<std::size_t>(j)])]);
            epoch_loss += net.train_step(batch, opt, sched, ++step) *
                          static_cast<double>(batch.size());
        }
        curve.push_back(epoch_loss / N);
        if (!opts.checkpoint_dir.empty()) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%03d.ickp", epoch + 1);
            net.save(opts.checkpoint_dir + "/" + name);
        }
    }
    return curve;
}

}  // namespace imgcot::reasoner
