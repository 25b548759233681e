#include "imgcot/vqtok.hpp"

#include <algorithm>
#include <cmath>

#include "imgcot/checkpoint.hpp"

namespace imgcot::vqtok {

namespace {
std::string fmt_int(int v) { return std::to_string(v); }
}

void VqConfig::validate() const {
    require(page_h > 0 && page_w > 0 && patch > 0, "vqtok: bad page/patch size");
    require(page_h % patch == 0 && page_w % patch == 0,
            "vqtok: page dimensions must be divisible by the patch size");
    require(dim > 0 && latent_tokens >= 1 && codebook_size >= 1,
            "vqtok: need d > 0, n >= 1, k >= 1");
    require(dim % heads == 0, "vqtok: dim must be divisible by heads");
}

std::vector<int> nearest_indices(const std::vector<double>& h, int n,
                                 const std::vector<double>& entries, int k, int d) {
    require(k >= 1, "quantize: empty codebook");
    require(static_cast<int>(h.size()) == n * d, "quantize: h width mismatch");
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double best = 0.0;
        int best_j = -1;
        for (int j = 0; j < k; ++j) {
            double dist = 0.0;
            for (int c = 0; c < d; ++c) {
                const double diff = h[static_cast<std::size_t>(i) * d + c] -
                                    entries[static_cast<std::size_t>(j) * d + c];
                dist += diff * diff;
            }
            if (best_j < 0 || dist < best) {  // strict: ties keep the smaller j
                best = dist;
                best_j = j;
            }
        }
        out[static_cast<std::size_t>(i)] = best_j;
    }
    return out;
}

std::vector<double> patchify(const render::RenderedPage& page, int patch) {
    const int ph = page.height / patch, pw = page.width / patch;
    std::vector<double> out(static_cast<std::size_t>(ph) * pw * patch * patch);
    std::size_t r = 0;
    for (int py = 0; py < ph; ++py) {
        for (int px = 0; px < pw; ++px) {
            for (int y = 0; y < patch; ++y) {
                for (int x = 0; x < patch; ++x) {
                    const int gy = py * patch + y, gx = px * patch + x;
                    out[r++] =
                        page.pixels[static_cast<std::size_t>(gy) * page.width + gx] / 255.0;
                }
            }
        }
    }
    return out;
}

VqTokenizer::VqTokenizer(const VqConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    usage_.assign(static_cast<std::size_t>(cfg_.codebook_size), 0);
}

VqTokenizer::VqTokenizer(const VqConfig& cfg, uint64_t seed) : VqTokenizer(cfg) {
    Rng rng(seed, /*stream=*/101);
    bind_or_init(&rng);
}

void VqTokenizer::bind_or_init(Rng* rng) {
    const int d = cfg_.dim;
    const int pp = cfg_.patch * cfg_.patch;
    const int np = cfg_.patches_per_page();
    const int n = cfg_.latent_tokens;
    if (rng) {
        params_.add("enc.patch_embed", Tensor::randn({pp, d}, *rng, 0.02, true));
        params_.add("enc.patch_bias", Tensor::full({1, d}, 0.0, true));
        params_.add("enc.queries", Tensor::randn({n, d}, *rng, 0.02, true));
        params_.add("enc.pos", Tensor::randn({np + n, d}, *rng, 0.02, true));
        params_.add("dec.mask", Tensor::randn({np, d}, *rng, 0.02, true));
        params_.add("dec.pos", Tensor::randn({np + n, d}, *rng, 0.02, true));
        params_.add("dec.unembed", Tensor::randn({d, pp}, *rng, 0.02, true));
        params_.add("dec.unembed_bias", Tensor::full({1, pp}, 0.0, true));
        // Uniform in [-1/sqrt(d), 1/sqrt(d)], matching embedding-scale init.
        const double lim = 1.0 / std::sqrt(static_cast<double>(d));
        std::vector<double> cb(static_cast<std::size_t>(cfg_.codebook_size) * d);
        for (double& x : cb) x = rng->uniform(-lim, lim);
        params_.add("codebook", Tensor::from_data({cfg_.codebook_size, d}, std::move(cb), true));
    }
    TransformerConfig ec{d, cfg_.heads, cfg_.enc_blocks, 4};
    TransformerConfig dc{d, cfg_.heads, cfg_.dec_blocks, 4};
    enc_ = std::make_unique<Transformer>(ec, "enc.tf", params_, rng);
    dec_ = std::make_unique<Transformer>(dc, "dec.tf", params_, rng);
}

Tensor VqTokenizer::encode_graph(const render::RenderedPage& page) const {
    require(page.height == cfg_.page_h && page.width == cfg_.page_w,
            "encode: page dimensions do not match configuration");
    const int np = cfg_.patches_per_page();
    const int n = cfg_.latent_tokens;
    const int pp = cfg_.patch * cfg_.patch;
    Tensor patches = Tensor::from_data({np, pp}, patchify(page, cfg_.patch));
    Tensor embedded =
        add(matmul(patches, params_.get("enc.patch_embed")), params_.get("enc.patch_bias"));
    // Concat rows: [patch tokens; latent queries], via constant selectors.
    Tensor x = add(matmul(row_block_selector(np + n, np, 0), embedded),
                   matmul(row_block_selector(np + n, n, np), params_.get("enc.queries")));
    x = add(x, params_.get("enc.pos"));
    Tensor y = enc_->forward(params_, x, /*causal=*/false);
    // The n latent positions are the last n rows.
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = np + i;
    return gather_rows(y, idx);
}

std::vector<double> VqTokenizer::encode(const render::RenderedPage& page) {
    return encode_graph(page).value();
}

LatentCode VqTokenizer::quantize(const std::vector<double>& h) {
    const int n = cfg_.latent_tokens, d = cfg_.dim;
    const auto& cb = params_.get("codebook").value();
    LatentCode code;
    code.indices = nearest_indices(h, n, cb, cfg_.codebook_size, d);
    code.embeddings.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int j = code.indices[static_cast<std::size_t>(i)];
        code.embeddings[static_cast<std::size_t>(i)]
            .assign(cb.begin() + static_cast<std::size_t>(j) * d,
                    cb.begin() + static_cast<std::size_t>(j + 1) * d);
        ++usage_[static_cast<std::size_t>(j)];
    }
    return code;
}

Tensor VqTokenizer::straight_through(const Tensor& h, const std::vector<int>& indices) const {
    Tensor selected = gather_rows(params_.get("codebook"), indices);
    // z_hat = sg(e) + (h - sg(h)): forward value is the codebook row exactly
    // (h - h cancels bitwise), gradient w.r.t. h is the identity, and no
    // gradient reaches the codebook from downstream of the quantizer.
    return add(stop_gradient(selected), sub(h, stop_gradient(h)));
}

Tensor VqTokenizer::decode_graph(const Tensor& z_hat) const {
    require(z_hat.rows() == cfg_.latent_tokens && z_hat.cols() == cfg_.dim,
            "decode: z must be [n, d]");
    const int np = cfg_.patches_per_page();
    const int n = cfg_.latent_tokens;
    Tensor x = add(matmul(row_block_selector(np + n, np, 0), params_.get("dec.mask")),
                   matmul(row_block_selector(np + n, n, np), z_hat));
    x = add(x, params_.get("dec.pos"));
    Tensor y = dec_->forward(params_, x, /*causal=*/false);
    std::vector<int> idx(static_cast<std::size_t>(np));
    for (int i = 0; i < np; ++i) idx[static_cast<std::size_t>(i)] = i;
    Tensor patch_rows = gather_rows(y, idx);
    return add(matmul(patch_rows, params_.get("dec.unembed")),
               params_.get("dec.unembed_bias"));
}

render::RenderedPage VqTokenizer::decode(const LatentCode& code) {
    const int n = cfg_.latent_tokens, d = cfg_.dim;
    std::vector<double> z(static_cast<std::size_t>(n) * d);
    require(static_cast<int>(code.embeddings.size()) == n, "decode: latent row count");
    for (int i = 0; i < n; ++i) {
        require(static_cast<int>(code.embeddings[static_cast<std::size_t>(i)].size()) == d,
                "decode: latent width");
        std::copy(code.embeddings[static_cast<std::size_t>(i)].begin(),
                  code.embeddings[static_cast<std::size_t>(i)].end(),
                  z.begin() + static_cast<std::size_t>(i) * d);
    }
    Tensor patches = decode_graph(Tensor::from_data({n, d}, std::move(z)));

    render::RenderedPage page;
    page.height = cfg_.page_h;
    page.width = cfg_.page_w;
    page.pixels.assign(static_cast<std::size_t>(cfg_.page_h) * cfg_.page_w, 0);
    const int ph = cfg_.page_h / cfg_.patch, pw = cfg_.page_w / cfg_.patch;
    const auto& v = patches.value();
    std::size_t r = 0;
    for (int py = 0; py < ph; ++py)
        for (int px = 0; px < pw; ++px)
            for (int y = 0; y < cfg_.patch; ++y)
                for (int x = 0; x < cfg_.patch; ++x) {
                    const double val = std::clamp(v[r++] * 255.0, 0.0, 255.0);
                    page.pixels[static_cast<std::size_t>(py * cfg_.patch + y) * cfg_.page_w +
                                px * cfg_.patch + x] =
                        static_cast<uint8_t>(std::lround(val));
                }
    return page;
}

TrainStepReport VqTokenizer::train_step(const std::vector<render::RenderedPage>& batch,
                                        AdamW& opt, const Schedule& schedule, int step) {
    require(!batch.empty(), "train_step: empty batch");
    const int n = cfg_.latent_tokens;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const std::vector<double> ones_n(static_cast<std::size_t>(n), 1.0);

    params_.zero_grads();
    TrainStepReport report;
    for (const auto& page : batch) {
        Tensor h = encode_graph(page);
        const std::vector<int> idx =
            nearest_indices(h.value(), n, params_.get("codebook").value(),
                            cfg_.codebook_size, cfg_.dim);
        for (int j : idx) ++usage_[static_cast<std::size_t>(j)];

        Tensor z_hat = straight_through(h, idx);
        Tensor rec = decode_graph(z_hat);
        Tensor target = Tensor::from_data({cfg_.patches_per_page(), cfg_.patch * cfg_.patch},
                                          patchify(page, cfg_.patch));
        const std::vector<double> ones_p(static_cast<std::size_t>(target.rows()),
                                         1.0 / target.rows());
        Tensor l_rec = mse(rec, target, ones_p);

        Tensor selected = gather_rows(params_.get("codebook"), idx);
        Tensor l_codebook = mse(selected, stop_gradient(h), ones_n);
        Tensor l_commit = mse(h, stop_gradient(selected), ones_n);

        Tensor total = add(l_rec, add(l_codebook, scale(l_commit, cfg_.commit_beta)));
        backward(scale(total, inv_b));

        report.rec += l_rec.item() * inv_b;
        report.codebook += l_codebook.item() * inv_b;
        report.commit += l_commit.item() * inv_b;
        report.total += total.item() * inv_b;
    }
    if (!std::isfinite(report.total)) throw NumericFailure("vqtok train_step: NaN loss");
    opt.step(params_, schedule, step);
    return report;
}

int VqTokenizer::reinit_dead_codes(const std::vector<std::vector<double>>& batch_h,
                                   uint64_t threshold, Rng& rng) {
    const int d = cfg_.dim, n = cfg_.latent_tokens;
    std::vector<const double*> donors;
    for (const auto& h : batch_h) {
        require(static_cast<int>(h.size()) == n * d, "reinit_dead_codes: bad h shape");
        for (int i = 0; i < n; ++i) donors.push_back(h.data() + static_cast<std::size_t>(i) * d);
    }
    auto& cb = params_.get("codebook").value();
    int count = 0;
    for (int j = 0; j < cfg_.codebook_size; ++j) {
        if (usage_[static_cast<std::size_t>(j)] >= threshold) continue;
        if (donors.empty()) break;
        const double* donor = donors[rng.below(donors.size())];
        std::copy(donor, donor + d, cb.begin() + static_cast<std::size_t>(j) * d);
        ++count;
    }
    reset_usage();
    return count;
}

const std::vector<double>& VqTokenizer::codebook_values() const {
    return params_.get("codebook").value();
}

void VqTokenizer::reset_usage() {
    usage_.assign(static_cast<std::size_t>(cfg_.codebook_size), 0);
}

void VqTokenizer::save(const std::string& path) const {
    std::map<std::string, std::string> meta{
        {"kind", "vqtok"},
        {"page_h", fmt_int(cfg_.page_h)},
        {"page_w", fmt_int(cfg_.page_w)},
        {"patch", fmt_int(cfg_.patch)},
        {"dim", fmt_int(cfg_.dim)},
        {"latent_tokens", fmt_int(cfg_.latent_tokens)},
        {"codebook_size", fmt_int(cfg_.codebook_size)},
        {"enc_blocks", fmt_int(cfg_.enc_blocks)},
        {"dec_blocks", fmt_int(cfg_.dec_blocks)},
        {"heads", fmt_int(cfg_.heads)},
    };
    save_checkpoint(path, params_, meta);
}

VqTokenizer VqTokenizer::load(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.meta["kind"] != "vqtok")
        throw ConfigError("vqtok load: checkpoint kind is '" + ck.meta["kind"] + "'");
    VqConfig cfg;
    cfg.page_h = std::stoi(ck.meta.at("page_h"));
    cfg.page_w = std::stoi(ck.meta.at("page_w"));
    cfg.patch = std::stoi(ck.meta.at("patch"));
    cfg.dim = std::stoi(ck.meta.at("dim"));
    cfg.latent_tokens = std::stoi(ck.meta.at("latent_tokens"));
    cfg.codebook_size = std::stoi(ck.meta.at("codebook_size"));
    cfg.enc_blocks = std::stoi(ck.meta.at("enc_blocks"));
    cfg.dec_blocks = std::stoi(ck.meta.at("dec_blocks"));
    cfg.heads = std::stoi(ck.meta.at("heads"));
    VqTokenizer tok(cfg);
    tok.params_ = std::move(ck.params);
    tok.bind_or_init(nullptr);
    return tok;
}

}  // namespace imgcot::vqtok
