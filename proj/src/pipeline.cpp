#include "imgcot/pipeline.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

namespace imgcot::pipeline {

reasoner::Vocab task_vocab() {
    return reasoner::Vocab::build(synthetic::task_charset());
}

render::RenderConfig cot_render_config(const config::PipelineConfig& cfg) {
    render::RenderConfig rc;
    rc.page_h = cfg.page_size;
    rc.page_w = cfg.page_size;
    rc.default_scale = cfg.font_scale;
    // The whole trace is rendered as one wrapped box: traces contain no
    // newlines, so the newline delimiter never splits. On pages this small a
    // per-step box layout pages out for longer traces, and only the first
    // page is encoded to latents - the tail of the chain would be lost.
    rc.delimiters = {"\n"};
    // Tight margins: the pages are small compared to the 512px default.
    rc.margin = 2;
    rc.box_padding = 1;
    rc.box_gap = 3;
    return rc;
}

vqtok::VqConfig tokenizer_config(const config::PipelineConfig& cfg) {
    vqtok::VqConfig vc;
    vc.page_h = cfg.page_size;
    vc.page_w = cfg.page_size;
    vc.patch = cfg.patch;
    vc.dim = cfg.dim;
    vc.latent_tokens = cfg.latent_tokens;
    vc.codebook_size = cfg.codebook_size;
    vc.enc_blocks = cfg.enc_blocks;
    vc.dec_blocks = cfg.dec_blocks;
    vc.heads = cfg.tok_heads;
    return vc;
}

reasoner::ReasonerConfig reasoner_config(const config::PipelineConfig& cfg) {
    reasoner::ReasonerConfig rc;
    rc.dim = cfg.dim;
    rc.heads = cfg.heads;
    rc.blocks = cfg.blocks;
    rc.context = cfg.context;
    rc.latent_tokens = cfg.latent_tokens;
    return rc;
}

std::vector<render::RenderedPage> render_cot(const std::string& cot,
                                             const render::RenderConfig& rc) {
    const render::SegmentGraph graph = render::segment(cot, rc);
    return render::rasterize(render::layout(graph, rc), graph, rc);
}

std::vector<render::RenderedPage> collect_pages(
    const std::vector<synthetic::ChainTask>& tasks, const render::RenderConfig& rc,
    int max_pages) {
    std::vector<render::RenderedPage> pages;
    for (const auto& task : tasks) {
        for (auto& page : render_cot(task.cot, rc)) {
            pages.push_back(std::move(page));
            if (static_cast<int>(pages.size()) >= max_pages) return pages;
        }
    }
    return pages;
}

TokenizerTrainReport train_tokenizer(vqtok::VqTokenizer& tok,
                                     const std::vector<render::RenderedPage>& pages,
                                     const TokenizerTrainOptions& opts) {
    require(!pages.empty(), "train_tokenizer: no pages");
    require(opts.steps >= 1 && opts.batch >= 1, "train_tokenizer: bad steps/batch");

    Schedule sched;
    sched.base_lr = opts.lr;
    sched.total_steps = opts.steps;
    AdamW opt;
    Rng rng(opts.seed, /*stream=*/606);
    const int batch_size = std::min<int>(opts.batch, static_cast<int>(pages.size()));

    TokenizerTrainReport report;
    tok.reset_usage();
    for (int step = 1; step <= opts.steps; ++step) {
        std::vector<render::RenderedPage> batch;
        batch.reserve(static_cast<std::size_t>(batch_size));
        for (int b = 0; b < batch_size; ++b)
            batch.push_back(pages[rng.below(pages.size())]);
        report.rec.push_back(tok.train_step(batch, opt, sched, step).rec);

        if (opts.reinit_interval > 0 && step % opts.reinit_interval == 0) {
            std::vector<std::vector<double>> donors;
            donors.reserve(batch.size());
            for (const auto& page : batch) donors.push_back(tok.encode(page));
            report.reinitialized +=
                tok.reinit_dead_codes(donors, opts.dead_threshold, rng);
        }
    }
    return report;
}

std::vector<reasoner::TrainingSample> build_samples(
    const std::vector<synthetic::ChainTask>& tasks, vqtok::VqTokenizer& tok,
    const render::RenderConfig& rc, const reasoner::Vocab& vocab) {
    std::vector<reasoner::TrainingSample> samples;
    samples.reserve(tasks.size());
    for (const auto& task : tasks) {
        const auto pages = render_cot(task.cot, rc);
        vqtok::LatentCode code = tok.quantize(tok.encode(pages.front()));
        samples.push_back(reasoner::assemble_sample(task.question, code, task.answer,
                                                    vocab, tok.config().dim));
    }
    return samples;
}

EvalReport evaluate(const reasoner::ReasonerNet& net,
                    const std::vector<synthetic::ChainTask>& tasks,
                    const reasoner::Vocab& vocab, const vqtok::VqTokenizer* requantize,
                    int max_output) {
    require(!tasks.empty(), "evaluate: no tasks");
    EvalReport rep;
    rep.latent_per_inference = net.config().latent_tokens;
    int hits = 0;
    double text_tokens = 0.0;
    for (const auto& task : tasks) {
        const auto res =
            net.infer(vocab.encode_text(task.question), max_output, requantize);
        require(static_cast<int>(res.latents.size()) == rep.latent_per_inference,
                "evaluate: latent count drifted");
        if (!res.truncated && res.text == task.answer) ++hits;
        if (res.truncated) ++rep.truncated;
        text_tokens += static_cast<double>(res.output_ids.size());
    }
    rep.exact_match = static_cast<double>(hits) / static_cast<double>(tasks.size());
    rep.mean_text_tokens = text_tokens / static_cast<double>(tasks.size());
    return rep;
}

EndToEndResult run_end_to_end(const config::PipelineConfig& cfg) {
    cfg.require_valid();
    const reasoner::Vocab vocab = task_vocab();
    const render::RenderConfig rc = cot_render_config(cfg);

    auto train_tasks = synthetic::generate(cfg.train_count, cfg.seed);
    auto eval_tasks = synthetic::generate(cfg.eval_count, cfg.seed + 1);

    vqtok::VqTokenizer tok(tokenizer_config(cfg), cfg.seed);
    TokenizerTrainOptions topt;
    topt.steps = cfg.tok_steps;
    topt.batch = cfg.tok_batch;
    topt.lr = cfg.tok_lr;
    topt.seed = cfg.seed;
    EndToEndResult result;
    result.tokenizer =
        train_tokenizer(tok, collect_pages(train_tasks, rc, 64), topt);

    auto samples = build_samples(train_tasks, tok, rc, vocab);
    reasoner::ReasonerNet net(reasoner_config(cfg), vocab, cfg.seed);
    reasoner::TrainOptions ropt;
    ropt.epochs = cfg.epochs;
    ropt.batch_size = cfg.batch_size;
    ropt.base_lr = cfg.lr;
    ropt.seed = cfg.seed;
    result.reasoner_curve = reasoner::train(net, samples, ropt);

    result.eval = evaluate(net, eval_tasks, vocab, &tok, /*max_output=*/8);
    return result;
}

void write_manifest(const std::string& path, const config::PipelineConfig& cfg,
                    const std::vector<std::pair<std::string, std::string>>& artifacts) {
    nlohmann::json doc;
    std::ostringstream hash;
    hash << std::hex << cfg.hash();
    doc["config_hash"] = hash.str();
    doc["seed"] = cfg.seed;
    doc["artifacts"] = nlohmann::json::array();
    for (const auto& [name, file] : artifacts) {
        std::ostringstream digest;
        digest << std::hex << config::fnv1a(dataset::read_text(file));
        doc["artifacts"].push_back(
            {{"name", name}, {"path", file}, {"fnv1a", digest.str()}});
    }
    dataset::atomic_write_text(path, doc.dump(2) + "\n");
}

}  // namespace imgcot::pipeline
