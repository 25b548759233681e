// Pipeline driver: render -> train-tokenizer -> encode-corpus ->
// build-dataset -> train-reasoner -> infer, plus the confidence-filter
// stages (compute-gamma, filter-corpus) and a run report.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "imgcot/pipeline.hpp"

using namespace imgcot;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    uint64_t seed_override = 0;
    bool seed_set = false;
};

config::PipelineConfig load_config(const CommonArgs& args) {
    config::PipelineConfig cfg;
    if (!args.config_path.empty()) {
        cfg = config::PipelineConfig::from_file(args.config_path);
    } else {
        config::KeyValues kv;
        config::apply_env_overrides(kv);
        cfg = config::PipelineConfig::from_map(kv);
    }
    if (args.seed_set) cfg.seed = args.seed_override;
    cfg.require_valid();
    return cfg;
}

void ensure_parent(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::unique_ptr<reasoner::ReasonerNet> load_reasoner(const std::string& path) {
    if (!fs::exists(path))
        throw ConfigError("missing reasoner checkpoint: " + path +
                          " (run train-reasoner first)");
    return std::make_unique<reasoner::ReasonerNet>(reasoner::ReasonerNet::load(path));
}

std::unique_ptr<vqtok::VqTokenizer> load_tokenizer(const std::string& path) {
    if (!fs::exists(path))
        throw ConfigError("missing tokenizer checkpoint: " + path +
                          " (run train-tokenizer first)");
    return std::make_unique<vqtok::VqTokenizer>(vqtok::VqTokenizer::load(path));
}

std::unique_ptr<lmclient::Scorer> make_scorer(
    const config::PipelineConfig& cfg, const std::string& reasoner_path,
    std::unique_ptr<reasoner::ReasonerNet>& net_holder) {
    if (cfg.backend == "remote") {
        lmclient::EndpointConfig ep;
        ep.base_url = cfg.base_url;
        ep.model = cfg.model;
        ep.auth_token = cfg.auth_token;
        ep.timeout_ms = cfg.timeout_ms;
        ep.jitter_seed = cfg.seed;
        return std::make_unique<lmclient::RemoteScorer>(
            ep, std::make_shared<lmclient::HttpTransport>(cfg.timeout_ms));
    }
    net_holder = load_reasoner(reasoner_path);
    return std::make_unique<lmclient::LocalScorer>(*net_holder);
}

void fill_latents(dataset::Record& r, vqtok::VqTokenizer& tok,
                  const render::RenderConfig& rc) {
    const auto pages = pipeline::render_cot(r.cot, rc);
    const auto code = tok.quantize(tok.encode(pages.front()));
    r.latent_indices = code.indices;
    r.latent_z = code.embeddings;
}

std::vector<reasoner::TrainingSample> samples_from_records(
    const std::vector<dataset::Record>& records, const reasoner::Vocab& vocab, int dim,
    const std::string& source) {
    std::vector<reasoner::TrainingSample> samples;
    for (const auto& r : records) {
        if (r.latent_z.empty())
            throw ConfigError("record '" + r.id + "' in " + source +
                              " has no latent code; run encode-corpus first");
        vqtok::LatentCode code;
        code.indices = r.latent_indices;
        code.embeddings = r.latent_z;
        const std::string output =
            r.filtered_cot.empty() ? r.answer : r.filtered_cot + "; " + r.answer;
        samples.push_back(
            reasoner::assemble_sample(r.question, code, output, vocab, dim));
    }
    return samples;
}

std::vector<dataset::Record> records_from_tasks(
    const std::vector<synthetic::ChainTask>& tasks, const std::string& prefix) {
    std::vector<dataset::Record> records;
    records.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        dataset::Record r;
        r.id = prefix + std::to_string(i);
        r.question = tasks[i].question;
        r.answer = tasks[i].answer;
        r.cot = tasks[i].cot;
        records.push_back(std::move(r));
    }
    return records;
}

int run(int argc, char** argv) {
    CLI::App app{"visual chain-of-thought compression pipeline"};
    app.require_subcommand(1);
    CommonArgs common;
    app.add_option("--config", common.config_path, "configuration file (key = value)");
    app.add_option("--seed", common.seed_override, "override run.seed")
        ->each([&](const std::string&) { common.seed_set = true; });

    // render
    auto* c_render = app.add_subcommand("render", "render a trace to pages");
    std::string render_text, render_out = "page";
    c_render->add_option("--text", render_text, "trace text")->required();
    c_render->add_option("--out-prefix", render_out, "output path prefix");

    // train-tokenizer
    auto* c_ttok = app.add_subcommand("train-tokenizer", "fit the visual tokenizer");
    std::string ttok_out = "tokenizer.ickp";
    c_ttok->add_option("--out", ttok_out, "checkpoint path");

    // encode-corpus
    auto* c_enc = app.add_subcommand("encode-corpus", "attach latent codes to records");
    std::string enc_tok = "tokenizer.ickp", enc_in, enc_out;
    c_enc->add_option("--tokenizer", enc_tok, "tokenizer checkpoint");
    c_enc->add_option("--dataset", enc_in, "input records (jsonl)")->required();
    c_enc->add_option("--out", enc_out, "output records (jsonl)")->required();

    // build-dataset
    auto* c_build = app.add_subcommand("build-dataset",
                                       "generate tasks and encode them in one pass");
    std::string build_tok = "tokenizer.ickp", build_out = "train.jsonl";
    std::string build_split = "train";
    c_build->add_option("--tokenizer", build_tok, "tokenizer checkpoint");
    c_build->add_option("--out", build_out, "output records (jsonl)");
    c_build->add_option("--split", build_split, "train or eval")
        ->check(CLI::IsMember({"train", "eval"}));

    // train-reasoner
    auto* c_train = app.add_subcommand("train-reasoner", "train on encoded records");
    std::string train_in = "train.jsonl", train_out = "reasoner.ickp";
    c_train->add_option("--dataset", train_in, "encoded records (jsonl)");
    c_train->add_option("--out", train_out, "checkpoint path");

    // infer
    auto* c_infer = app.add_subcommand("infer", "answer a question");
    std::string infer_net = "reasoner.ickp", infer_tok, infer_q;
    int infer_max = 32;
    c_infer->add_option("--reasoner", infer_net, "reasoner checkpoint");
    c_infer->add_option("--tokenizer", infer_tok,
                        "tokenizer checkpoint (enables codebook snapping)");
    c_infer->add_option("--question", infer_q, "question text")->required();
    c_infer->add_option("--max-output", infer_max, "text budget");

    // compute-gamma
    auto* c_gamma = app.add_subcommand("compute-gamma", "corpus confidence threshold");
    std::string gamma_in = "train.jsonl", gamma_out = "gamma.json";
    std::string gamma_net = "reasoner.ickp";
    c_gamma->add_option("--dataset", gamma_in, "records whose traces form the corpus");
    c_gamma->add_option("--reasoner", gamma_net, "local scorer checkpoint");
    c_gamma->add_option("--out", gamma_out, "output json");

    // filter-corpus
    auto* c_filter = app.add_subcommand("filter-corpus", "drop high-confidence steps");
    std::string filt_in = "train.jsonl", filt_out = "filtered.jsonl";
    std::string filt_net = "reasoner.ickp", filt_gamma_file;
    c_filter->add_option("--dataset", filt_in, "input records (jsonl)");
    c_filter->add_option("--out", filt_out, "output records (jsonl)");
    c_filter->add_option("--reasoner", filt_net, "local scorer checkpoint");
    c_filter->add_option("--gamma-file", filt_gamma_file,
                         "threshold json from compute-gamma");

    // report
    auto* c_report = app.add_subcommand("report", "token accounting and loss curves");
    std::string report_dir = ".";
    c_report->add_option("--run-dir", report_dir, "directory with run artifacts");

    CLI11_PARSE(app, argc, argv);
    const config::PipelineConfig cfg = load_config(common);
    const render::RenderConfig rc = pipeline::cot_render_config(cfg);
    const reasoner::Vocab vocab = pipeline::task_vocab();

    if (*c_render) {
        const auto graph = render::segment(render_text, rc);
        const auto lay = render::layout(graph, rc);
        const auto pages = render::rasterize(lay, graph, rc);
        ensure_parent(render_out + "-0.pgm");
        std::vector<std::pair<std::string, std::string>> artifacts;
        for (std::size_t i = 0; i < pages.size(); ++i) {
            const std::string path = render_out + "-" + std::to_string(i) + ".pgm";
            render::write_page(pages[i], path);
            artifacts.emplace_back("page" + std::to_string(i), path);
        }
        render::write_layout_sidecar(lay, render_out + ".layout");
        artifacts.emplace_back("layout", render_out + ".layout");
        pipeline::write_manifest(render_out + ".manifest.json", cfg, artifacts);
        std::printf("pages=%zu scale=%d\n", pages.size(), lay.font_scale);
        return 0;
    }

    if (*c_ttok) {
        auto tasks = synthetic::generate(cfg.train_count, cfg.seed);
        auto pages = pipeline::collect_pages(tasks, rc, 64);
        vqtok::VqTokenizer tok(pipeline::tokenizer_config(cfg), cfg.seed);
        pipeline::TokenizerTrainOptions topt;
        topt.steps = cfg.tok_steps;
        topt.batch = cfg.tok_batch;
        topt.lr = cfg.tok_lr;
        topt.seed = cfg.seed;
        const auto report = pipeline::train_tokenizer(tok, pages, topt);
        ensure_parent(ttok_out);
        tok.save(ttok_out);
        json curve;
        curve["rec"] = report.rec;
        curve["reinitialized"] = report.reinitialized;
        dataset::atomic_write_text(ttok_out + ".curve.json", curve.dump(2) + "\n");
        pipeline::write_manifest(ttok_out + ".manifest.json", cfg,
                                 {{"tokenizer", ttok_out}});
        std::printf("steps=%d rec_first=%.6f rec_last=%.6f\n", cfg.tok_steps,
                    report.rec.front(), report.rec.back());
        return 0;
    }

    if (*c_enc) {
        auto tok = load_tokenizer(enc_tok);
        auto records = dataset::read_jsonl(enc_in);
        for (auto& r : records) fill_latents(r, *tok, rc);
        ensure_parent(enc_out);
        dataset::write_jsonl(enc_out, records);
        pipeline::write_manifest(enc_out + ".manifest.json", cfg, {{"records", enc_out}});
        std::printf("encoded=%zu\n", records.size());
        return 0;
    }

    if (*c_build) {
        auto tok = load_tokenizer(build_tok);
        const bool train_split = build_split == "train";
        auto tasks = synthetic::generate(
            train_split ? cfg.train_count : cfg.eval_count,
            train_split ? cfg.seed : cfg.seed + 1);
        auto records = records_from_tasks(tasks, build_split + "-");
        for (auto& r : records) fill_latents(r, *tok, rc);
        ensure_parent(build_out);
        dataset::write_jsonl(build_out, records);
        pipeline::write_manifest(build_out + ".manifest.json", cfg,
                                 {{"records", build_out}});
        std::printf("records=%zu split=%s\n", records.size(), build_split.c_str());
        return 0;
    }

    if (*c_train) {
        if (!fs::exists(train_in))
            throw ConfigError("missing dataset: " + train_in +
                              " (run build-dataset first)");
        auto records = dataset::read_jsonl(train_in);
        auto samples = samples_from_records(records, vocab, cfg.dim, train_in);
        reasoner::ReasonerNet net(pipeline::reasoner_config(cfg), vocab, cfg.seed);
        reasoner::TrainOptions ropt;
        ropt.epochs = cfg.epochs;
        ropt.batch_size = cfg.batch_size;
        ropt.base_lr = cfg.lr;
        ropt.seed = cfg.seed;
        const auto curve = reasoner::train(net, samples, ropt);
        ensure_parent(train_out);
        net.save(train_out);
        json doc;
        doc["epoch_loss"] = curve;
        dataset::atomic_write_text(train_out + ".curve.json", doc.dump(2) + "\n");
        pipeline::write_manifest(train_out + ".manifest.json", cfg,
                                 {{"reasoner", train_out}});
        std::printf("epochs=%d loss_first=%.6f loss_last=%.6f\n", cfg.epochs,
                    curve.front(), curve.back());
        return 0;
    }

    if (*c_infer) {
        auto net = load_reasoner(infer_net);
        std::unique_ptr<vqtok::VqTokenizer> tok;
        if (!infer_tok.empty()) tok = load_tokenizer(infer_tok);
        const auto res =
            net->infer(net->vocab().encode_text(infer_q), infer_max, tok.get());
        std::printf("answer: %s%s\n", res.text.c_str(),
                    res.truncated ? " [truncated]" : "");
        std::printf("tokens: latent=%zu text=%zu\n", res.latents.size(),
                    res.output_ids.size());
        return 0;
    }

    if (*c_gamma) {
        auto records = dataset::read_jsonl(gamma_in);
        std::vector<std::string> corpus;
        for (const auto& r : records)
            if (!r.cot.empty()) corpus.push_back(r.cot);
        std::unique_ptr<reasoner::ReasonerNet> net;
        auto scorer = make_scorer(cfg, gamma_net, net);
        const auto mode = cfg.aggregation == "mean" ? filter::Aggregation::kMean
                                                    : filter::Aggregation::kLiteralSum;
        const auto est =
            filter::estimate_gamma(corpus, cfg.delimiter, *scorer, gamma_in, mode);
        json doc;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.8f", est.gamma);
        doc["gamma"] = est.gamma;
        doc["gamma_text"] = buf;
        doc["corpus_id"] = est.corpus_id;
        doc["token_count"] = est.token_count;
        doc["aggregation"] = est.mode == filter::Aggregation::kMean ? "mean" : "sum";
        ensure_parent(gamma_out);
        dataset::atomic_write_text(gamma_out, doc.dump(2) + "\n");
        std::printf("gamma=%s tokens=%zu\n", buf, est.token_count);
        return 0;
    }

    if (*c_filter) {
        double gamma = cfg.gamma;
        if (!filt_gamma_file.empty()) {
            const auto doc = json::parse(dataset::read_text(filt_gamma_file));
            gamma = doc.at("gamma").get<double>();
        } else if (cfg.gamma_source == "estimate") {
            throw ConfigError(
                "filter-corpus needs --gamma-file or filter.gamma_source = fixed");
        }
        auto records = dataset::read_jsonl(filt_in);
        std::unique_ptr<reasoner::ReasonerNet> net;
        auto scorer = make_scorer(cfg, filt_net, net);
        std::size_t original = 0, filtered = 0;
        for (auto& r : records) {
            const auto t = filter::filter_trace(r.cot, gamma, cfg.delimiter, *scorer);
            r.filtered_cot = t.text;
            original += r.cot.size();
            filtered += t.text.size();
        }
        ensure_parent(filt_out);
        dataset::write_jsonl(filt_out, records);
        pipeline::write_manifest(filt_out + ".manifest.json", cfg,
                                 {{"records", filt_out}});
        std::printf("records=%zu chars_before=%zu chars_after=%zu\n", records.size(),
                    original, filtered);
        return 0;
    }

    if (*c_report) {
        std::printf("run report: %s\n", report_dir.c_str());
        for (const char* curve_name :
             {"tokenizer.ickp.curve.json", "reasoner.ickp.curve.json"}) {
            const fs::path p = fs::path(report_dir) / curve_name;
            if (!fs::exists(p)) continue;
            const auto doc = json::parse(dataset::read_text(p.string()));
            for (const auto& [key, values] : doc.items()) {
                if (!values.is_array() || values.empty()) continue;
                std::printf("  %s %s: first=%.6f last=%.6f points=%zu\n", curve_name,
                            key.c_str(), values.front().get<double>(),
                            values.back().get<double>(), values.size());
            }
        }
        for (const char* ds : {"train.jsonl", "filtered.jsonl"}) {
            const fs::path p = fs::path(report_dir) / ds;
            if (!fs::exists(p)) continue;
            const auto records = dataset::read_jsonl(p.string());
            double cot_chars = 0, filt_chars = 0;
            std::size_t latents = 0, with_filter = 0;
            for (const auto& r : records) {
                cot_chars += static_cast<double>(r.cot.size());
                latents = std::max(latents, r.latent_z.size());
                if (!r.filtered_cot.empty()) {
                    filt_chars += static_cast<double>(r.filtered_cot.size());
                    ++with_filter;
                }
            }
            std::printf("  %s: records=%zu latent_tokens=%zu mean_trace_chars=%.1f\n",
                        ds, records.size(), latents,
                        cot_chars / static_cast<double>(records.size()));
            if (with_filter)
                std::printf("    filtered: records=%zu mean_chars=%.1f (%.0f%% of "
                            "original)\n",
                            with_filter, filt_chars / static_cast<double>(with_filter),
                            100.0 * filt_chars / cot_chars);
        }
        const fs::path sweep = fs::path(report_dir) / "sweep.json";
        if (fs::exists(sweep)) {
            const auto doc = json::parse(dataset::read_text(sweep.string()));
            std::printf("  latent-count sweep:\n");
            for (const auto& row : doc)
                std::printf("    n=%2d exact_match=%.3f\n", row.at("n").get<int>(),
                            row.at("exact_match").get<double>());
        }
        const fs::path gamma = fs::path(report_dir) / "gamma.json";
        if (fs::exists(gamma)) {
            const auto doc = json::parse(dataset::read_text(gamma.string()));
            std::printf("  gamma=%s over %zu tokens (%s)\n",
                        doc.at("gamma_text").get<std::string>().c_str(),
                        doc.at("token_count").get<std::size_t>(),
                        doc.at("aggregation").get<std::string>().c_str());
        }
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const NumericFailure& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 2;
    } catch (const ExternalServiceError& e) {
        std::fprintf(stderr, "external service error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
