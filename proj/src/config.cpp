#include "imgcot/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

extern char** environ;

namespace imgcot::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

KeyValues parse_ini(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find_first_of("#");
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError("config line " + std::to_string(lineno) +
                                 ": unterminated section header");
            section = lower(trim(line.substr(1, line.size() - 2)));
            if (section.empty())
                throw ParseError("config line " + std::to_string(lineno) +
                                 ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(lineno) +
                             ": expected key = value");
        const std::string key = lower(trim(line.substr(0, eq)));
        if (key.empty())
            throw ParseError("config line " + std::to_string(lineno) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        kv[full] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues load_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_ini(buf.str());
}

void apply_env_overrides(KeyValues& kv, const std::string& prefix) {
    for (char** e = environ; e && *e; ++e) {
        const std::string entry(*e);
        if (entry.compare(0, prefix.size(), prefix) != 0) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        std::string name = entry.substr(prefix.size(), eq - prefix.size());
        const std::string value = entry.substr(eq + 1);
        const auto us = name.find('_');
        if (us == std::string::npos || us == 0 || us + 1 >= name.size()) continue;
        kv[lower(name.substr(0, us)) + "." + lower(name.substr(us + 1))] = value;
    }
}

uint64_t fnv1a(std::string_view bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

PipelineConfig PipelineConfig::from_map(const KeyValues& kv) {
    PipelineConfig c;
    KeyValues seen = kv;
    auto take = [&](const char* key) -> const std::string* {
        auto it = seen.find(key);
        if (it == seen.end()) return nullptr;
        return &it->second;
    };
    auto geti = [&](const char* key, int& out) {
        if (const std::string* v = take(key)) {
            try {
                std::size_t used = 0;
                out = std::stoi(*v, &used);
                if (used != v->size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                c.issues_.push_back(std::string(key) + ": not an integer: " + *v);
            }
            seen.erase(key);
        }
    };
    auto getu = [&](const char* key, uint64_t& out) {
        if (const std::string* v = take(key)) {
            try {
                std::size_t used = 0;
                out = std::stoull(*v, &used);
                if (used != v->size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                c.issues_.push_back(std::string(key) + ": not an integer: " + *v);
            }
            seen.erase(key);
        }
    };
    auto getd = [&](const char* key, double& out) {
        if (const std::string* v = take(key)) {
            try {
                std::size_t used = 0;
                out = std::stod(*v, &used);
                if (used != v->size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                c.issues_.push_back(std::string(key) + ": not a number: " + *v);
            }
            seen.erase(key);
        }
    };
    auto gets = [&](const char* key, std::string& out) {
        if (const std::string* v = take(key)) {
            out = *v;
            seen.erase(key);
        }
    };

    geti("render.page_size", c.page_size);
    geti("render.font_scale", c.font_scale);
    gets("render.delimiter", c.delimiter);

    geti("tokenizer.patch", c.patch);
    geti("tokenizer.dim", c.dim);
    geti("tokenizer.latent_tokens", c.latent_tokens);
    geti("tokenizer.codebook_size", c.codebook_size);
    geti("tokenizer.enc_blocks", c.enc_blocks);
    geti("tokenizer.dec_blocks", c.dec_blocks);
    geti("tokenizer.heads", c.tok_heads);
    geti("tokenizer.steps", c.tok_steps);
    geti("tokenizer.batch", c.tok_batch);
    getd("tokenizer.lr", c.tok_lr);

    geti("reasoner.blocks", c.blocks);
    geti("reasoner.heads", c.heads);
    geti("reasoner.context", c.context);
    geti("reasoner.epochs", c.epochs);
    geti("reasoner.batch_size", c.batch_size);
    getd("reasoner.lr", c.lr);

    gets("filter.gamma_source", c.gamma_source);
    getd("filter.gamma", c.gamma);
    gets("filter.aggregation", c.aggregation);

    gets("scorer.backend", c.backend);
    gets("scorer.base_url", c.base_url);
    gets("scorer.model", c.model);
    gets("scorer.auth_token", c.auth_token);
    geti("scorer.timeout_ms", c.timeout_ms);

    getu("run.seed", c.seed);
    geti("run.train_count", c.train_count);
    geti("run.eval_count", c.eval_count);
    gets("run.out_dir", c.out_dir);

    for (const auto& [key, value] : seen)
        c.issues_.push_back(key + ": unknown setting");
    return c;
}

PipelineConfig PipelineConfig::from_file(const std::string& path, bool env_overrides) {
    KeyValues kv = load_ini_file(path);
    if (env_overrides) apply_env_overrides(kv);
    return from_map(kv);
}

std::vector<std::string> PipelineConfig::validate() const {
    std::vector<std::string> out = issues_;
    auto bad = [&](const std::string& msg) { out.push_back(msg); };

    if (page_size <= 0) bad("render.page_size: must be positive");
    if (font_scale < 1 || font_scale > 8) bad("render.font_scale: must be in 1..8");
    if (delimiter.empty()) bad("render.delimiter: must be non-empty");

    if (patch <= 0) bad("tokenizer.patch: must be positive");
    else if (page_size % patch != 0)
        bad("tokenizer.patch: must divide render.page_size");
    if (dim <= 0) bad("tokenizer.dim: must be positive");
    if (latent_tokens < 1) bad("tokenizer.latent_tokens: must be >= 1");
    if (codebook_size < 1) bad("tokenizer.codebook_size: must be >= 1");
    if (tok_heads < 1 || (dim > 0 && dim % tok_heads != 0))
        bad("tokenizer.heads: must divide tokenizer.dim");
    if (tok_steps < 1) bad("tokenizer.steps: must be >= 1");
    if (tok_batch < 1) bad("tokenizer.batch: must be >= 1");
    if (tok_lr <= 0) bad("tokenizer.lr: must be positive");

    if (blocks < 1) bad("reasoner.blocks: must be >= 1");
    if (heads < 1 || (dim > 0 && dim % heads != 0))
        bad("reasoner.heads: must divide the shared dim");
    if (context < 1) bad("reasoner.context: must be >= 1");
    if (epochs < 1) bad("reasoner.epochs: must be >= 1");
    if (batch_size < 1) bad("reasoner.batch_size: must be >= 1");
    if (lr <= 0) bad("reasoner.lr: must be positive");

    if (gamma_source != "estimate" && gamma_source != "fixed")
        bad("filter.gamma_source: must be 'estimate' or 'fixed'");
    if (aggregation != "mean" && aggregation != "sum")
        bad("filter.aggregation: must be 'mean' or 'sum'");

    if (backend != "local" && backend != "remote")
        bad("scorer.backend: must be 'local' or 'remote'");
    if (backend == "remote" && base_url.empty())
        bad("scorer.base_url: required for the remote backend");
    if (timeout_ms < 1) bad("scorer.timeout_ms: must be positive");

    if (train_count < 1) bad("run.train_count: must be >= 1");
    if (eval_count < 1) bad("run.eval_count: must be >= 1");
    if (out_dir.empty()) bad("run.out_dir: must be non-empty");
    return out;
}

void PipelineConfig::require_valid() const {
    const auto problems = validate();
    if (problems.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
}

std::string PipelineConfig::canonical() const {
    std::ostringstream out;
    out << "filter.aggregation = " << aggregation << "\n"
        << "filter.gamma = " << gamma << "\n"
        << "filter.gamma_source = " << gamma_source << "\n"
        << "reasoner.batch_size = " << batch_size << "\n"
        << "reasoner.blocks = " << blocks << "\n"
        << "reasoner.context = " << context << "\n"
        << "reasoner.epochs = " << epochs << "\n"
        << "reasoner.heads = " << heads << "\n"
        << "reasoner.lr = " << lr << "\n"
        << "render.delimiter = " << delimiter << "\n"
        << "render.font_scale = " << font_scale << "\n"
        << "render.page_size = " << page_size << "\n"
        << "run.eval_count = " << eval_count << "\n"
        << "run.out_dir = " << out_dir << "\n"
        << "run.seed = " << seed << "\n"
        << "run.train_count = " << train_count << "\n"
        << "scorer.backend = " << backend << "\n"
        << "scorer.base_url = " << base_url << "\n"
        << "scorer.model = " << model << "\n"
        << "scorer.timeout_ms = " << timeout_ms << "\n"
        << "tokenizer.batch = " << tok_batch << "\n"
        << "tokenizer.codebook_size = " << codebook_size << "\n"
        << "tokenizer.dec_blocks = " << dec_blocks << "\n"
        << "tokenizer.dim = " << dim << "\n"
        << "tokenizer.enc_blocks = " << enc_blocks << "\n"
        << "tokenizer.heads = " << tok_heads << "\n"
        << "tokenizer.latent_tokens = " << latent_tokens << "\n"
        << "tokenizer.lr = " << tok_lr << "\n"
        << "tokenizer.patch = " << patch << "\n"
        << "tokenizer.steps = " << tok_steps << "\n";
    return out.str();
}

uint64_t PipelineConfig::hash() const { return fnv1a(canonical()); }

}  // namespace imgcot::config
