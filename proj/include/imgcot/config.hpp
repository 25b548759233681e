#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "imgcot/errors.hpp"

namespace imgcot::config {

// INI-style configuration with environment overrides. Keys are flattened to
// "section.key"; IMGCOT_SECTION_KEY environment variables win over the file.
// Validation never throws on the first problem: it returns every violation
// at once so a bad config can be fixed in one pass.

using KeyValues = std::map<std::string, std::string>;

// Parses "[section]" headers and "key = value" lines; '#' starts a comment
// (';' stays literal so it can be a delimiter value). Malformed lines raise
// ParseError with the line number.
KeyValues parse_ini(const std::string& text);
KeyValues load_ini_file(const std::string& path);

// Overlays IMGCOT_<SECTION>_<KEY> variables (first underscore-separated
// token after the prefix is the section, the rest is the key, lowercased).
void apply_env_overrides(KeyValues& kv, const std::string& prefix = "IMGCOT_");

// 64-bit FNV-1a, used for config hashes and artifact digests.
uint64_t fnv1a(std::string_view bytes);

struct PipelineConfig {
    // [render]
    int page_size = 64;
    int font_scale = 2;
    std::string delimiter = ";";

    // [tokenizer]
    int patch = 8;
    int dim = 64;
    int latent_tokens = 8;
    int codebook_size = 256;
    int enc_blocks = 2;
    int dec_blocks = 2;
    int tok_heads = 4;
    int tok_steps = 500;
    int tok_batch = 24;
    double tok_lr = 1e-3;

    // [reasoner]
    int blocks = 4;
    int heads = 4;
    int context = 512;
    int epochs = 10;
    int batch_size = 4;
    double lr = 1e-3;

    // [filter]
    std::string gamma_source = "estimate";  // estimate | fixed
    double gamma = 0.0;
    std::string aggregation = "mean";       // mean | sum

    // [scorer]
    std::string backend = "local";          // local | remote
    std::string base_url;
    std::string model;
    std::string auth_token;
    int timeout_ms = 10000;

    // [run]
    uint64_t seed = 0;
    int train_count = 2000;
    int eval_count = 500;
    std::string out_dir = "runs/default";

    // Parse problems are deferred into issues_ so validate() can report them
    // together with semantic violations.
    static PipelineConfig from_map(const KeyValues& kv);
    static PipelineConfig from_file(const std::string& path, bool env_overrides = true);

    // Empty when the config is usable; otherwise one message per violated field.
    std::vector<std::string> validate() const;
    // Throws ConfigError listing everything validate() found.
    void require_valid() const;

    // Canonical "key = value" listing of the effective settings; its FNV-1a
    // hash identifies the run.
    std::string canonical() const;
    uint64_t hash() const;

private:
    std::vector<std::string> issues_;
};

}  // namespace imgcot::config
