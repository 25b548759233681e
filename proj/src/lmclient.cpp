#include "imgcot/lmclient.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace imgcot::lmclient {

using nlohmann::json;

ScoreResponse LocalScorer::score(const std::string& text) {
    require(!text.empty(), "score: text must be non-empty");
    const auto& vocab = net_->vocab();
    std::string unknown;
    for (char c : text)
        if (vocab.charset.find(c) == std::string::npos &&
            unknown.find(c) == std::string::npos)
            unknown.push_back(c);
    require(unknown.empty(), "score: characters not covered by the vocabulary: \"" +
                                 unknown + "\"");

    ScoreResponse r;
    r.model = "local";
    r.logprobs = net_->text_logprobs(vocab.encode_text(text));
    r.tokens.reserve(text.size());
    for (char c : text) r.tokens.emplace_back(1, c);
    return r;
}

HttpResponse HttpTransport::post(const std::string& url, const std::string& body,
                                 const Headers& headers) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return {0, "bad url"};
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string host = url.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client cli(host);
    cli.set_connection_timeout(0, timeout_ms_ * 1000);
    cli.set_read_timeout(0, timeout_ms_ * 1000);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = cli.Post(path, h, body, "application/json");
    if (!res) return {0, ""};
    return {res->status, res->body};
}

HttpResponse FixtureTransport::post(const std::string&, const std::string& body,
                                    const Headers&) {
    bodies_.push_back(body);
    if (next_ >= queue_.size())
        throw ContractViolation("fixture transport: no recorded response left");
    return queue_[next_++];
}

RemoteScorer::RemoteScorer(EndpointConfig cfg, std::shared_ptr<Transport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)),
      jitter_(cfg_.jitter_seed, /*stream=*/404) {
    require(transport_ != nullptr, "remote scorer: transport required");
    require(cfg_.max_attempts >= 1, "remote scorer: need at least one attempt");
}

namespace {

std::string payload_fragment(const std::string& body) {
    return body.size() <= 160 ? body : body.substr(0, 160) + "...";
}

ScoreResponse parse_completion(const std::string& body, const std::string& text,
                               const std::string& fallback_model) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::exception& e) {
        throw ParseError("remote scorer: response is not valid JSON (" +
                         std::string(e.what()) + "): " + payload_fragment(body));
    }
    if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty())
        throw ParseError("remote scorer: response has no choices: " +
                         payload_fragment(body));
    const json& choice = doc["choices"][0];
    if (!choice.contains("logprobs") || !choice["logprobs"].is_object())
        throw ParseError("remote scorer: response is missing logprobs: " +
                         payload_fragment(body));
    const json& lp = choice["logprobs"];
    if (!lp.contains("tokens") || !lp.contains("token_logprobs"))
        throw ParseError("remote scorer: logprobs lack tokens/token_logprobs: " +
                         payload_fragment(body));

    ScoreResponse r;
    r.model = doc.value("model", fallback_model);
    for (const auto& t : lp["tokens"]) r.tokens.push_back(t.get<std::string>());
    for (const auto& v : lp["token_logprobs"])
        r.logprobs.push_back(v.is_null() ? 0.0 : v.get<double>());
    if (r.tokens.size() != r.logprobs.size())
        throw ParseError("remote scorer: token/logprob length mismatch: " +
                         payload_fragment(body));

    std::string joined;
    for (const auto& t : r.tokens) joined += t;
    if (joined != text)
        throw ParseError("remote scorer: tokens do not reassemble to the request "
                         "text; got \"" + payload_fragment(joined) + "\"");
    for (double x : r.logprobs)
        if (!std::isfinite(x) || x > 1e-9)
            throw ParseError("remote scorer: log-likelihood out of range: " +
                             std::to_string(x));
    return r;
}

}  // namespace

ScoreResponse RemoteScorer::score(const std::string& text) {
    require(!text.empty(), "score: text must be non-empty");
    const json body = {{"model", cfg_.model},
                       {"prompt", text},
                       {"echo", true},
                       {"logprobs", 1},
                       {"max_tokens", 0}};
    Headers headers{{"Content-Type", "application/json"}};
    if (!cfg_.auth_token.empty())
        headers.emplace_back("Authorization", "Bearer " + cfg_.auth_token);
    const std::string url = cfg_.base_url + cfg_.path;

    int last_status = 0;
    last_attempts_ = 0;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
        last_attempts_ = attempt;
        HttpResponse resp = transport_->post(url, body.dump(), headers);
        last_status = resp.status;
        if (resp.status >= 200 && resp.status < 300)
            return parse_completion(resp.body, text, cfg_.model);
        if (resp.status >= 400 && resp.status < 500)
            throw ConfigError("remote scorer: HTTP " + std::to_string(resp.status) +
                              " (not retryable): " + payload_fragment(resp.body));
        // 5xx or transport failure (status 0): retry with jittered backoff.
        if (attempt < cfg_.max_attempts && cfg_.backoff_base_ms > 0) {
            const int delay = cfg_.backoff_base_ms * (1 << (attempt - 1)) +
                              static_cast<int>(jitter_.below(
                                  static_cast<uint64_t>(cfg_.backoff_base_ms) + 1));
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
    }
    throw ExternalServiceError("remote scorer: gave up after " +
                               std::to_string(cfg_.max_attempts) +
                               " attempts; last status " + std::to_string(last_status));
}

}  // namespace imgcot::lmclient
