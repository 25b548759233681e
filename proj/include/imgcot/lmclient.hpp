#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "imgcot/reasoner.hpp"

namespace imgcot::lmclient {

// Token-likelihood providers behind one interface: a local scorer backed by
// the in-repo reasoner and a remote scorer speaking a completion-with-logprobs
// HTTP protocol. Downstream confidence/threshold code never sees which one it
// is talking to.

struct ScoreResponse {
    std::vector<std::string> tokens;  // backend segmentation; reassembles to the text
    std::vector<double> logprobs;     // natural log, one per token
    std::string model;
};

class Scorer {
public:
    virtual ~Scorer() = default;
    // Scores non-empty text; every token of the response carries a finite
    // log-likelihood <= 1e-9.
    virtual ScoreResponse score(const std::string& text) = 0;
};

// Scores with the reasoner's text head; tokens are single characters.
class LocalScorer : public Scorer {
public:
    explicit LocalScorer(const reasoner::ReasonerNet& net) : net_(&net) {}
    ScoreResponse score(const std::string& text) override;

private:
    const reasoner::ReasonerNet* net_;
};

// --- remote backend ----------------------------------------------------------

struct HttpResponse {
    int status = 0;  // 0 means the request never completed (timeout/transport)
    std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const std::string& url, const std::string& body,
                              const Headers& headers) = 0;
};

// Live HTTP/1.1 transport. Tests never use it; they inject fixtures.
class HttpTransport : public Transport {
public:
    explicit HttpTransport(int timeout_ms) : timeout_ms_(timeout_ms) {}
    HttpResponse post(const std::string& url, const std::string& body,
                      const Headers& headers) override;

private:
    int timeout_ms_;
};

// Replays recorded responses in order and logs every request it sees.
class FixtureTransport : public Transport {
public:
    void push(HttpResponse r) { queue_.push_back(std::move(r)); }
    HttpResponse post(const std::string& url, const std::string& body,
                      const Headers& headers) override;

    const std::vector<std::string>& request_bodies() const { return bodies_; }

private:
    std::vector<HttpResponse> queue_;
    std::vector<std::string> bodies_;
    std::size_t next_ = 0;
};

struct EndpointConfig {
    std::string base_url;                 // e.g. http://localhost:8000
    std::string path = "/v1/completions";
    std::string model;
    std::string auth_token;               // sent as a bearer header when set
    int timeout_ms = 10000;
    int max_attempts = 3;
    int backoff_base_ms = 100;            // doubled per retry, plus jitter
    uint64_t jitter_seed = 0;
};

// Issues {model, prompt, echo, logprobs} requests and transcribes the
// response's per-token logprobs. HTTP 4xx raises ConfigError immediately;
// 5xx and transport failures are retried with seeded, jittered exponential
// backoff and raise ExternalServiceError once attempts are exhausted; a
// response without usable logprobs raises ParseError quoting the payload.
class RemoteScorer : public Scorer {
public:
    RemoteScorer(EndpointConfig cfg, std::shared_ptr<Transport> transport);
    ScoreResponse score(const std::string& text) override;

    int last_attempts() const { return last_attempts_; }

private:
    EndpointConfig cfg_;
    std::shared_ptr<Transport> transport_;
    Rng jitter_;
    int last_attempts_ = 0;
};

}  // namespace imgcot::lmclient
