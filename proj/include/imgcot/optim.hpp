#pragma once

#include <map>
#include <string>
#include <vector>

#include "imgcot/tensor.hpp"

namespace imgcot {

// Named trainable parameters. Iteration order is insertion order; the
// optimizer and checkpoint writer both follow it, keeping runs reproducible.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;

    std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
    const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }

    void zero_grads();

private:
    std::vector<std::pair<std::string, Tensor>> items_;
    std::map<std::string, std::size_t> index_;
};

// Linear warmup over the first `warmup_fraction` of steps, then cosine decay
// repeated over `restarts + 1` equal cycles; the rate returns to base at each
// restart boundary.
struct Schedule {
    double base_lr = 1e-3;
    double warmup_fraction = 0.15;
    int total_steps = 1000;
    int restarts = 1;

    int warmup_steps() const;
    double rate(int step) const;  // 0 <= step <= total_steps
};

// Decoupled-weight-decay adaptive-moment optimizer (AdamW family) with bias
// correction. Moments are keyed by parameter name.
class AdamW {
public:
    struct Config {
        double beta1 = 0.9;
        double beta2 = 0.95;
        double weight_decay = 0.1;
        double eps = 1e-8;
    };

    AdamW();
    explicit AdamW(const Config& cfg) : cfg_(cfg) {}

    // One update over every parameter in the store using grads accumulated on
    // the tensors. Learning rate comes from the schedule at `step` (1-based).
    void step(ParamStore& params, const Schedule& schedule, int step);

    int step_count() const { return step_count_; }
    const Config& config() const { return cfg_; }

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };
    Config cfg_;
    std::map<std::string, Moments> state_;
    int step_count_ = 0;
};

}  // namespace imgcot
