#include "imgcot/optim.hpp"

#include <cmath>

namespace imgcot {

AdamW::AdamW() : cfg_(Config{}) {}

Tensor& ParamStore::add(const std::string& name, Tensor t) {
    require(!index_.count(name), "parameter already registered: " + name);
    index_[name] = items_.size();
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter: " + name);
    return items_[it->second].second;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter: " + name);
    return items_[it->second].second;
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

void ParamStore::zero_grads() {
    for (auto& [name, t] : items_) t.zero_grad();
}

int Schedule::warmup_steps() const {
    return static_cast<int>(std::ceil(warmup_fraction * total_steps));
}

double Schedule::rate(int step) const {
    require(total_steps > 0, "schedule: total_steps must be positive");
    require(step >= 0 && step <= total_steps, "schedule: step out of range");
    require(warmup_fraction >= 0.0 && warmup_fraction <= 1.0,
            "schedule: warmup fraction out of [0,1]");
    const int warm = warmup_steps();
    if (step < warm) {
        return base_lr * static_cast<double>(step) / static_cast<double>(warm);
    }
    const double remaining = static_cast<double>(total_steps - warm);
    if (remaining <= 0.0) return base_lr;
    const int cycles = restarts + 1;
    const double cycle_len = remaining / static_cast<double>(cycles);
    double pos = std::fmod(static_cast<double>(step - warm), cycle_len) / cycle_len;
    return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * pos));
}

void AdamW::step(ParamStore& params, const Schedule& schedule, int step) {
    require(step >= 1, "optimizer_step: step must be >= 1");
    const double lr = schedule.rate(std::min(step, schedule.total_steps));
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double bc1 = 1.0 - std::pow(b1, step);
    const double bc2 = 1.0 - std::pow(b2, step);

    for (auto& [name, p] : params.items()) {
        auto& v = p.value();
        const auto& g = p.grad();
        require(g.size() == v.size(), "optimizer_step: grad/param shape mismatch for " + name);
        auto& mom = state_[name];
        if (mom.m.empty()) {
            mom.m.assign(v.size(), 0.0);
            mom.v.assign(v.size(), 0.0);
        }
        require(mom.m.size() == v.size(),
                "optimizer_step: moment/param shape mismatch for " + name);
        for (std::size_t i = 0; i < v.size(); ++i) {
            mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * g[i];
            mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            v[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * v[i]);
        }
    }
    ++step_count_;
}

}  // namespace imgcot
