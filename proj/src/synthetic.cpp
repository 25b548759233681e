#include "imgcot/synthetic.hpp"

#include <algorithm>

#include "imgcot/errors.hpp"

namespace imgcot::synthetic {

const std::string& task_charset() {
    static const std::string cs = "abcdefghijklmnopqrstuvwxyz>;? .";
    return cs;
}

ChainTask make_task(Rng& rng, const ChainOptions& opts) {
    require(opts.min_hops >= 1 && opts.max_hops >= opts.min_hops,
            "chain task: bad hop range");
    require(opts.min_distractor >= 1 && opts.max_distractor >= opts.min_distractor,
            "chain task: bad distractor range");

    const int hops = opts.min_hops +
                     static_cast<int>(rng.below(
                         static_cast<uint64_t>(opts.max_hops - opts.min_hops) + 1));
    const int distractor =
        opts.min_distractor +
        static_cast<int>(rng.below(
            static_cast<uint64_t>(opts.max_distractor - opts.min_distractor) + 1));
    const int needed = (hops + 1) + (distractor + 1);
    require(needed <= 26, "chain task: entity pool exhausted");

    // Distinct single-letter entities; the two chains never share one, so
    // the walk from the start entity is unambiguous.
    std::string pool = "abcdefghijklmnopqrstuvwxyz";
    for (int i = 25; i > 0; --i)
        std::swap(pool[static_cast<std::size_t>(i)],
                  pool[rng.below(static_cast<uint64_t>(i) + 1)]);

    ChainTask t;
    std::vector<std::string> facts;
    std::string cot;
    for (int i = 0; i < hops; ++i) {
        const std::string edge = {pool[static_cast<std::size_t>(i)], '>',
                                  pool[static_cast<std::size_t>(i + 1)]};
        facts.push_back(edge);
        if (i) cot += "; ";
        cot += edge;
    }
    for (int i = 0; i < distractor; ++i) {
        const std::size_t base = static_cast<std::size_t>(hops) + 1;
        facts.push_back({pool[base + static_cast<std::size_t>(i)], '>',
                         pool[base + static_cast<std::size_t>(i + 1)]});
    }
    for (std::size_t i = facts.size() - 1; i > 0; --i)
        std::swap(facts[i], facts[rng.below(static_cast<uint64_t>(i) + 1)]);

    std::string q;
    for (const auto& f : facts) {
        if (!q.empty()) q += ";";
        q += f;
    }
    q += "?";
    q.push_back(pool[0]);

    t.question = std::move(q);
    t.answer = std::string(1, pool[static_cast<std::size_t>(hops)]);
    t.cot = std::move(cot);
    return t;
}

std::vector<ChainTask> generate(int count, uint64_t seed, const ChainOptions& opts) {
    require(count >= 1, "chain task: count must be positive");
    Rng rng(seed, /*stream=*/505);
    std::vector<ChainTask> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(make_task(rng, opts));
    return out;
}

}  // namespace imgcot::synthetic
