#pragma once

#include <string>
#include <vector>

#include "imgcot/rng.hpp"

namespace imgcot::synthetic {

// Bundled "chain-lookup" task: the question lists shuffled entity-relation
// facts plus one or more distractor chains, then asks for the entity reached
// by following the main chain from its start. The chain-of-thought walks the
// main chain hop by hop.
//
//   question: "c>d;a>b;x>y;b>c?a"   (facts, '?', start entity)
//   answer:   "d"
//   cot:      "a>b; b>c; c>d"

struct ChainTask {
    std::string question;
    std::string answer;
    std::string cot;

    bool operator==(const ChainTask&) const = default;
};

struct ChainOptions {
    int min_hops = 3;
    int max_hops = 5;
    int min_distractor = 2;  // edges in the distractor chain
    int max_distractor = 4;
};

ChainTask make_task(Rng& rng, const ChainOptions& opts = {});
std::vector<ChainTask> generate(int count, uint64_t seed, const ChainOptions& opts = {});

// Every character that can appear in questions, answers, or traces; the
// reasoner vocabulary must cover it.
const std::string& task_charset();

}  // namespace imgcot::synthetic
