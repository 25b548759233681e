#pragma once

#include <string>
#include <vector>

#include "imgcot/errors.hpp"

namespace imgcot::dataset {

// Line-delimited JSON records tying a task to its rendered page and latent
// code. Optional fields serialize only when present, so stages can augment
// records without rewriting the schema.

struct Record {
    std::string id;
    std::string question;
    std::string answer;
    std::string cot;
    std::string filtered_cot;                   // empty until the filter stage
    std::string page_ref;                       // path of the rendered page
    std::vector<int> latent_indices;            // codebook ids, empty until encoded
    std::vector<std::vector<double>> latent_z;  // quantized embeddings

    bool operator==(const Record&) const = default;
};

std::vector<Record> read_jsonl(const std::string& path);
// Writes to a temp file in the same directory and renames into place.
void write_jsonl(const std::string& path, const std::vector<Record>& records);

// Shared atomic-write helper for other artifacts (manifests, reports).
void atomic_write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

}  // namespace imgcot::dataset
