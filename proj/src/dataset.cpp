#include "imgcot/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace imgcot::dataset {

using nlohmann::json;

std::vector<Record> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("dataset: cannot open " + path);
    std::vector<Record> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            Record r;
            r.id = doc.at("id").get<std::string>();
            r.question = doc.at("question").get<std::string>();
            r.answer = doc.at("answer").get<std::string>();
            r.cot = doc.at("cot").get<std::string>();
            r.filtered_cot = doc.value("filtered_cot", std::string());
            r.page_ref = doc.value("page_ref", std::string());
            if (doc.contains("latent_indices"))
                r.latent_indices = doc["latent_indices"].get<std::vector<int>>();
            if (doc.contains("latent_z"))
                r.latent_z = doc["latent_z"].get<std::vector<std::vector<double>>>();
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_jsonl(const std::string& path, const std::vector<Record>& records) {
    std::ostringstream out;
    for (const Record& r : records) {
        json doc{{"id", r.id},
                 {"question", r.question},
                 {"answer", r.answer},
                 {"cot", r.cot}};
        if (!r.filtered_cot.empty()) doc["filtered_cot"] = r.filtered_cot;
        if (!r.page_ref.empty()) doc["page_ref"] = r.page_ref;
        if (!r.latent_indices.empty()) doc["latent_indices"] = r.latent_indices;
        if (!r.latent_z.empty()) doc["latent_z"] = r.latent_z;
        out << doc.dump() << "\n";
    }
    atomic_write_text(path, out.str());
}

void atomic_write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("dataset: cannot write " + tmp);
        out << content;
        if (!out) throw ConfigError("dataset: short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw ConfigError("dataset: cannot rename " + tmp + " to " + path);
    }
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("dataset: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace imgcot::dataset
