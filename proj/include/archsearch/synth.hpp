#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archsearch/eval.hpp"

namespace archsearch::synth {

// Planted corpus: each asset family contributes 13 drawings and 7 documents,
// spread over three facilities, with revision, type, size and parts-list
// distractors around a single target per query.

inline constexpr std::size_t kDocsPerFamily = 20;

struct SynthConfig {
    std::size_t families = 10;  // 200 docs
    std::uint64_t seed = 20240601;
};

struct PlantedQuery {
    std::string query_id;
    std::string text;
    eval::Bucket bucket = eval::Bucket::MultiModal;
    bool solvable = true;     // the parsed slots single out the grade-2 target
    bool validation = false;  // held out for lambda tuning
    std::vector<std::string> key_terms;
    std::map<std::string, int> grades;  // unlisted docs are 0
};

struct Corpus {
    std::vector<nlohmann::json> records;  // raw ExtractionRecord JSON
    std::vector<PlantedQuery> queries;
};

Corpus generate(const SynthConfig& config);

/// Labeled routing examples: {"file_id", "kind_features", "kind"}.
std::vector<nlohmann::json> router_samples(std::size_t n, std::uint64_t seed);

/// {query_id, text, bucket, solvable, validation, key_terms}.
nlohmann::json to_json(const PlantedQuery& q);
PlantedQuery planted_query_from_json(const nlohmann::json& j);

/// Judgment lines {query_id, doc_id, judge_id, grade} for the planted grades.
std::vector<nlohmann::json> qrels(const std::vector<PlantedQuery>& queries, const std::string& judge_id = "planted");

/// Writes records.jsonl, queries.jsonl, qrels.jsonl and router.jsonl into dir.
void write_corpus(const Corpus& corpus, const std::string& dir, std::size_t router_examples = 500);

}  // namespace archsearch::synth
