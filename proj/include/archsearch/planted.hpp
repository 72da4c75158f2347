#pragma once

#include <string>
#include <vector>

#include "archsearch/engine.hpp"
#include "archsearch/search.hpp"
#include "archsearch/synth.hpp"

namespace archsearch::synth {

/// Builds an engine over the planted records. Returns ingestion stats too.
struct PlantedIndex {
    std::unique_ptr<Engine> engine;
    ingest::IngestStats stats;
};

PlantedIndex build_planted_index(const Corpus& corpus, const EngineConfig& config = {});

struct PlantedQueryResult {
    std::string query_id;
    bool solvable = false;
    std::vector<std::string> ranked_on;   // top-k, reranking on
    std::vector<std::string> ranked_off;  // top-k, reranking off
    double ndcg_on = 0.0;
    double ndcg_off = 0.0;
    double success_on = 0.0;
    double success_off = 0.0;
};

struct PlantedRun {
    search::TuneResult tune;  // on the validation queries, reranking on
    std::vector<PlantedQueryResult> queries;  // test queries only
    double mean_ndcg_on = 0.0;
    double mean_ndcg_off = 0.0;
    double solvable_success_on = 0.0;  // mean Succ@k over solvable queries
    double p_value = 1.0;              // paired sign-flip test, on vs off
};

/// Tunes lambda on the validation queries, then ranks every test query with
/// reranking on and off under the tuned lambda.
PlantedRun run_planted(const Engine& engine, const Corpus& corpus, const search::SearchParams& base,
                       std::size_t k = 3, const stats::PermutationConfig& perm = {});

}  // namespace archsearch::synth
