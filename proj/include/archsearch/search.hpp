#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archsearch/embedding.hpp"
#include "archsearch/fusion.hpp"
#include "archsearch/index.hpp"

namespace archsearch::search {

struct SearchParams {
    fusion::FusionParams fusion;
    fusion::RerankParams rerank;
    std::size_t sparse_pool = 100;
    std::size_t dense_pool = 100;
    index::DenseMode dense_mode = index::DenseMode::Exact;
    bool rerank_enabled = true;

    void validate() const;
};

/// Flat params-file form: {lambda, alpha, beta, gamma, sigma_floor,
/// recency_weight, quality_weight, sparse_pool, dense_pool, dense_mode, rerank}.
nlohmann::json to_json(const SearchParams& p);
/// Keys present in `j` override `base`; unknown keys are rejected.
SearchParams params_from_json(const nlohmann::json& j, SearchParams base = {});

/// Union of sparse and dense top pools with both raw scores filled in.
struct CandidatePool {
    fusion::QuerySpec query;
    std::vector<fusion::Candidate> candidates;  // doc_id order
    std::vector<index::DocEntry> docs;          // aligned with candidates
    double encode_ms = 0.0;
    double sparse_ms = 0.0;
    double dense_ms = 0.0;
};

struct StageTimings {
    double parse_ms = 0.0;
    double encode_ms = 0.0;
    double sparse_ms = 0.0;
    double dense_ms = 0.0;
    double fuse_ms = 0.0;
    double rerank_ms = 0.0;
    double total_ms = 0.0;
};

struct SearchHit {
    fusion::Candidate scores;
    index::DocEntry doc;
    std::string snippet;
};

struct SearchResponse {
    fusion::QuerySpec query;
    std::vector<SearchHit> results;
    std::size_t candidate_count = 0;
    StageTimings timings;
};

/// Timings are wall-clock and excluded when `with_timings` is false, which
/// makes the output byte-stable for identical inputs.
nlohmann::json to_json(const SearchResponse& r, bool with_timings = true);
std::string to_table(const SearchResponse& r);

/// Read-only over the index; safe to call concurrently when the encoder is.
class Searcher {
public:
    Searcher(const index::HybridIndex& index, embedding::TextEncoder& encoder, embedding::ProjectionConfig projection,
             fusion::SlotParser parser = fusion::SlotParser());

    fusion::QuerySpec parse(std::string_view text,
                            std::optional<std::vector<ItemType>> allowed_types = std::nullopt) const;

    CandidatePool gather(const fusion::QuerySpec& q, const SearchParams& params) const;

    /// Fuse, rerank and truncate a gathered pool.
    SearchResponse rank(const CandidatePool& pool, std::size_t k, const SearchParams& params) const;

    SearchResponse search(const fusion::QuerySpec& q, std::size_t k, const SearchParams& params) const;
    SearchResponse search(std::string_view text, std::size_t k, const SearchParams& params,
                          std::optional<std::vector<ItemType>> allowed_types = std::nullopt) const;

    const index::HybridIndex& index() const { return index_; }

private:
    const index::HybridIndex& index_;
    embedding::TextEncoder& encoder_;
    embedding::ProjectionConfig projection_;
    fusion::SlotParser parser_;
};

/// Ranked doc ids of a gathered pool under `params` (no truncation).
std::vector<std::string> ranking(const CandidatePool& pool, const SearchParams& params);

struct ValidationQuery {
    CandidatePool pool;
    std::map<std::string, int> grades;  // doc_id -> 0/1/2; unlisted docs are 0
};

struct TuneResult {
    double lambda = 0.5;
    double score = 0.0;
    std::vector<std::pair<double, double>> curve;  // (lambda, mean nDCG@k)
};

/// 0, 0.05, ..., 1.
std::vector<double> default_lambda_grid();

/// Grid value maximizing mean nDCG@k over the validation queries; ties go to the
/// larger lambda. Queries are scored in parallel and reduced in query order.
TuneResult tune_lambda(std::span<const ValidationQuery> validation, std::span<const double> grid,
                       const SearchParams& base, std::size_t k = 3);

}  // namespace archsearch::search
