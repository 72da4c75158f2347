#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archsearch/extraction.hpp"
#include "archsearch/index.hpp"
#include "archsearch/types.hpp"

namespace archsearch::fusion {

enum class Polarity { Require, Exclude };

enum class ConstraintKind {
    Revision,   // value: rev token, or "*" for "any revision"
    Size,       // value: size code letter
    SheetCount, // value: total sheet count
    DateMin,    // value: ISO date, inclusive
    DateMax,    // value: ISO date, inclusive
    PartsList,  // value: "*"
};

std::string_view to_string(ConstraintKind k);
std::string_view to_string(Polarity p);

struct Constraint {
    ConstraintKind kind = ConstraintKind::Revision;
    std::string value;
    Polarity polarity = Polarity::Require;

    friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// Free-text query plus its slot template.
struct QuerySpec {
    std::string raw_text;
    std::string normalized_text;
    std::string rewritten_text;  // BM25 input
    std::optional<std::string> facility;
    std::optional<std::string> asset_part;
    std::vector<ItemType> allowed_types;  // empty = unrestricted; sorted, unique
    std::vector<Constraint> constraints;
};

nlohmann::json to_json(const QuerySpec& q);

/// Rule-based slot extraction.
class SlotParser {
public:
    explicit SlotParser(std::vector<std::string> facility_patterns = extraction::default_facility_patterns());

    /// `allowed_types` overrides type keywords found in the text when given.
    QuerySpec parse(std::string_view raw, std::optional<std::vector<ItemType>> allowed_types = std::nullopt) const;

private:
    extraction::FieldParser fields_;
};

/// Rebuilds normalized_text and rewritten_text from raw_text and the slots.
void finalize_query(QuerySpec& q);

struct FusionParams {
    double lambda = 0.5;
    double sigma_floor = 1e-6;
    void validate() const;
};

struct RerankParams {
    double alpha = 0.5;
    double beta = 0.5;
    double gamma = 1.0;
    /// Tie-key component weights: 0 drops the component from the tie key.
    double recency_weight = 1.0;
    double quality_weight = 1.0;
    void validate() const;
};

/// (s - mean) / max(sigma, sigma_floor), population sigma.
std::vector<double> znorm(std::span<const double> scores, double sigma_floor);

/// lambda * z_sparse + (1 - lambda) * z_dense.
std::vector<double> fuse(std::span<const double> z_sparse, std::span<const double> z_dense, double lambda);

struct Candidate {
    std::string doc_id;
    double s_sparse = 0.0;
    double s_dense = 0.0;
    double z_sparse = 0.0;
    double z_dense = 0.0;
    double s_lambda = 0.0;
    int match_region = 0;
    double consistency_rev = 0.0;
    int off_type = 0;
    double s_final = 0.0;
    double recency = -1.0;  // min-max over the candidate set; -1 when undated
    double quality = 0.0;
};

nlohmann::json to_json(const Candidate& c);

/// Fills z_sparse, z_dense and s_lambda over the whole candidate set.
void apply_fusion(std::span<Candidate> cands, const FusionParams& params);

// Region-aware signals for one document.
int match_region(const index::DocEntry& doc, const QuerySpec& q);
double consistency_rev(const index::DocEntry& doc, const QuerySpec& q);
int off_type(const index::DocEntry& doc, const QuerySpec& q);

/// Fills recency (min-max over the set) and quality from the documents.
void fill_tie_keys(std::span<Candidate> cands, std::span<const index::DocEntry* const> docs);

/// s_final = s_lambda + alpha*match + beta*cons - gamma*off, then sorts.
void score_and_sort(std::vector<Candidate>& cands, const RerankParams& params);

/// Ordering used everywhere: s_final desc, recency desc, quality desc, doc_id asc.
bool ranks_before(const Candidate& a, const Candidate& b, const RerankParams& params);

/// Computes region signals and tie keys from `docs` (aligned with `cands`),
/// then scores and sorts. The docs array is permuted alongside.
void rerank(std::vector<Candidate>& cands, std::vector<const index::DocEntry*>& docs, const QuerySpec& q,
            const RerankParams& params);

}  // namespace archsearch::fusion
