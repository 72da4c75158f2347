#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "archsearch/embedding.hpp"
#include "archsearch/extraction.hpp"
#include "archsearch/types.hpp"

namespace archsearch::index {

enum class Field : std::uint8_t { FullText, DrawingNumber, Parts, Revisions, Title, Sections };
inline constexpr std::size_t kFieldCount = 6;

std::string_view to_string(Field f);
std::optional<Field> parse_field(std::string_view s);

using FieldWeights = std::array<double, kFieldCount>;

/// drawing_number x3, title x2, everything else x1.
inline constexpr FieldWeights kDefaultFieldWeights = {1.0, 3.0, 1.0, 1.0, 2.0, 1.0};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    FieldWeights field_weights = kDefaultFieldWeights;
};

struct DocEntry {
    std::string doc_id;
    Kind kind = Kind::Document;
    std::array<std::string, kFieldCount> fields;  // normalized text per field
    extraction::Metadata metadata;
    embedding::DocEmbedding embedding;
    std::optional<Date> date;
    double quality = 0.0;
    std::string dup_key;
    std::optional<std::string> thumbnail_ref;
    std::string title;  // display title

    ItemType item_type() const;
    const std::string& field(Field f) const { return fields[static_cast<std::size_t>(f)]; }
};

/// Embedding vectors are not part of this JSON form; shards store them in binary.
nlohmann::json to_json(const DocEntry& e, bool with_embedding = false);
DocEntry doc_entry_from_json(const nlohmann::json& j);

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;
};

/// Descending score, doc_id ascending on ties.
void sort_ranked(std::vector<ScoredDoc>& docs);

struct Posting {
    std::uint32_t doc = 0;  // shard-local id
    std::uint8_t field = 0;
    std::uint32_t tf = 0;
};

/// One hash partition: inverted lists over shard-local ids plus a row-major
/// embedding block.
struct Shard {
    std::vector<DocEntry> docs;
    std::unordered_map<std::string, std::uint32_t> by_id;
    std::unordered_map<std::string, std::vector<Posting>> postings;  // sorted by doc
    std::unordered_map<std::string, std::uint32_t> df;
    std::vector<std::array<std::uint32_t, kFieldCount>> lengths;
    std::array<std::uint64_t, kFieldCount> total_lengths{};
    std::vector<double> embeddings;

    std::size_t size() const { return docs.size(); }
};

enum class DenseMode { Exact, Approximate };

struct AnnConfig {
    std::size_t lists = 0;   // 0 -> round(sqrt(N))
    std::size_t probes = 0;  // 0 -> max(1, lists / 8)
    int iterations = 8;
    std::uint64_t seed = 7;
};

struct IndexStats {
    std::size_t documents = 0;
    std::size_t terms = 0;
    std::size_t postings = 0;
    std::vector<std::size_t> shard_sizes;
    double average_length = 0.0;
};

/// Sharded BM25 + dense store. Readers and the single writer are serialized by
/// an internal reader-writer lock; cross-shard searches fan out and merge.
class HybridIndex {
public:
    HybridIndex(std::size_t shard_count, std::size_t dim, Bm25Params params = {});
    HybridIndex(const HybridIndex&) = delete;
    HybridIndex& operator=(const HybridIndex&) = delete;

    static std::size_t shard_of(std::string_view doc_id, std::size_t shard_count);

    /// Throws Conflict on a duplicate doc_id, InvalidInput on a dimension mismatch
    /// or a non-unit embedding.
    void add_document(DocEntry entry);

    std::size_t size() const;
    std::size_t shard_count() const { return shards_.size(); }
    std::size_t dim() const { return dim_; }
    const Bm25Params& bm25_params() const { return params_; }

    std::optional<DocEntry> find(std::string_view doc_id) const;
    bool contains(std::string_view doc_id) const;

    /// Sum over terms of idf * tfw (k1+1) / (tfw + k1 (1 - b + b dl/avgdl)), with
    /// field-weighted tf and length. Throws NotFound for an unknown doc.
    double bm25_score(std::span<const std::string> terms, std::string_view doc_id) const;

    /// Documents with positive BM25 score, best first.
    std::vector<ScoredDoc> sparse_topk(std::span<const std::string> terms, std::size_t k) const;

    /// Cosine ranking; Exact is brute force over every stored vector.
    std::vector<ScoredDoc> dense_topk(std::span<const double> query, std::size_t k,
                                      DenseMode mode = DenseMode::Exact) const;

    double dense_score(std::span<const double> query, std::string_view doc_id) const;

    std::size_t document_frequency(const std::string& term) const;
    double idf(const std::string& term) const;
    double average_length() const;

    /// Builds the approximate (inverted-file) structure over current contents.
    void build_ann(const AnnConfig& config = {});
    bool has_ann() const;
    void set_ann_probes(std::size_t probes);
    std::size_t ann_probes() const;
    std::size_t ann_lists() const;

    /// Mean recall@k of Approximate vs Exact, using stored embeddings as queries.
    double ann_self_test(std::size_t k = 10, std::size_t sample = 200) const;

    /// Raises probes until the self-test reaches `target` recall@10.
    double calibrate_ann(double target = 0.95, std::size_t sample = 200);

    IndexStats stats() const;

    /// Snapshot access for persistence and tests. Hold no lock across writes.
    const Shard& shard(std::size_t i) const { return shards_.at(i); }
    void replace_shard(std::size_t i, Shard shard);

private:
    struct AnnState {
        std::vector<std::vector<double>> centroids;
        std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> lists;  // (shard, local)
        std::size_t probes = 1;
    };

    double avgdl_locked() const;
    double idf_locked(const std::string& term) const;
    double term_score(double idf, double tfw, double dl, double avgdl) const;
    double doc_length(const Shard& s, std::uint32_t local) const;
    std::vector<ScoredDoc> dense_exact_locked(std::span<const double> q, std::size_t k) const;
    std::vector<ScoredDoc> dense_ann_locked(std::span<const double> q, std::size_t k) const;

    std::size_t dim_;
    Bm25Params params_;
    std::vector<Shard> shards_;
    std::unique_ptr<AnnState> ann_;
    mutable std::shared_mutex mutex_;
};

/// Tokenized field contents for one document (tokenize() of each field).
std::array<std::vector<std::string>, kFieldCount> tokenize_fields(const DocEntry& e);

}  // namespace archsearch::index
