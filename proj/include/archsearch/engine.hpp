#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archsearch/embedding.hpp"
#include "archsearch/extraction.hpp"
#include "archsearch/index.hpp"
#include "archsearch/ingest.hpp"
#include "archsearch/routing.hpp"
#include "archsearch/search.hpp"
#include "archsearch/shard_io.hpp"

namespace archsearch {

/// Everything needed to rebuild the encoder, projections and parsers that an
/// index was built with. Stored as engine.json next to the shard manifest.
struct EngineConfig {
    std::size_t shard_count = 4;
    std::size_t text_dim = 256;
    std::uint64_t encoder_seed = 17;
    std::uint64_t projection_seed = 23;
    double region_scale = 0.05;
    std::string encoder_endpoint;     // empty: deterministic stub encoder
    std::string classifier_endpoint;  // empty: documents without doc_class stay pending
    int service_timeout_ms = 10000;
    std::vector<std::string> facility_patterns;  // empty: defaults
    index::Bm25Params bm25;
    std::optional<routing::RouterModel> router;
    extraction::ClassifyLimits classify_limits;

    void validate() const;
};

nlohmann::json to_json(const EngineConfig& c);
/// Unknown keys are rejected.
EngineConfig engine_config_from_json(const nlohmann::json& j);
EngineConfig load_engine_config(const std::filesystem::path& path);

inline constexpr const char* kEngineFile = "engine.json";

class Engine {
public:
    /// Empty index.
    explicit Engine(EngineConfig config);

    /// engine.json plus shards from `dir`. Throws CorruptIndex / NotFound.
    static std::unique_ptr<Engine> open(const std::filesystem::path& dir, const index::LoadOptions& options = {});

    /// Writes engine.json and the shards.
    void save(const std::filesystem::path& dir) const;

    const EngineConfig& config() const { return config_; }
    index::HybridIndex& index() { return *index_; }
    const index::HybridIndex& index() const { return *index_; }
    const std::vector<index::ShardFailure>& load_failures() const { return failures_; }

    ingest::Ingestor ingestor() const;
    search::Searcher searcher() const;
    fusion::SlotParser slot_parser() const;
    embedding::TextEncoder& encoder() const { return *encoder_; }
    const embedding::ProjectionConfig& projection() const { return projection_; }

private:
    Engine(EngineConfig config, std::unique_ptr<index::HybridIndex> index);
    void init_components();

    EngineConfig config_;
    std::unique_ptr<embedding::TextEncoder> encoder_;
    std::unique_ptr<extraction::DocumentClassifier> classifier_;
    std::unique_ptr<extraction::FieldParser> parser_;
    embedding::ProjectionConfig projection_;
    std::unique_ptr<index::HybridIndex> index_;
    std::vector<index::ShardFailure> failures_;
};

}  // namespace archsearch
