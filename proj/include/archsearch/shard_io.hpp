#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archsearch/index.hpp"

// On-disk layout: one manifest.json plus one little-endian binary file per
// shard. See docs/shard_format.md.
namespace archsearch::index {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr std::uint32_t kShardFormatVersion = 1;
inline constexpr const char* kAssignmentRule = "fnv1a64-mod";

struct ShardFileInfo {
    std::size_t index = 0;
    std::string path;  // relative to the manifest directory
    std::size_t doc_count = 0;
    std::uint64_t bytes = 0;
};

struct ShardManifest {
    int schema_version = kManifestSchemaVersion;
    int tokenizer_version = 0;
    std::size_t shard_count = 0;
    std::string assignment_rule = kAssignmentRule;
    std::size_t embedding_dim = 0;
    Bm25Params bm25;
    std::vector<ShardFileInfo> shards;
};

nlohmann::json to_json(const ShardManifest& m);
/// Throws CorruptIndex on missing fields or unsupported versions / rules.
ShardManifest manifest_from_json(const nlohmann::json& j);

/// Writes manifest.json and shard-NNNN.bin under `dir` (created if needed).
/// Files are written to a temporary name and renamed into place.
ShardManifest save_shards(const HybridIndex& index, const std::filesystem::path& dir);

struct LoadOptions {
    /// When false (default) any damaged shard aborts the load. When true damaged
    /// shards are skipped and listed in LoadResult::failed.
    bool allow_partial = false;
};

struct ShardFailure {
    std::size_t index = 0;
    std::string reason;
};

struct LoadResult {
    std::unique_ptr<HybridIndex> index;
    ShardManifest manifest;
    std::vector<ShardFailure> failed;
};

LoadResult load_shards(const std::filesystem::path& dir, const LoadOptions& options = {});

/// Reads and verifies one shard file against the manifest. Throws CorruptIndex.
Shard read_shard_file(const std::filesystem::path& file, const ShardManifest& manifest,
                      std::size_t shard_index);

}  // namespace archsearch::index
