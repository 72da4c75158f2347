#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "archsearch/embedding.hpp"
#include "archsearch/extraction.hpp"
#include "archsearch/index.hpp"
#include "archsearch/routing.hpp"

namespace archsearch::ingest {

struct IngestConfig {
    /// Needed for records that do not declare their kind.
    std::optional<routing::RouterModel> router;
    extraction::ClassifyLimits classify_limits;
};

struct BuiltEntry {
    index::DocEntry entry;
    std::optional<routing::RoutingDecision> routing;  // absent when the record declared its kind
    std::optional<extraction::ClassificationOutcome> classification;
};

struct IngestStats {
    std::size_t lines = 0;
    std::size_t ingested = 0;
    std::size_t failed = 0;
    std::size_t service_failures = 0;  // subset of failed: an external service was unreachable
    std::size_t pending_classification = 0;
    std::vector<std::string> errors;  // "line N: message"
    double seconds = 0.0;

    double ms_per_doc() const { return ingested == 0 ? 0.0 : 1000.0 * seconds / static_cast<double>(ingested); }
};

/// Record -> route -> parse regions -> classify (documents) -> embed -> DocEntry.
class Ingestor {
public:
    Ingestor(embedding::TextEncoder& encoder, embedding::ProjectionConfig projection,
             const extraction::FieldParser& parser = extraction::default_field_parser(),
             extraction::DocumentClassifier* classifier = nullptr, IngestConfig config = {});

    BuiltEntry build(const extraction::ExtractionRecord& record) const;

    /// Streams ExtractionRecord JSON lines into the index. Bad lines are
    /// counted and reported, never fatal.
    IngestStats ingest_jsonl(std::istream& in, index::HybridIndex& idx) const;

    const embedding::ProjectionConfig& projection() const { return projection_; }

private:
    embedding::TextEncoder& encoder_;
    embedding::ProjectionConfig projection_;
    const extraction::FieldParser& parser_;
    extraction::DocumentClassifier* classifier_;
    IngestConfig config_;
};

}  // namespace archsearch::ingest
