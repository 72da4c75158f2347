#pragma once

#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "archsearch/routing.hpp"
#include "archsearch/types.hpp"

namespace archsearch::extraction {

inline constexpr int kSchemaVersion = 1;

struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
};

struct RegionExtraction {
    RegionKind kind = RegionKind::DataBlock;
    std::string text;
    double confidence = 1.0;
    std::optional<BBox> bbox;
};

/// Optional document-route fields supplied by the upstream text pipeline.
struct DocumentFields {
    std::optional<std::string> doc_id;
    std::string title;
    std::vector<std::string> section_headings;
    std::vector<std::string> steps;
};

struct ExtractionRecord {
    std::string file_id;
    routing::RoutingFeatures kind_features;
    std::vector<RegionExtraction> regions;
    std::string full_text;
    std::optional<DocClass> doc_class;
    std::optional<Date> date;
    double quality = 0.0;
    std::string embedding_text;
    /// Kind declared by the producer (e.g. converted ingestion output). When
    /// absent the router decides.
    std::optional<Kind> kind;
    DocumentFields document;
    std::optional<std::string> thumbnail_ref;
};

/// Validates a raw record and fills defaults. Unknown fields are ignored.
/// Throws SchemaError naming the offending field.
ExtractionRecord validate_record(const nlohmann::json& raw);

/// Canonical serialization; validate_record(record_to_json(r)) reproduces r.
nlohmann::json record_to_json(const ExtractionRecord& record);

/// Converts the full-page ingestion agent output ({"doc_type", "text",
/// "drawing_fields", "policy_fields", "procedure_fields"}) into a raw record.
nlohmann::json convert_ingestion_output(const std::string& file_id, const nlohmann::json& output);

struct PartEntry {
    std::string part_id;
    std::string description;  // normalized text
    int quantity = 1;

    friend bool operator==(const PartEntry&, const PartEntry&) = default;
};

struct DrawingMetadata {
    std::string drawing_number;
    std::optional<std::string> revision;
    std::optional<std::string> facility_tag;
    std::optional<std::pair<int, int>> sheet;  // (index, total)
    std::vector<PartEntry> parts;
    std::optional<char> size_code;
    std::vector<std::string> revision_history;  // rev tokens in document order
    bool incomplete = false;                    // no drawing number recoverable
};

struct DocumentMetadata {
    DocClass doc_class = DocClass::Other;
    std::optional<std::string> doc_id;
    std::string title;
    std::vector<std::string> section_headings;
    std::vector<std::string> steps;  // only for procedures
    std::vector<std::string> facility_tags;
    bool classification_pending = false;
};

using Metadata = std::variant<DrawingMetadata, DocumentMetadata>;

/// {"type": "drawing" | "document", ...fields}.
nlohmann::json metadata_to_json(const Metadata& meta);
Metadata metadata_from_json(const nlohmann::json& j);

/// Default facility-tag grammar; deployments override via FieldParser.
std::vector<std::string> default_facility_patterns();

/// Region-text parser. Holds compiled regexes, so construct once and reuse.
/// Const member functions are safe to call concurrently.
class FieldParser {
public:
    explicit FieldParser(std::vector<std::string> facility_patterns = default_facility_patterns());

    DrawingMetadata parse_drawing(std::span<const RegionExtraction> regions) const;

    /// Facility tags in order of appearance (uppercased input expected or not).
    std::vector<std::string> find_facilities(std::string_view text) const;

    std::optional<std::string> find_drawing_number_in(std::string_view text) const;

private:
    std::vector<std::regex> facility_;
    std::regex sheet_;
    std::regex size_;
};

const FieldParser& default_field_parser();

inline DrawingMetadata parse_drawing_fields(std::span<const RegionExtraction> regions) {
    return default_field_parser().parse_drawing(regions);
}

/// Revision tokens listed in a revisions block, in document order.
std::vector<std::string> parse_revision_entries(std::string_view block);

/// Latest revision: integers by value, letters by rank (A=1 .. Z=26, AA=27),
/// later document position wins ties.
std::optional<std::string> latest_revision(std::span<const std::string> entries);

std::vector<PartEntry> parse_parts_list(std::string_view block);

/// Key shared by near-duplicates: drawings with the same drawing number, or
/// documents with the same doc id. Falls back to the file id.
std::string near_duplicate_key(const Metadata& meta, std::string_view file_id);

DocumentMetadata build_document_metadata(const ExtractionRecord& record, DocClass cls,
                                         const FieldParser& parser = default_field_parser());

/// External document-class client: {text} -> {class}.
class DocumentClassifier {
public:
    virtual ~DocumentClassifier() = default;
    /// Throws Error(Transport) when the service is unreachable or times out.
    virtual DocClass classify(const std::string& text) = 0;
};

struct ClassifyLimits {
    std::size_t max_pages = 5;
    std::size_t max_chars = 8000;
};

struct ClassificationOutcome {
    DocClass doc_class = DocClass::Other;
    bool pending = false;             // classification unavailable; retry later
    std::size_t dispatched_chars = 0; // code points actually sent
    std::optional<std::string> error; // set when the client failed
};

/// Payload actually dispatched: first `max_pages` form-feed separated pages,
/// then at most `max_chars` code points.
std::string classification_payload(std::string_view text, const ClassifyLimits& limits = {});

/// Never throws on client failure: the outcome is Other with the pending flag.
ClassificationOutcome classify_document(std::string_view text, DocumentClassifier& client,
                                        const ClassifyLimits& limits = {});

}  // namespace archsearch::extraction
