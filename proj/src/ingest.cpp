#include "archsearch/ingest.hpp"

#include <chrono>

#include "archsearch/error.hpp"
#include "archsearch/text.hpp"

namespace archsearch::ingest {

using extraction::RegionExtraction;
using index::Field;

namespace {

std::string join_regions(const std::vector<RegionExtraction>& regions, RegionKind kind) {
    std::string out;
    for (const auto& r : regions) {
        if (r.kind != kind) continue;
        if (!out.empty()) out += "\n";
        out += r.text;
    }
    return out;
}

std::string first_line(std::string_view s, std::size_t max_chars = 96) {
    std::string line;
    for (char c : s) {
        if (c == '\n') {
            if (!trim(line).empty()) break;
            line.clear();
            continue;
        }
        line.push_back(c);
    }
    return truncate_code_points(trim(line), max_chars);
}

void set_field(index::DocEntry& e, Field f, std::string_view text) {
    e.fields[static_cast<std::size_t>(f)] = normalize_text(text);
}

}  // namespace

Ingestor::Ingestor(embedding::TextEncoder& encoder, embedding::ProjectionConfig projection,
                   const extraction::FieldParser& parser, extraction::DocumentClassifier* classifier,
                   IngestConfig config)
    : encoder_(encoder), projection_(std::move(projection)), parser_(parser), classifier_(classifier),
      config_(std::move(config)) {
    projection_.validate();
    require(encoder_.dim() == projection_.text_dim(), ErrorCode::InvalidInput,
            "encoder dimension does not match the text projection");
    require(projection_.region_dim() == embedding::kRegionFeatureDim, ErrorCode::InvalidInput,
            "region projection must accept the region feature vector");
    if (config_.router) config_.router->validate();
}

BuiltEntry Ingestor::build(const extraction::ExtractionRecord& record) const {
    BuiltEntry out;
    auto& e = out.entry;
    e.doc_id = record.file_id;
    if (record.kind) {
        e.kind = *record.kind;
    } else {
        require(config_.router.has_value(), ErrorCode::InvalidInput,
                "record " + record.file_id + " declares no kind and no router model is configured");
        out.routing = routing::score_logit(record.kind_features, *config_.router);
        e.kind = out.routing->label;
    }

    const auto& regions = record.regions;
    set_field(e, Field::FullText, record.full_text);
    set_field(e, Field::Parts, join_regions(regions, RegionKind::PartsList));
    set_field(e, Field::Revisions, join_regions(regions, RegionKind::RevisionsBlock));

    if (e.kind == Kind::Drawing) {
        auto meta = parser_.parse_drawing(regions);
        const auto data_block = join_regions(regions, RegionKind::DataBlock);
        set_field(e, Field::DrawingNumber, meta.drawing_number);
        set_field(e, Field::Title, data_block + "\n" + record.document.title);
        const auto headline = !record.document.title.empty() ? record.document.title : first_line(data_block);
        e.title = meta.drawing_number.empty() ? headline : meta.drawing_number + (headline.empty() ? "" : ": " + headline);
        if (e.title.empty()) e.title = record.file_id;
        e.dup_key = extraction::near_duplicate_key(meta, record.file_id);
        e.metadata = std::move(meta);
    } else {
        DocClass cls = DocClass::Other;
        bool pending = false;
        if (record.doc_class) {
            cls = *record.doc_class;
        } else if (classifier_ != nullptr) {
            out.classification = extraction::classify_document(record.full_text, *classifier_, config_.classify_limits);
            cls = out.classification->doc_class;
            pending = out.classification->pending;
        } else {
            pending = true;
        }
        auto meta = extraction::build_document_metadata(record, cls, parser_);
        meta.classification_pending = pending;
        set_field(e, Field::DrawingNumber, meta.doc_id.value_or(""));
        set_field(e, Field::Title, meta.title);
        std::string sections;
        for (const auto& s : meta.section_headings) sections += s + "\n";
        for (const auto& s : record.document.steps) sections += s + "\n";
        set_field(e, Field::Sections, sections);
        e.title = !meta.title.empty() ? meta.title : first_line(record.full_text);
        if (e.title.empty()) e.title = record.file_id;
        e.dup_key = extraction::near_duplicate_key(meta, record.file_id);
        e.metadata = std::move(meta);
    }

    e.date = record.date;
    e.quality = record.quality;
    e.thumbnail_ref = record.thumbnail_ref;

    const auto text = encoder_.encode(record.embedding_text);
    const auto region = embedding::region_features(regions);
    e.embedding = embedding::embed_document(text, region, projection_);
    return out;
}

IngestStats Ingestor::ingest_jsonl(std::istream& in, index::HybridIndex& idx) const {
    IngestStats stats;
    const auto t0 = std::chrono::steady_clock::now();
    std::string line;
    while (std::getline(in, line)) {
        ++stats.lines;
        if (trim(line).empty()) continue;
        try {
            const auto raw = nlohmann::json::parse(line);
            const auto record = extraction::validate_record(raw);
            auto built = build(record);
            const bool pending = std::holds_alternative<extraction::DocumentMetadata>(built.entry.metadata) &&
                                 std::get<extraction::DocumentMetadata>(built.entry.metadata).classification_pending;
            idx.add_document(std::move(built.entry));
            ++stats.ingested;
            if (pending) ++stats.pending_classification;
        } catch (const nlohmann::json::exception& ex) {
            ++stats.failed;
            stats.errors.push_back("line " + std::to_string(stats.lines) + ": invalid JSON: " + ex.what());
        } catch (const Error& ex) {
            ++stats.failed;
            if (ex.code() == ErrorCode::Transport) ++stats.service_failures;
            stats.errors.push_back("line " + std::to_string(stats.lines) + ": " + to_string(ex.code()) + ": " +
                                   ex.what());
        }
    }
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
}

}  // namespace archsearch::ingest
