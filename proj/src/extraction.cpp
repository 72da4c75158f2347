#include "archsearch/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "archsearch/error.hpp"
#include "archsearch/text.hpp"

namespace archsearch::extraction {

using nlohmann::json;

namespace {

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
}

double number_at(const json& v, const std::string& path) {
    if (!v.is_number()) throw SchemaError(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw SchemaError(path, "must be finite");
    return d;
}

double unit_at(const json& v, const std::string& path) {
    const double d = number_at(v, path);
    if (d < 0.0 || d > 1.0) throw SchemaError(path, "value out of range [0,1]");
    return d;
}

std::string string_at(const json& v, const std::string& path) {
    if (!v.is_string()) throw SchemaError(path, "expected a string");
    return v.get<std::string>();
}

std::vector<std::string> string_list_at(const json& v, const std::string& path) {
    std::vector<std::string> out;
    if (v.is_string()) {
        // Upstream producers sometimes send newline-joined lists.
        std::string line;
        for (char c : v.get<std::string>() + "\n") {
            if (c == '\n') {
                auto t = trim(line);
                if (!t.empty()) out.push_back(std::move(t));
                line.clear();
            } else {
                line.push_back(c);
            }
        }
        return out;
    }
    if (!v.is_array()) throw SchemaError(path, "expected an array of strings");
    for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(string_at(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

routing::RoutingFeatures parse_features(const json& kf) {
    if (!kf.is_object()) throw SchemaError("kind_features", "expected an object");
    routing::RoutingFeatures f;
    const json* p = find(kf, "p_draw");
    if (!p) throw SchemaError("kind_features.p_draw", "missing required field");
    f.p_draw = unit_at(*p, "kind_features.p_draw");

    const json* cad = find(kf, "cad_prior");
    if (!cad) throw SchemaError("kind_features.cad_prior", "missing required field");
    if (cad->is_boolean()) {
        f.cad_prior = cad->get<bool>();
    } else {
        const double c = number_at(*cad, "kind_features.cad_prior");
        if (c != 0.0 && c != 1.0) throw SchemaError("kind_features.cad_prior", "must be 0 or 1");
        f.cad_prior = c == 1.0;
    }

    const json* b = find(kf, "b");
    const json* edge = find(kf, "edge");
    const json* lines = find(kf, "lines");
    const int present = (b != nullptr) + (edge != nullptr) + (lines != nullptr);
    if (present != 0 && present != 3) {
        throw SchemaError("kind_features", "b, edge and lines must be given together");
    }
    if (present == 3) {
        f.cues = routing::HeuristicCues{unit_at(*b, "kind_features.b"),
                                        unit_at(*edge, "kind_features.edge"),
                                        unit_at(*lines, "kind_features.lines")};
    }
    const json* h = find(kf, "h");
    if (h) {
        f.h = unit_at(*h, "kind_features.h");
        if (f.cues) {
            const double combined =
                routing::combine_heuristics(f.cues->border, f.cues->edge_density, f.cues->line_score);
            if (std::abs(combined - f.h) > 1e-9) {
                throw SchemaError("kind_features.h", "inconsistent with b/edge/lines");
            }
        }
    } else if (f.cues) {
        f.h = routing::combine_heuristics(f.cues->border, f.cues->edge_density, f.cues->line_score);
    } else {
        throw SchemaError("kind_features.h", "missing (give h or b/edge/lines)");
    }
    return f;
}

RegionExtraction parse_region(const json& r, const std::string& path) {
    if (!r.is_object()) throw SchemaError(path, "expected an object");
    RegionExtraction out;
    const json* kind = find(r, "kind");
    if (!kind) throw SchemaError(path + ".kind", "missing required field");
    auto k = parse_region_kind(string_at(*kind, path + ".kind"));
    if (!k) {
        throw SchemaError(path + ".kind", "unknown region kind '" + kind->get<std::string>() +
                                              "' (expected drawing_number, data_block, "
                                              "parts_list or revisions_block)");
    }
    out.kind = *k;
    if (const json* t = find(r, "text")) out.text = string_at(*t, path + ".text");
    if (const json* c = find(r, "confidence")) out.confidence = unit_at(*c, path + ".confidence");
    if (const json* bb = find(r, "bbox")) {
        const std::string bpath = path + ".bbox";
        BBox box;
        if (bb->is_array()) {
            if (bb->size() != 4) throw SchemaError(bpath, "expected [x, y, w, h]");
            box = {unit_at((*bb)[0], bpath + ".x"), unit_at((*bb)[1], bpath + ".y"),
                   unit_at((*bb)[2], bpath + ".w"), unit_at((*bb)[3], bpath + ".h")};
        } else if (bb->is_object()) {
            auto coord = [&](const char* key) {
                const json* v = find(*bb, key);
                if (!v) throw SchemaError(bpath + "." + key, "missing");
                return unit_at(*v, bpath + "." + key);
            };
            box = {coord("x"), coord("y"), coord("w"), coord("h")};
        } else {
            throw SchemaError(bpath, "expected an object or array");
        }
        if (box.w <= 0.0) throw SchemaError(bpath + ".w", "must be positive");
        if (box.h <= 0.0) throw SchemaError(bpath + ".h", "must be positive");
        out.bbox = box;
    }
    return out;
}

std::string default_embedding_text(const ExtractionRecord& r) {
    std::string out;
    auto add = [&](std::string_view s) {
        auto t = trim(s);
        if (t.empty()) return;
        if (!out.empty()) out.push_back(' ');
        out += t;
    };
    add(r.document.title);
    for (const auto& region : r.regions) add(region.text);
    add(r.full_text);
    return out;
}

bool is_integer_token(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(),
                                      [](char c) { return c >= '0' && c <= '9'; });
}

bool is_rev_token(std::string_view s) {
    if (is_integer_token(s)) return s.size() <= 3;
    return !s.empty() && s.size() <= 2 &&
           std::all_of(s.begin(), s.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
}

bool has_digit(std::string_view s) {
    return std::any_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Splits on runs of ASCII whitespace.
std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string strip_punct(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    auto punct = [](char c) { return c == '.' || c == ',' || c == ':' || c == ';' || c == '#'; };
    while (b < e && punct(s[b])) ++b;
    while (e > b && punct(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

const std::regex& identifier_regex() {
    static const std::regex re("^[A-Z0-9]{2,}-?[A-Z0-9]+$");
    return re;
}

}  // namespace

ExtractionRecord validate_record(const json& raw) {
    if (!raw.is_object()) throw SchemaError("$", "record must be a JSON object");
    ExtractionRecord r;

    if (const json* v = find(raw, "schema_version")) {
        if (!v->is_number_integer() || v->get<int>() != kSchemaVersion) {
            throw SchemaError("schema_version", "unsupported version (expected 1)");
        }
    }
    const json* id = find(raw, "file_id");
    if (!id) throw SchemaError("file_id", "missing required field");
    r.file_id = string_at(*id, "file_id");
    if (r.file_id.empty()) throw SchemaError("file_id", "must be nonempty");

    const json* kf = find(raw, "kind_features");
    if (!kf) throw SchemaError("kind_features", "missing required field");
    r.kind_features = parse_features(*kf);

    if (const json* regions = find(raw, "regions")) {
        if (!regions->is_array()) throw SchemaError("regions", "expected an array");
        for (std::size_t i = 0; i < regions->size(); ++i) {
            r.regions.push_back(parse_region((*regions)[i], "regions[" + std::to_string(i) + "]"));
        }
    }
    if (const json* t = find(raw, "full_text")) r.full_text = string_at(*t, "full_text");

    if (const json* c = find(raw, "doc_class")) {
        auto cls = parse_doc_class(string_at(*c, "doc_class"));
        if (!cls) throw SchemaError("doc_class", "expected policy, procedure or other");
        r.doc_class = cls;
    }
    if (const json* d = find(raw, "date")) {
        auto date = Date::parse(string_at(*d, "date"));
        if (!date) throw SchemaError("date", "expected an ISO-8601 date (YYYY-MM-DD)");
        r.date = date;
    }
    if (const json* k = find(raw, "kind")) {
        auto kind = parse_kind(string_at(*k, "kind"));
        if (!kind) throw SchemaError("kind", "expected drawing or document");
        r.kind = kind;
    }
    if (const json* doc = find(raw, "document")) {
        if (!doc->is_object()) throw SchemaError("document", "expected an object");
        if (const json* v = find(*doc, "doc_id")) {
            auto s = string_at(*v, "document.doc_id");
            if (!s.empty()) r.document.doc_id = s;
        }
        if (const json* v = find(*doc, "title")) r.document.title = string_at(*v, "document.title");
        if (const json* v = find(*doc, "section_headings")) {
            r.document.section_headings = string_list_at(*v, "document.section_headings");
        }
        if (const json* v = find(*doc, "steps")) r.document.steps = string_list_at(*v, "document.steps");
    }
    if (const json* t = find(raw, "thumbnail_ref")) r.thumbnail_ref = string_at(*t, "thumbnail_ref");

    // quality: explicit, else OCR confidence, else mean region confidence,
    // else normalized resolution, else 0.
    if (const json* q = find(raw, "quality")) {
        r.quality = unit_at(*q, "quality");
    } else if (const json* oc = find(raw, "ocr_confidence")) {
        r.quality = unit_at(*oc, "ocr_confidence");
    } else if (!r.regions.empty()) {
        double sum = 0.0;
        for (const auto& region : r.regions) sum += region.confidence;
        r.quality = sum / static_cast<double>(r.regions.size());
    } else if (const json* res = find(raw, "resolution")) {
        const json* w = res->is_object() ? find(*res, "width") : nullptr;
        const json* h = res->is_object() ? find(*res, "height") : nullptr;
        if (!w || !h) throw SchemaError("resolution", "expected {width, height}");
        const double mn = std::min(number_at(*w, "resolution.width"), number_at(*h, "resolution.height"));
        if (mn <= 0.0) throw SchemaError("resolution", "dimensions must be positive");
        r.quality = std::min(1.0, mn / 4096.0);
    }

    if (const json* e = find(raw, "embedding_text")) {
        r.embedding_text = string_at(*e, "embedding_text");
    } else {
        r.embedding_text = default_embedding_text(r);
    }
    return r;
}

json record_to_json(const ExtractionRecord& r) {
    json kf{{"p_draw", r.kind_features.p_draw},
            {"h", r.kind_features.h},
            {"cad_prior", r.kind_features.cad_prior ? 1 : 0}};
    if (r.kind_features.cues) {
        kf["b"] = r.kind_features.cues->border;
        kf["edge"] = r.kind_features.cues->edge_density;
        kf["lines"] = r.kind_features.cues->line_score;
    }
    json regions = json::array();
    for (const auto& region : r.regions) {
        json jr{{"kind", to_string(region.kind)},
                {"text", region.text},
                {"confidence", region.confidence}};
        if (region.bbox) {
            jr["bbox"] = {{"x", region.bbox->x}, {"y", region.bbox->y},
                          {"w", region.bbox->w}, {"h", region.bbox->h}};
        }
        regions.push_back(std::move(jr));
    }
    json out{{"schema_version", kSchemaVersion},
             {"file_id", r.file_id},
             {"kind_features", std::move(kf)},
             {"regions", std::move(regions)},
             {"full_text", r.full_text},
             {"quality", r.quality},
             {"embedding_text", r.embedding_text}};
    if (r.doc_class) out["doc_class"] = to_string(*r.doc_class);
    if (r.date) out["date"] = r.date->to_string();
    if (r.kind) out["kind"] = to_string(*r.kind);
    if (r.thumbnail_ref) out["thumbnail_ref"] = *r.thumbnail_ref;
    const auto& d = r.document;
    if (d.doc_id || !d.title.empty() || !d.section_headings.empty() || !d.steps.empty()) {
        json doc{{"title", d.title}, {"section_headings", d.section_headings}, {"steps", d.steps}};
        if (d.doc_id) doc["doc_id"] = *d.doc_id;
        out["document"] = std::move(doc);
    }
    return out;
}

json convert_ingestion_output(const std::string& file_id, const json& output) {
    if (!output.is_object()) throw SchemaError("$", "ingestion output must be a JSON object");
    const json* dt = find(output, "doc_type");
    if (!dt) throw SchemaError("doc_type", "missing required field");
    const std::string doc_type = to_upper_ascii(string_at(*dt, "doc_type"));

    const bool drawing = doc_type == "ENGINEERING_DRAWING";
    if (!drawing && doc_type != "POLICY" && doc_type != "PROCEDURE" && doc_type != "OTHER") {
        throw SchemaError("doc_type", "unknown doc_type '" + doc_type + "'");
    }
    const double p = drawing ? 1.0 : 0.0;
    json rec{{"schema_version", kSchemaVersion},
             {"file_id", file_id},
             {"kind", drawing ? "drawing" : "document"},
             {"kind_features", {{"p_draw", p}, {"h", p}, {"cad_prior", 0}}},
             {"regions", json::array()}};
    if (const json* t = find(output, "text")) rec["full_text"] = string_at(*t, "text");

    auto field = [&](const json* obj, const char* key) -> std::string {
        if (!obj || !obj->is_object()) return {};
        const json* v = find(*obj, key);
        if (!v) return {};
        if (v->is_string()) return v->get<std::string>();
        return v->dump();
    };

    if (drawing) {
        const json* df = find(output, "drawing_fields");
        const std::pair<const char*, const char*> mapping[] = {
            {"drawing_number", "drawing_number"},
            {"title_block_text", "data_block"},
            {"parts_list_or_bom", "parts_list"},
            {"revision_block_text", "revisions_block"},
        };
        for (const auto& [src, kind] : mapping) {
            auto text = trim(field(df, src));
            if (text.empty() || text == "...") continue;
            rec["regions"].push_back({{"kind", kind}, {"text", text}, {"confidence", 1.0}});
        }
        auto notes = trim(field(df, "notes"));
        if (!notes.empty() && notes != "...") {
            rec["full_text"] = rec.value("full_text", std::string()) + "\n" + notes;
        }
        return rec;
    }

    const bool procedure = doc_type == "PROCEDURE";
    rec["doc_class"] = procedure ? "procedure" : (doc_type == "POLICY" ? "policy" : "other");
    const json* fields = find(output, procedure ? "procedure_fields" : "policy_fields");
    json doc = json::object();
    auto id = trim(field(fields, procedure ? "procedure_id" : "policy_id"));
    if (!id.empty() && id != "...") doc["doc_id"] = id;
    auto title = trim(field(fields, "title"));
    if (title != "...") doc["title"] = title;
    auto list = trim(field(fields, procedure ? "steps" : "section_headings"));
    if (!list.empty() && list != "...") doc[procedure ? "steps" : "section_headings"] = list;
    rec["document"] = std::move(doc);
    return rec;
}

std::vector<std::string> default_facility_patterns() {
    return {
        R"(\b[A-Z][0-9][A-Z][0-9]{4}\b)",
        R"(\b[A-Z]{2}:[A-Z]{2,4}[0-9]{3,5}\b)",
        R"(\bFACILITY[:\s]+([A-Z0-9][A-Z0-9:-]*[A-Z0-9]))",
    };
}

FieldParser::FieldParser(std::vector<std::string> facility_patterns)
    : sheet_(R"(\bSH(?:EE)?T\.?\s*(\d+)\s*(?:OF|/)\s*(\d+))"),
      size_(R"(\bSIZE[:\s]*([A-F])\b)") {
    for (const auto& p : facility_patterns) {
        facility_.emplace_back(p);
    }
}

std::vector<std::string> FieldParser::find_facilities(std::string_view text) const {
    const std::string upper = to_upper_ascii(normalize_text(text));
    std::vector<std::pair<std::ptrdiff_t, std::string>> hits;
    for (const auto& re : facility_) {
        for (std::sregex_iterator it(upper.begin(), upper.end(), re), end; it != end; ++it) {
            const auto& m = *it;
            const int g = m.size() > 1 && m[1].matched ? 1 : 0;
            hits.emplace_back(m.position(g), normalize_identifier(m.str(g)));
        }
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::string> out;
    for (auto& [pos, tag] : hits) {
        if (std::find(out.begin(), out.end(), tag) == out.end()) out.push_back(std::move(tag));
    }
    return out;
}

std::optional<std::string> FieldParser::find_drawing_number_in(std::string_view text) const {
    const std::string upper = to_upper_ascii(normalize_text(text));
    const auto toks = words(upper);

    // A value directly after a DWG/DRAWING NO label wins.
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const auto t = strip_punct(toks[i]);
        if (t != "DWG" && t != "DRAWING") continue;
        std::size_t j = i + 1;
        if (j < toks.size()) {
            const auto lbl = strip_punct(toks[j]);
            if (lbl == "NO" || lbl == "NUMBER" || lbl == "NUM") ++j;
        }
        if (j < toks.size()) {
            const auto cand = strip_punct(toks[j]);
            if (has_digit(cand) && std::regex_match(cand, identifier_regex())) return cand;
        }
    }

    const auto facilities = find_facilities(text);
    std::optional<std::string> best;
    for (const auto& raw : toks) {
        const auto cand = strip_punct(raw);
        if (!has_digit(cand) || !std::regex_match(cand, identifier_regex())) continue;
        if (std::find(facilities.begin(), facilities.end(), cand) != facilities.end()) continue;
        if (!best || cand.size() > best->size()) best = cand;
    }
    return best;
}

std::vector<std::string> parse_revision_entries(std::string_view block) {
    std::vector<std::string> out;
    std::string entry;
    auto flush = [&] {
        auto toks = words(to_upper_ascii(entry));
        entry.clear();
        std::size_t i = 0;
        while (i < toks.size()) {
            const auto t = strip_punct(toks[i]);
            if (t == "REV" || t == "REVISION") {
                ++i;
                continue;
            }
            break;
        }
        if (i >= toks.size()) return;
        auto tok = strip_punct(toks[i]);
        if (!is_rev_token(tok)) return;
        if (is_integer_token(tok)) {
            tok = std::to_string(std::stoi(tok));
        }
        out.push_back(tok);
    };
    for (char c : block) {
        if (c == '\n' || c == ',' || c == ';') {
            flush();
        } else {
            entry.push_back(c);
        }
    }
    flush();
    return out;
}

std::optional<std::string> latest_revision(std::span<const std::string> entries) {
    std::optional<std::string> best;
    long long best_rank = -1;
    for (const auto& e : entries) {
        long long rank = 0;
        if (is_integer_token(e)) {
            rank = std::stoll(e);
        } else {
            for (char c : e) rank = rank * 26 + (c - 'A' + 1);
        }
        if (rank >= best_rank) {  // later entries win ties
            best_rank = rank;
            best = e;
        }
    }
    return best;
}

std::vector<PartEntry> parse_parts_list(std::string_view block) {
    std::vector<PartEntry> out;
    std::string line;
    auto handle = [&](const std::string& row) {
        if (!has_digit(row)) return;
        // Columns: runs of >= 2 spaces or tabs.
        std::vector<std::string> cells;
        std::string cell;
        std::size_t spaces = 0;
        auto push_cell = [&] {
            auto t = trim(cell);
            if (!t.empty()) cells.push_back(std::move(t));
            cell.clear();
        };
        for (char c : row) {
            if (c == '\t') {
                push_cell();
                spaces = 0;
            } else if (c == ' ') {
                ++spaces;
                if (spaces == 2) push_cell();
                else if (spaces < 2) cell.push_back(c);
            } else {
                spaces = 0;
                cell.push_back(c);
            }
        }
        push_cell();

        PartEntry entry;
        bool have_qty = false;
        bool have_id = false;
        std::string description;
        for (const auto& c : cells) {
            if (is_integer_token(c)) {
                if (!have_qty) {
                    have_qty = true;
                    const auto q = std::stoll(c.size() > 9 ? c.substr(0, 9) : c);
                    entry.quantity = q >= 1 ? static_cast<int>(q) : 1;
                }
                continue;
            }
            if (!have_id) {
                entry.part_id = normalize_identifier(c);
                have_id = true;
            } else {
                if (!description.empty()) description.push_back(' ');
                description += c;
            }
        }
        if (!have_id || entry.part_id.empty()) return;
        entry.description = normalize_text(description);
        out.push_back(std::move(entry));
    };
    for (char c : block) {
        if (c == '\n') {
            handle(line);
            line.clear();
        } else {
            line.push_back(c);
        }
    }
    handle(line);
    return out;
}

DrawingMetadata FieldParser::parse_drawing(std::span<const RegionExtraction> regions) const {
    DrawingMetadata meta;
    const RegionExtraction* number_region = nullptr;
    std::vector<const RegionExtraction*> data_blocks;
    for (const auto& r : regions) {
        switch (r.kind) {
            case RegionKind::DrawingNumber:
                if (!number_region || r.confidence > number_region->confidence) number_region = &r;
                break;
            case RegionKind::DataBlock:
                data_blocks.push_back(&r);
                break;
            case RegionKind::PartsList: {
                auto parts = parse_parts_list(r.text);
                meta.parts.insert(meta.parts.end(), parts.begin(), parts.end());
                break;
            }
            case RegionKind::RevisionsBlock: {
                auto entries = parse_revision_entries(r.text);
                meta.revision_history.insert(meta.revision_history.end(), entries.begin(), entries.end());
                break;
            }
        }
    }

    if (number_region) {
        const auto whole = normalize_identifier(number_region->text);
        static const std::regex plain_id("^[A-Z0-9]+(-[A-Z0-9]+)*$");
        if (!whole.empty() && std::regex_match(whole, plain_id)) {
            meta.drawing_number = whole;
        } else if (auto found = find_drawing_number_in(number_region->text)) {
            meta.drawing_number = *found;
        }
    }
    if (meta.drawing_number.empty()) {
        for (const auto* db : data_blocks) {
            if (auto found = find_drawing_number_in(db->text)) {
                meta.drawing_number = *found;
                break;
            }
        }
    }
    meta.incomplete = meta.drawing_number.empty();
    meta.revision = latest_revision(meta.revision_history);

    // Facility tags: data blocks first, then the remaining regions.
    for (const auto* db : data_blocks) {
        auto tags = find_facilities(db->text);
        if (!tags.empty()) {
            meta.facility_tag = tags.front();
            break;
        }
    }
    if (!meta.facility_tag) {
        for (const auto& r : regions) {
            if (r.kind == RegionKind::DataBlock) continue;
            auto tags = find_facilities(r.text);
            if (!tags.empty()) {
                meta.facility_tag = tags.front();
                break;
            }
        }
    }

    for (const auto* db : data_blocks) {
        const std::string upper = to_upper_ascii(normalize_text(db->text));
        std::smatch m;
        if (!meta.sheet && std::regex_search(upper, m, sheet_)) {
            meta.sheet = std::make_pair(std::stoi(m[1].str()), std::stoi(m[2].str()));
        }
        if (!meta.size_code && std::regex_search(upper, m, size_)) {
            meta.size_code = m[1].str()[0];
        }
    }
    return meta;
}

const FieldParser& default_field_parser() {
    static const FieldParser parser;
    return parser;
}

json metadata_to_json(const Metadata& meta) {
    if (const auto* d = std::get_if<DrawingMetadata>(&meta)) {
        json parts = json::array();
        for (const auto& p : d->parts) {
            parts.push_back({{"part_id", p.part_id}, {"description", p.description}, {"quantity", p.quantity}});
        }
        json j{{"type", "drawing"},
               {"drawing_number", d->drawing_number},
               {"revision", d->revision ? json(*d->revision) : json(nullptr)},
               {"facility_tag", d->facility_tag ? json(*d->facility_tag) : json(nullptr)},
               {"sheet", d->sheet ? json::array({d->sheet->first, d->sheet->second}) : json(nullptr)},
               {"parts", std::move(parts)},
               {"size_code", d->size_code ? json(std::string(1, *d->size_code)) : json(nullptr)},
               {"revision_history", d->revision_history},
               {"incomplete", d->incomplete}};
        return j;
    }
    const auto& doc = std::get<DocumentMetadata>(meta);
    return json{{"type", "document"},
                {"doc_class", std::string(to_string(doc.doc_class))},
                {"doc_id", doc.doc_id ? json(*doc.doc_id) : json(nullptr)},
                {"title", doc.title},
                {"section_headings", doc.section_headings},
                {"steps", doc.steps},
                {"facility_tags", doc.facility_tags},
                {"classification_pending", doc.classification_pending}};
}

Metadata metadata_from_json(const json& j) {
    auto opt_string = [&](const char* key) -> std::optional<std::string> {
        const auto* v = find(j, key);
        if (v == nullptr) return std::nullopt;
        return string_at(*v, std::string("metadata.") + key);
    };
    const auto type = string_at(j.at("type"), "metadata.type");
    if (type == "drawing") {
        DrawingMetadata d;
        d.drawing_number = j.value("drawing_number", std::string{});
        d.revision = opt_string("revision");
        d.facility_tag = opt_string("facility_tag");
        if (const auto* s = find(j, "sheet")) {
            d.sheet = std::make_pair(s->at(0).get<int>(), s->at(1).get<int>());
        }
        for (const auto& p : j.value("parts", json::array())) {
            d.parts.push_back({p.at("part_id").get<std::string>(), p.value("description", std::string{}),
                               p.value("quantity", 1)});
        }
        if (auto sc = opt_string("size_code"); sc && !sc->empty()) d.size_code = (*sc)[0];
        d.revision_history = j.value("revision_history", std::vector<std::string>{});
        d.incomplete = j.value("incomplete", false);
        return d;
    }
    if (type != "document") throw SchemaError("metadata.type", "expected drawing or document");
    DocumentMetadata doc;
    const auto cls = parse_doc_class(j.value("doc_class", std::string("other")));
    if (!cls) throw SchemaError("metadata.doc_class", "unknown document class");
    doc.doc_class = *cls;
    doc.doc_id = opt_string("doc_id");
    doc.title = j.value("title", std::string{});
    doc.section_headings = j.value("section_headings", std::vector<std::string>{});
    doc.steps = j.value("steps", std::vector<std::string>{});
    doc.facility_tags = j.value("facility_tags", std::vector<std::string>{});
    doc.classification_pending = j.value("classification_pending", false);
    return doc;
}

std::string near_duplicate_key(const Metadata& meta, std::string_view file_id) {
    if (const auto* d = std::get_if<DrawingMetadata>(&meta)) {
        if (!d->drawing_number.empty()) return "dwg:" + d->drawing_number;
    } else if (const auto* doc = std::get_if<DocumentMetadata>(&meta)) {
        if (doc->doc_id && !doc->doc_id->empty()) return "doc:" + *doc->doc_id;
    }
    return "file:" + std::string(file_id);
}

DocumentMetadata build_document_metadata(const ExtractionRecord& record, DocClass cls,
                                         const FieldParser& parser) {
    DocumentMetadata meta;
    meta.doc_class = cls;
    if (record.document.doc_id) meta.doc_id = normalize_identifier(*record.document.doc_id);
    meta.title = record.document.title;
    meta.section_headings = record.document.section_headings;
    if (cls == DocClass::Procedure) meta.steps = record.document.steps;
    meta.facility_tags = parser.find_facilities(record.document.title + "\n" + record.full_text);
    return meta;
}

std::string classification_payload(std::string_view text, const ClassifyLimits& limits) {
    std::size_t end = text.size();
    std::size_t pages = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\f' && ++pages == limits.max_pages) {
            end = i;
            break;
        }
    }
    return truncate_code_points(text.substr(0, end), limits.max_chars);
}

ClassificationOutcome classify_document(std::string_view text, DocumentClassifier& client,
                                        const ClassifyLimits& limits) {
    ClassificationOutcome out;
    if (trim(text).empty()) {
        out.pending = true;
        return out;
    }
    const auto payload = classification_payload(text, limits);
    out.dispatched_chars = count_code_points(payload);
    try {
        out.doc_class = client.classify(payload);
    } catch (const Error& e) {
        out.doc_class = DocClass::Other;
        out.pending = true;
        out.error = std::string(to_string(ErrorCode::ClassificationUnavailable)) + ": " + e.what();
    }
    return out;
}

}  // namespace archsearch::extraction
