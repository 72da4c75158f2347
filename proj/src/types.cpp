#include "archsearch/types.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

#include "archsearch/error.hpp"

namespace archsearch {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidInput: return "invalid-input";
        case ErrorCode::SchemaValidation: return "schema-validation";
        case ErrorCode::DegenerateEmbedding: return "degenerate-embedding";
        case ErrorCode::DegenerateTraining: return "degenerate-training";
        case ErrorCode::DegenerateAgreement: return "degenerate-agreement";
        case ErrorCode::UndefinedRate: return "undefined-rate";
        case ErrorCode::Conflict: return "conflict";
        case ErrorCode::NotFound: return "not-found";
        case ErrorCode::CorruptIndex: return "corrupt-index";
        case ErrorCode::InvalidRun: return "invalid-run";
        case ErrorCode::JudgeFormat: return "judge-format";
        case ErrorCode::Transport: return "transport";
        case ErrorCode::ClassificationUnavailable: return "classification-unavailable";
    }
    return "unknown";
}

namespace {

std::string fold(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '-' || c == ' ') {
            out.push_back('_');
        } else {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(Kind kind) {
    return kind == Kind::Drawing ? "drawing" : "document";
}

std::string_view to_string(DocClass cls) {
    switch (cls) {
        case DocClass::Policy: return "policy";
        case DocClass::Procedure: return "procedure";
        case DocClass::Other: return "other";
    }
    return "other";
}

std::string_view to_string(RegionKind kind) {
    switch (kind) {
        case RegionKind::DrawingNumber: return "drawing_number";
        case RegionKind::DataBlock: return "data_block";
        case RegionKind::PartsList: return "parts_list";
        case RegionKind::RevisionsBlock: return "revisions_block";
    }
    return "data_block";
}

std::string_view to_string(ItemType type) {
    switch (type) {
        case ItemType::Drawing: return "drawing";
        case ItemType::Policy: return "policy";
        case ItemType::Procedure: return "procedure";
        case ItemType::Other: return "other";
    }
    return "other";
}

std::optional<Kind> parse_kind(std::string_view s) {
    const auto f = fold(s);
    if (f == "drawing" || f == "engineering_drawing") return Kind::Drawing;
    if (f == "document") return Kind::Document;
    return std::nullopt;
}

std::optional<DocClass> parse_doc_class(std::string_view s) {
    const auto f = fold(s);
    if (f == "policy") return DocClass::Policy;
    if (f == "procedure") return DocClass::Procedure;
    if (f == "other") return DocClass::Other;
    return std::nullopt;
}

std::optional<RegionKind> parse_region_kind(std::string_view s) {
    const auto f = fold(s);
    if (f == "drawing_number" || f == "drawingnumber") return RegionKind::DrawingNumber;
    if (f == "data_block" || f == "datablock") return RegionKind::DataBlock;
    if (f == "parts_list" || f == "partslist") return RegionKind::PartsList;
    if (f == "revisions_block" || f == "revisionsblock") return RegionKind::RevisionsBlock;
    return std::nullopt;
}

std::optional<ItemType> parse_item_type(std::string_view s) {
    const auto f = fold(s);
    if (f == "drawing" || f == "drawings" || f == "engineering_drawing") return ItemType::Drawing;
    if (f == "policy") return ItemType::Policy;
    if (f == "procedure") return ItemType::Procedure;
    if (f == "other") return ItemType::Other;
    return std::nullopt;
}

std::optional<Date> Date::parse(std::string_view iso) {
    // YYYY-MM-DD, optionally followed by a time part which is ignored.
    if (iso.size() < 10 || iso[4] != '-' || iso[7] != '-') {
        return std::nullopt;
    }
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    auto num = [&](std::size_t pos, std::size_t len, auto& out) {
        auto [ptr, ec] = std::from_chars(iso.data() + pos, iso.data() + pos + len, out);
        return ec == std::errc() && ptr == iso.data() + pos + len;
    };
    if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) {
        return std::nullopt;
    }
    if (iso.size() > 10 && iso[10] != 'T' && iso[10] != ' ') {
        return std::nullopt;
    }
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                    std::chrono::day{d}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return Date{ymd};
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

long long Date::serial() const {
    return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

}  // namespace archsearch
