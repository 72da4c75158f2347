#pragma once

#include <array>
#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace archsearch {

enum class Kind { Drawing, Document };

enum class DocClass { Policy, Procedure, Other };

enum class RegionKind { DrawingNumber, DataBlock, PartsList, RevisionsBlock };

inline constexpr std::array<RegionKind, 4> kRegionKinds = {
    RegionKind::DrawingNumber, RegionKind::DataBlock, RegionKind::PartsList,
    RegionKind::RevisionsBlock};

/// Retrieval-facing type of an indexed item: drawings, or one of the document classes.
enum class ItemType { Drawing, Policy, Procedure, Other };

std::string_view to_string(Kind kind);
std::string_view to_string(DocClass cls);
std::string_view to_string(RegionKind kind);
std::string_view to_string(ItemType type);

// Parsers are case-insensitive and accept both snake_case and the upstream
// upper-case spellings ("ENGINEERING_DRAWING", "POLICY", ...).
std::optional<Kind> parse_kind(std::string_view s);
std::optional<DocClass> parse_doc_class(std::string_view s);
std::optional<RegionKind> parse_region_kind(std::string_view s);
std::optional<ItemType> parse_item_type(std::string_view s);

inline std::size_t index_of(RegionKind kind) { return static_cast<std::size_t>(kind); }

/// Calendar date, ISO-8601 on the wire.
struct Date {
    std::chrono::year_month_day ymd;

    static std::optional<Date> parse(std::string_view iso);
    std::string to_string() const;
    /// Days since 1970-01-01.
    long long serial() const;

    friend bool operator==(const Date&, const Date&) = default;
    friend auto operator<=>(const Date& a, const Date& b) { return a.ymd <=> b.ymd; }
};

}  // namespace archsearch
