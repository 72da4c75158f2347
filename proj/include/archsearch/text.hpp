#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace archsearch {

/// Bumped whenever tokenization output changes; persisted in shard manifests.
inline constexpr int kTokenizerVersion = 1;

/// Case folding plus whitespace/dash canonicalization. Total and idempotent.
///  - ASCII letters are lowercased;
///  - every Unicode dash variant (U+2010..U+2015, U+2212, U+FE58, U+FE63, U+FF0D) becomes '-';
///  - runs of whitespace (ASCII and Unicode spaces) collapse to one ' ', ends are trimmed.
std::string normalize_text(std::string_view s);

/// Identifier canonical form: uppercase, no whitespace at all, unified dashes.
std::string normalize_identifier(std::string_view s);

/// normalize_text, then split on non-alphanumerics. Mixed letter/digit tokens stay
/// whole ("59x1235"); a dash-joined identifier such as "59x-1235" additionally
/// yields its concatenation "59x1235" so both spellings are searchable.
/// Bytes >= 0x80 count as token characters.
std::vector<std::string> tokenize(std::string_view s);

/// Truncate to at most `max_chars` Unicode code points without splitting a UTF-8 sequence.
std::string truncate_code_points(std::string_view s, std::size_t max_chars);

std::size_t count_code_points(std::string_view s);

std::string to_upper_ascii(std::string_view s);

std::string trim(std::string_view s);

}  // namespace archsearch
