#pragma once

#include <string_view>

namespace archsearch::judge {

// Instruction blocks of the two judging protocols, byte-for-byte as shipped in
// templates/. Rendering appends the query and the anonymized results.
extern const std::string_view kArenaTemplateV1;
extern const std::string_view kScoringTemplateV1;

inline constexpr std::string_view kArenaTemplateId = "arena_v1";
inline constexpr std::string_view kScoringTemplateId = "scoring_v1";

}  // namespace archsearch::judge
