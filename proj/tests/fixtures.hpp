#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "archsearch/index.hpp"
#include "archsearch/text.hpp"

namespace fixtures {

inline std::vector<double> unit(std::vector<double> v) {
    double s = 0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    for (auto& x : v) x /= s;
    return v;
}

inline std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0, 1);
    std::vector<double> v(dim);
    for (auto& x : v) x = n(rng);
    return unit(std::move(v));
}

/// A document entry with only full_text populated.
inline archsearch::index::DocEntry doc(const std::string& id, const std::string& text, std::vector<double> embedding,
                                       archsearch::Kind kind = archsearch::Kind::Drawing) {
    archsearch::index::DocEntry e;
    e.doc_id = id;
    e.kind = kind;
    e.fields[static_cast<std::size_t>(archsearch::index::Field::FullText)] = archsearch::normalize_text(text);
    e.embedding.vector = std::move(embedding);
    e.dup_key = id;
    if (kind == archsearch::Kind::Document) e.metadata = archsearch::extraction::DocumentMetadata{};
    return e;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("archsearch-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixtures
