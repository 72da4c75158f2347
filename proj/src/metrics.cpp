#include "archsearch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "archsearch/error.hpp"

namespace archsearch::metrics {

namespace {

int grade_at(std::span<const int> grades, std::size_t i) { return i < grades.size() ? grades[i] : 0; }

void check_grades(std::span<const int> grades) {
    for (int g : grades) {
        require(g >= 0 && g <= 2, ErrorCode::InvalidInput, "grades must lie in {0,1,2}");
    }
}

}  // namespace

bool meets(int grade, Threshold t) { return t == Threshold::AtLeast1 ? grade >= 1 : grade == 2; }

double dcg_at_k(std::span<const int> grades, std::size_t k) {
    check_grades(grades);
    double dcg = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        dcg += grade_at(grades, i) / std::log2(static_cast<double>(i) + 2.0);
    }
    return dcg;
}

double ideal_dcg_at_k(std::span<const int> pool_grades, std::size_t k) {
    std::vector<int> sorted(pool_grades.begin(), pool_grades.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    return dcg_at_k(sorted, k);
}

double ndcg_at_k(std::span<const int> grades, std::span<const int> pool_grades, std::size_t k) {
    const double idcg = ideal_dcg_at_k(pool_grades, k);
    if (idcg <= 0.0) return 0.0;
    return dcg_at_k(grades, k) / idcg;
}

double ap_at_k(std::span<const int> grades, std::size_t k, Threshold t, std::size_t r_q) {
    check_grades(grades);
    if (r_q == 0) return 0.0;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if (!meets(grade_at(grades, i), t)) continue;
        ++hits;
        sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    return sum / static_cast<double>(r_q);
}

Prf prf_success(std::span<const int> grades, std::size_t k, std::size_t r_q) {
    check_grades(grades);
    require(k >= 1, ErrorCode::InvalidInput, "k must be >= 1");
    std::size_t rel = 0;
    for (std::size_t i = 0; i < k; ++i) rel += grade_at(grades, i) > 0 ? 1 : 0;
    Prf out;
    out.precision = static_cast<double>(rel) / static_cast<double>(k);
    out.recall = r_q == 0 ? 0.0 : static_cast<double>(rel) / static_cast<double>(r_q);
    out.success = rel > 0 ? 1.0 : 0.0;
    return out;
}

std::size_t relevant_count(std::span<const int> pool_grades, Threshold t) {
    return static_cast<std::size_t>(
        std::count_if(pool_grades.begin(), pool_grades.end(), [&](int g) { return meets(g, t); }));
}

}  // namespace archsearch::metrics
