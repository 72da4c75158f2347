#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Per-query retrieval metrics over graded relevance (0/1/2). `grades` is the
// ranked list of grades for the top results; missing ranks count as 0.
namespace archsearch::metrics {

enum class Threshold { AtLeast1, Exactly2 };

bool meets(int grade, Threshold t);

double dcg_at_k(std::span<const int> grades, std::size_t k);

/// IDCG from the descending sort of `pool_grades` (all judged grades of the query).
double ideal_dcg_at_k(std::span<const int> pool_grades, std::size_t k);

/// DCG / IDCG, 0 when IDCG is 0.
double ndcg_at_k(std::span<const int> grades, std::span<const int> pool_grades, std::size_t k);

/// (1/R) sum_{i<=k} Prec@i * 1{grade_i meets t}; 0 when R = 0.
/// Prec@i counts items meeting the same threshold.
double ap_at_k(std::span<const int> grades, std::size_t k, Threshold t, std::size_t r_q);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double success = 0.0;
};

/// P@k = #{grade > 0}/k, R@k = #{grade > 0}/R (0 when R = 0), Succ@k = 1{max >= 1}.
Prf prf_success(std::span<const int> grades, std::size_t k, std::size_t r_q);

/// Number of pool grades meeting the threshold.
std::size_t relevant_count(std::span<const int> pool_grades, Threshold t);

}  // namespace archsearch::metrics
