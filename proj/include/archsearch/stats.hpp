#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace archsearch::stats {

struct BootstrapConfig {
    std::size_t resamples = 10000;
    std::uint64_t seed = 20240601;
    double confidence = 0.95;
    bool parallel = true;
};

struct Interval {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// Sample mean with a percentile-bootstrap interval.
Interval aggregate(std::span<const double> values, const BootstrapConfig& cfg = {});

/// Linear-interpolated quantile of an ascending-sorted sample (type 7).
double quantile_sorted(std::span<const double> sorted, double q);

struct PermutationConfig {
    std::size_t permutations = 10000;
    std::uint64_t seed = 20240601;
    bool parallel = true;
};

/// Two-sided paired sign-flip test on a - b. Enumerates all 2^n sign vectors
/// when 2^n <= permutations, otherwise Monte Carlo with (count + 1) / (B + 1).
double paired_randomization_test(std::span<const double> a, std::span<const double> b,
                                 const PermutationConfig& cfg = {});

/// 100 * wins / (wins + losses); throws UndefinedRate when both are zero.
double win_rate(std::uint64_t wins, std::uint64_t losses, std::uint64_t ties = 0);

/// Quadratic-weighted Cohen's kappa over labels in {0,1,2}.
double cohen_kappa_quadratic(std::span<const int> a, std::span<const int> b);

/// Fleiss' kappa; rows are items, columns raters, labels in {0,1,2}.
/// A negative label marks a missing rating and is rejected.
double fleiss_kappa(const std::vector<std::vector<int>>& labels);

/// Kendall tau-b.
double kendall_tau_b(std::span<const double> xs, std::span<const double> ys);

}  // namespace archsearch::stats
