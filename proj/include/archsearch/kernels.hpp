#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// Data-parallel hot loops. Every kernel has a serial reference in
// `kernels::serial` and an OpenMP version in `kernels::parallel`; both produce
// bit-identical results (per-row / per-resample work is independent and each
// resample draws from its own seeded stream).
namespace archsearch::kernels {

namespace serial {

/// out[i] = <rows[i*dim .. (i+1)*dim), query>
void dot_scores(std::span<const double> rows, std::size_t dim, std::span<const double> query,
                std::span<double> out);

/// Mean of each bootstrap resample (with replacement, same size as `values`).
std::vector<double> bootstrap_means(std::span<const double> values, std::size_t resamples,
                                    std::uint64_t seed);

/// Number of random sign vectors s with |sum_i s_i d_i| >= threshold.
std::uint64_t sign_flip_count(std::span<const double> diffs, std::size_t permutations,
                              std::uint64_t seed, double threshold);

/// Same count over all 2^n sign vectors (n <= 30).
std::uint64_t sign_flip_count_exhaustive(std::span<const double> diffs, double threshold);

}  // namespace serial

namespace parallel {

void dot_scores(std::span<const double> rows, std::size_t dim, std::span<const double> query,
                std::span<double> out);

std::vector<double> bootstrap_means(std::span<const double> values, std::size_t resamples,
                                    std::uint64_t seed);

std::uint64_t sign_flip_count(std::span<const double> diffs, std::size_t permutations,
                              std::uint64_t seed, double threshold);

std::uint64_t sign_flip_count_exhaustive(std::span<const double> diffs, double threshold);

}  // namespace parallel

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace archsearch::kernels
