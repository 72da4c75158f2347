#include "archsearch/kernels.hpp"

#include <cmath>
#include <random>

#if defined(_OPENMP)
#include <omp.h>
#endif

#include "archsearch/error.hpp"
#include "archsearch/hash.hpp"

namespace archsearch::kernels {

namespace {

inline double row_dot(const double* row, const double* q, std::size_t dim) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) acc += row[j] * q[j];
    return acc;
}

inline double resample_mean(std::span<const double> values, std::uint64_t stream) {
    std::mt19937_64 rng(stream);
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) sum += values[pick(rng)];
    return sum / static_cast<double>(values.size());
}

inline bool flip_exceeds(std::span<const double> diffs, std::uint64_t stream, double threshold) {
    std::mt19937_64 rng(stream);
    double sum = 0.0;
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
        if (i % 64 == 0) bits = rng();
        sum += (bits & 1U) ? diffs[i] : -diffs[i];
        bits >>= 1U;
    }
    return std::abs(sum) >= threshold;
}

inline bool mask_exceeds(std::span<const double> diffs, std::uint64_t mask, double threshold) {
    double sum = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
        sum += ((mask >> i) & 1U) ? -diffs[i] : diffs[i];
    }
    return std::abs(sum) >= threshold;
}

void check_dot_args(std::span<const double> rows, std::size_t dim, std::span<const double> query,
                    std::span<double> out) {
    require(dim > 0 && query.size() == dim && rows.size() == out.size() * dim,
            ErrorCode::InvalidInput, "dot_scores: shape mismatch");
}

void check_exhaustive(std::span<const double> diffs) {
    require(diffs.size() <= 30, ErrorCode::InvalidInput,
            "exhaustive sign-flip enumeration limited to 30 pairs");
}

}  // namespace

namespace serial {

void dot_scores(std::span<const double> rows, std::size_t dim, std::span<const double> query,
                std::span<double> out) {
    check_dot_args(rows, dim, query, out);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = row_dot(rows.data() + i * dim, query.data(), dim);
    }
}

std::vector<double> bootstrap_means(std::span<const double> values, std::size_t resamples,
                                    std::uint64_t seed) {
    require(!values.empty(), ErrorCode::InvalidInput, "bootstrap over empty values");
    std::vector<double> means(resamples);
    for (std::size_t b = 0; b < resamples; ++b) {
        means[b] = resample_mean(values, stream_seed(seed, b));
    }
    return means;
}

std::uint64_t sign_flip_count(std::span<const double> diffs, std::size_t permutations,
                              std::uint64_t seed, double threshold) {
    std::uint64_t count = 0;
    for (std::size_t p = 0; p < permutations; ++p) {
        count += flip_exceeds(diffs, stream_seed(seed, p), threshold) ? 1 : 0;
    }
    return count;
}

std::uint64_t sign_flip_count_exhaustive(std::span<const double> diffs, double threshold) {
    check_exhaustive(diffs);
    const std::uint64_t total = std::uint64_t{1} << diffs.size();
    std::uint64_t count = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        count += mask_exceeds(diffs, mask, threshold) ? 1 : 0;
    }
    return count;
}

}  // namespace serial

namespace parallel {

void dot_scores(std::span<const double> rows, std::size_t dim, std::span<const double> query,
                std::span<double> out) {
    check_dot_args(rows, dim, query, out);
    const auto n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] =
            row_dot(rows.data() + static_cast<std::size_t>(i) * dim, query.data(), dim);
    }
}

std::vector<double> bootstrap_means(std::span<const double> values, std::size_t resamples,
                                    std::uint64_t seed) {
    require(!values.empty(), ErrorCode::InvalidInput, "bootstrap over empty values");
    std::vector<double> means(resamples);
    const auto n = static_cast<std::int64_t>(resamples);
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < n; ++b) {
        means[static_cast<std::size_t>(b)] =
            resample_mean(values, stream_seed(seed, static_cast<std::uint64_t>(b)));
    }
    return means;
}

std::uint64_t sign_flip_count(std::span<const double> diffs, std::size_t permutations,
                              std::uint64_t seed, double threshold) {
    std::uint64_t count = 0;
    const auto n = static_cast<std::int64_t>(permutations);
#pragma omp parallel for schedule(static) reduction(+ : count)
    for (std::int64_t p = 0; p < n; ++p) {
        count += flip_exceeds(diffs, stream_seed(seed, static_cast<std::uint64_t>(p)), threshold) ? 1 : 0;
    }
    return count;
}

std::uint64_t sign_flip_count_exhaustive(std::span<const double> diffs, double threshold) {
    check_exhaustive(diffs);
    const auto total = static_cast<std::int64_t>(std::uint64_t{1} << diffs.size());
    std::uint64_t count = 0;
#pragma omp parallel for schedule(static) reduction(+ : count)
    for (std::int64_t mask = 0; mask < total; ++mask) {
        count += mask_exceeds(diffs, static_cast<std::uint64_t>(mask), threshold) ? 1 : 0;
    }
    return count;
}

}  // namespace parallel

int max_threads() {
#if defined(_OPENMP)
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace archsearch::kernels
