#include "archsearch/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "archsearch/error.hpp"
#include "archsearch/kernels.hpp"

namespace archsearch::stats {

namespace {

void check_label(int v) {
    require(v >= 0 && v <= 2, ErrorCode::InvalidInput, "labels must lie in {0,1,2}");
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double q) {
    require(!sorted.empty(), ErrorCode::InvalidInput, "quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval aggregate(std::span<const double> values, const BootstrapConfig& cfg) {
    require(!values.empty(), ErrorCode::InvalidInput, "aggregate over empty values");
    require(cfg.resamples >= 1, ErrorCode::InvalidInput, "bootstrap needs at least one resample");
    require(cfg.confidence > 0.0 && cfg.confidence < 1.0, ErrorCode::InvalidInput, "confidence must lie in (0,1)");
    Interval out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    auto means = cfg.parallel ? kernels::parallel::bootstrap_means(values, cfg.resamples, cfg.seed)
                              : kernels::serial::bootstrap_means(values, cfg.resamples, cfg.seed);
    std::sort(means.begin(), means.end());
    const double tail = (1.0 - cfg.confidence) / 2.0;
    out.lo = quantile_sorted(means, tail);
    out.hi = quantile_sorted(means, 1.0 - tail);
    // Guard float drift on constant samples so the interval always covers the mean.
    out.lo = std::min(out.lo, out.mean);
    out.hi = std::max(out.hi, out.mean);
    return out;
}

double paired_randomization_test(std::span<const double> a, std::span<const double> b,
                                 const PermutationConfig& cfg) {
    require(a.size() == b.size(), ErrorCode::InvalidInput, "paired test needs equal-length samples");
    require(!a.empty(), ErrorCode::InvalidInput, "paired test over empty samples");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double observed = std::abs(std::accumulate(d.begin(), d.end(), 0.0));
    if (observed == 0.0 && std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; })) return 1.0;
    // Sums are compared with a relative tolerance so that re-associated
    // floating-point sums equal to the observed one still count.
    const double threshold = observed - 1e-12 * std::max(1.0, observed);

    const bool exhaustive = d.size() < 63 && (std::uint64_t{1} << d.size()) <= cfg.permutations && d.size() <= 30;
    if (exhaustive) {
        const auto count = cfg.parallel ? kernels::parallel::sign_flip_count_exhaustive(d, threshold)
                                        : kernels::serial::sign_flip_count_exhaustive(d, threshold);
        return static_cast<double>(count) / static_cast<double>(std::uint64_t{1} << d.size());
    }
    const auto count = cfg.parallel ? kernels::parallel::sign_flip_count(d, cfg.permutations, cfg.seed, threshold)
                                    : kernels::serial::sign_flip_count(d, cfg.permutations, cfg.seed, threshold);
    return static_cast<double>(count + 1) / static_cast<double>(cfg.permutations + 1);
}

double win_rate(std::uint64_t wins, std::uint64_t losses, std::uint64_t /*ties*/) {
    if (wins + losses == 0) fail(ErrorCode::UndefinedRate, "win rate undefined: no wins or losses");
    return 100.0 * static_cast<double>(wins) / static_cast<double>(wins + losses);
}

double cohen_kappa_quadratic(std::span<const int> a, std::span<const int> b) {
    require(a.size() == b.size(), ErrorCode::InvalidInput, "kappa needs equal-length label vectors");
    require(!a.empty(), ErrorCode::InvalidInput, "kappa over empty labels");
    constexpr int K = 3;
    std::array<std::array<double, K>, K> obs{};
    std::array<double, K> ra{};
    std::array<double, K> rb{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        check_label(a[i]);
        check_label(b[i]);
        obs[a[i]][b[i]] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    const double n = static_cast<double>(a.size());
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
            const double w = static_cast<double>((i - j) * (i - j)) / static_cast<double>((K - 1) * (K - 1));
            num += w * obs[i][j] / n;
            den += w * (ra[i] / n) * (rb[j] / n);
        }
    }
    if (den == 0.0) fail(ErrorCode::DegenerateAgreement, "kappa undefined: expected disagreement is zero");
    return 1.0 - num / den;
}

double fleiss_kappa(const std::vector<std::vector<int>>& labels) {
    require(!labels.empty(), ErrorCode::InvalidInput, "Fleiss kappa needs at least one item");
    const std::size_t raters = labels.front().size();
    require(raters >= 2, ErrorCode::InvalidInput, "Fleiss kappa needs at least two raters");
    constexpr int K = 3;
    std::array<double, K> totals{};
    double p_bar = 0.0;
    for (const auto& row : labels) {
        require(row.size() == raters, ErrorCode::InvalidInput, "Fleiss kappa needs a complete matrix");
        std::array<double, K> n{};
        for (int v : row) {
            require(v >= 0, ErrorCode::InvalidInput, "Fleiss kappa needs a complete matrix");
            check_label(v);
            n[v] += 1.0;
            totals[v] += 1.0;
        }
        double agree = 0.0;
        for (double c : n) agree += c * (c - 1.0);
        p_bar += agree / (static_cast<double>(raters) * (static_cast<double>(raters) - 1.0));
    }
    const double items = static_cast<double>(labels.size());
    p_bar /= items;
    double p_e = 0.0;
    for (double t : totals) {
        const double p = t / (items * static_cast<double>(raters));
        p_e += p * p;
    }
    if (p_e >= 1.0) fail(ErrorCode::DegenerateAgreement, "Fleiss kappa undefined: a single category was used");
    return (p_bar - p_e) / (1.0 - p_e);
}

double kendall_tau_b(std::span<const double> xs, std::span<const double> ys) {
    require(xs.size() == ys.size(), ErrorCode::InvalidInput, "kendall tau needs equal-length samples");
    require(xs.size() >= 2, ErrorCode::InvalidInput, "kendall tau needs at least two pairs");
    double concordant = 0.0;
    double discordant = 0.0;
    double tie_x = 0.0;
    double tie_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t j = i + 1; j < xs.size(); ++j) {
            const double dx = xs[i] - xs[j];
            const double dy = ys[i] - ys[j];
            if (dx == 0.0 && dy == 0.0) continue;
            if (dx == 0.0) {
                tie_x += 1.0;
            } else if (dy == 0.0) {
                tie_y += 1.0;
            } else if ((dx > 0) == (dy > 0)) {
                concordant += 1.0;
            } else {
                discordant += 1.0;
            }
        }
    }
    const double den = std::sqrt((concordant + discordant + tie_x) * (concordant + discordant + tie_y));
    if (den == 0.0) fail(ErrorCode::DegenerateAgreement, "kendall tau undefined: a sample is constant");
    return (concordant - discordant) / den;
}

}  // namespace archsearch::stats
