#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "archsearch/error.hpp"
#include "archsearch/stats.hpp"
#include "oracles.hpp"

using namespace archsearch;
using namespace archsearch::stats;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::InvalidInput;
}

}  // namespace

TEST(Aggregate, ConstantValues) {
    const std::vector<double> v(40, 0.5);
    const auto i = aggregate(v);
    EXPECT_EQ(i.mean, 0.5);
    EXPECT_EQ(i.lo, 0.5);
    EXPECT_EQ(i.hi, 0.5);
}

TEST(Aggregate, ContainsMeanAndStableAcrossSeeds) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> v(375);
    for (auto& x : v) x = u(rng);
    BootstrapConfig a;
    BootstrapConfig b;
    b.seed = 99;
    const auto ia = aggregate(v, a);
    const auto ib = aggregate(v, b);
    EXPECT_LE(ia.lo, ia.mean);
    EXPECT_GE(ia.hi, ia.mean);
    EXPECT_LT(std::fabs(ia.lo - ib.lo), 0.01);
    EXPECT_LT(std::fabs(ia.hi - ib.hi), 0.01);
    const auto again = aggregate(v, a);
    EXPECT_EQ(again.lo, ia.lo);
    EXPECT_EQ(again.hi, ia.hi);
}

TEST(Aggregate, SerialAndParallelAgree) {
    std::vector<double> v = {0.1, 0.9, 0.4, 0.3, 0.7, 0.2};
    BootstrapConfig s;
    s.parallel = false;
    const auto a = aggregate(v, s);
    const auto b = aggregate(v);
    EXPECT_EQ(a.lo, b.lo);
    EXPECT_EQ(a.hi, b.hi);
}

TEST(Aggregate, EmptyRejected) {
    EXPECT_EQ(code_of([] { aggregate(std::vector<double>{}); }), ErrorCode::InvalidInput);
}

TEST(QuantileSorted, Type7) {
    const std::vector<double> v = {1, 2, 3, 4};
    EXPECT_EQ(quantile_sorted(v, 0.0), 1.0);
    EXPECT_EQ(quantile_sorted(v, 1.0), 4.0);
    EXPECT_NEAR(quantile_sorted(v, 0.5), 2.5, 1e-15);
    EXPECT_NEAR(quantile_sorted(v, 0.25), 1.75, 1e-15);
}

TEST(Randomization, IdenticalListsGiveOne) {
    const std::vector<double> a = {0.1, 0.5, 0.3, 0.9, 0.2};
    EXPECT_EQ(paired_randomization_test(a, a), 1.0);
    std::vector<double> big(50, 0.4);
    EXPECT_EQ(paired_randomization_test(big, big), 1.0);
}

TEST(Randomization, DominanceOnFiftyQueries) {
    std::vector<double> a(50, 1.0);
    std::vector<double> b(50, 0.0);
    EXPECT_LT(paired_randomization_test(a, b), 0.001);
}

TEST(Randomization, SixQueriesMatchExhaustiveEnumeration) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> a(6), b(6);
        for (auto& x : a) x = std::round(u(rng) * 4) / 4;
        for (auto& x : b) x = std::round(u(rng) * 4) / 4;
        EXPECT_EQ(paired_randomization_test(a, b), oracle::sign_flip_exhaustive(a, b));
    }
}

TEST(Randomization, LengthMismatch) {
    EXPECT_EQ(code_of([] { paired_randomization_test(std::vector<double>{1, 2}, std::vector<double>{1}); }),
              ErrorCode::InvalidInput);
}

TEST(WinRate, PublishedCells) {
    EXPECT_NEAR(win_rate(3238, 1205, 625), 72.88, 0.005);
    EXPECT_NEAR(win_rate(263, 645, 104), 28.96, 0.005);
    EXPECT_EQ(code_of([] { win_rate(0, 0, 10); }), ErrorCode::UndefinedRate);
}

TEST(CohenKappa, IdenticalIsOne) {
    const std::vector<int> a = {0, 1, 2, 2, 1, 0};
    EXPECT_NEAR(cohen_kappa_quadratic(a, a), 1.0, 1e-12);
}

TEST(CohenKappa, HandTable) {
    // observed mean (a-b)^2 = 2/6; under independent marginals
    // E = E[a^2] - 2E[a]E[b] + E[b^2] = 5/3 - 8/3 + 7/3 = 4/3, kappa = 1 - (1/3)/(4/3)
    const std::vector<int> a = {0, 0, 1, 1, 2, 2};
    const std::vector<int> b = {0, 1, 1, 2, 2, 2};
    EXPECT_NEAR(cohen_kappa_quadratic(a, b), 0.75, 1e-9);
}

TEST(CohenKappa, IndependentUniformNearZero) {
    std::mt19937_64 rng(10);
    std::vector<int> a(10000), b(10000);
    for (auto& x : a) x = static_cast<int>(rng() % 3);
    for (auto& x : b) x = static_cast<int>(rng() % 3);
    EXPECT_NEAR(cohen_kappa_quadratic(a, b), 0.0, 0.05);
}

TEST(CohenKappa, BadInput) {
    EXPECT_EQ(code_of([] { cohen_kappa_quadratic(std::vector<int>{}, std::vector<int>{}); }), ErrorCode::InvalidInput);
    EXPECT_EQ(code_of([] { cohen_kappa_quadratic(std::vector<int>{1}, std::vector<int>{1, 2}); }),
              ErrorCode::InvalidInput);
}

TEST(FleissKappa, PerfectAgreement) {
    EXPECT_NEAR(fleiss_kappa({{0, 0, 0}, {2, 2, 2}, {1, 1, 1}}), 1.0, 1e-12);
}

TEST(FleissKappa, HandMatrix) {
    // counts per item (n0,n1,n2): (2,1,0) (0,0,3) (0,2,1) (1,1,1)
    // P_i = 1/3, 1, 1/3, 0 -> Pbar = 5/12; p = (3,4,5)/12 -> Pe = 50/144
    // kappa = (5/12 - 50/144)/(1 - 50/144) = 10/94 = 5/47
    EXPECT_NEAR(fleiss_kappa({{0, 0, 1}, {2, 2, 2}, {1, 2, 1}, {0, 1, 2}}), 5.0 / 47.0, 1e-9);
}

TEST(FleissKappa, SingleCategoryDegenerate) {
    EXPECT_EQ(code_of([] { fleiss_kappa({{1, 1}, {1, 1}}); }), ErrorCode::DegenerateAgreement);
}

TEST(FleissKappa, IncompleteMatrix) {
    EXPECT_EQ(code_of([] { fleiss_kappa({{1, 0}, {1}}); }), ErrorCode::InvalidInput);
    EXPECT_EQ(code_of([] { fleiss_kappa({{1, -1}, {1, 0}}); }), ErrorCode::InvalidInput);
}

TEST(KendallTau, Examples) {
    const std::vector<double> x = {1, 2, 3, 4};
    EXPECT_NEAR(kendall_tau_b(x, x), 1.0, 1e-12);
    EXPECT_NEAR(kendall_tau_b(x, std::vector<double>{4, 3, 2, 1}), -1.0, 1e-12);
    EXPECT_NEAR(kendall_tau_b(x, std::vector<double>{1, 3, 2, 4}), 2.0 / 3.0, 1e-9);
}

TEST(KendallTau, TieCorrection) {
    // xs has one tied pair; 6 pairs: concordant 4, discordant 1, tied-in-x 1.
    // tau_b = (4-1)/sqrt((6-1)(6-0)) = 3/sqrt(30)
    EXPECT_NEAR(kendall_tau_b(std::vector<double>{1, 1, 2, 3}, std::vector<double>{1, 2, 4, 3}), 3.0 / std::sqrt(30.0),
                1e-9);
}

TEST(KendallTau, LengthMismatch) {
    EXPECT_EQ(code_of([] { kendall_tau_b(std::vector<double>{1, 2}, std::vector<double>{1}); }),
              ErrorCode::InvalidInput);
}
