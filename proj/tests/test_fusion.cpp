#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "archsearch/error.hpp"
#include "archsearch/fusion.hpp"
#include "fixtures.hpp"

using namespace archsearch;
using namespace archsearch::fusion;

namespace {

index::DocEntry drawing(const std::string& id, std::optional<std::string> facility, std::optional<std::string> rev) {
    auto e = fixtures::doc(id, "", fixtures::unit({1, 0}));
    extraction::DrawingMetadata m;
    m.drawing_number = id;
    m.facility_tag = std::move(facility);
    m.revision = rev;
    if (rev) m.revision_history = {*rev};
    e.metadata = m;
    return e;
}

index::DocEntry policy(const std::string& id) {
    auto e = fixtures::doc(id, "", fixtures::unit({0, 1}), Kind::Document);
    extraction::DocumentMetadata m;
    m.doc_class = DocClass::Policy;
    e.metadata = m;
    return e;
}

Candidate cand(const std::string& id, double sparse, double dense) {
    Candidate c;
    c.doc_id = id;
    c.s_sparse = sparse;
    c.s_dense = dense;
    return c;
}

std::vector<std::string> ids(const std::vector<Candidate>& cs) {
    std::vector<std::string> out;
    for (const auto& c : cs) out.push_back(c.doc_id);
    return out;
}

}  // namespace

TEST(Znorm, OneTwoThree) {
    const std::vector<double> x = {1, 2, 3};
    const auto z = znorm(x, 1e-6);
    EXPECT_NEAR(z[0], -1.22474487139158904909, 1e-15);
    EXPECT_EQ(z[1], 0.0);
    EXPECT_NEAR(z[2], 1.22474487139158904909, 1e-15);
}

TEST(Znorm, ConstantList) {
    const std::vector<double> x = {5, 5, 5};
    for (double v : znorm(x, 1e-6)) EXPECT_EQ(v, 0.0);
}

TEST(Znorm, EmptyRejected) {
    EXPECT_THROW(znorm(std::vector<double>{}, 1e-6), Error);
}

TEST(Znorm, AffineInvariantAndCentered) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> x(2 + rng() % 30);
        for (auto& v : x) v = u(rng);
        const double a = 0.1 + std::fabs(u(rng));
        const double b = u(rng);
        std::vector<double> y;
        for (double v : x) y.push_back(a * v + b);
        const auto zx = znorm(x, 1e-9);
        const auto zy = znorm(y, 1e-9);
        double mean = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            EXPECT_NEAR(zx[i], zy[i], 1e-9);
            mean += zx[i];
        }
        EXPECT_NEAR(mean / static_cast<double>(x.size()), 0.0, 1e-9);
    }
}

TEST(Fuse, HalfLambdaFullTie) {
    const std::vector<double> zs = {1, -1};
    const std::vector<double> zd = {-1, 1};
    const auto s = fuse(zs, zd, 0.5);
    EXPECT_EQ(s[0], 0.0);
    EXPECT_EQ(s[1], 0.0);
}

TEST(Fuse, MismatchedSets) {
    EXPECT_THROW(fuse(std::vector<double>{1, 2}, std::vector<double>{1}, 0.5), Error);
}

TEST(Fuse, EndpointsFollowSingleModality) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 10);
    RerankParams zero;
    zero.alpha = zero.beta = zero.gamma = 0;
    for (int t = 0; t < 100; ++t) {
        std::vector<Candidate> cs;
        for (int i = 0; i < 12; ++i) cs.push_back(cand("d" + std::to_string(i), u(rng), u(rng)));
        for (double lambda : {0.0, 1.0}) {
            auto work = cs;
            apply_fusion(work, FusionParams{lambda, 1e-6});
            score_and_sort(work, zero);
            auto expect = cs;
            std::sort(expect.begin(), expect.end(), [&](const Candidate& a, const Candidate& b) {
                const double sa = lambda == 1.0 ? a.s_sparse : a.s_dense;
                const double sb = lambda == 1.0 ? b.s_sparse : b.s_dense;
                return sa != sb ? sa > sb : a.doc_id < b.doc_id;
            });
            EXPECT_EQ(ids(work), ids(expect));
        }
    }
}

TEST(Rerank, ZeroParamsKeepFusedOrderWithTieKeys) {
    std::vector<Candidate> cs = {cand("c", 1, 1), cand("a", 1, 1), cand("b", 3, 3)};
    apply_fusion(cs, FusionParams{0.5, 1e-6});
    cs[0].quality = 0.9;  // c beats a on the tie key
    RerankParams zero;
    zero.alpha = zero.beta = zero.gamma = 0;
    score_and_sort(cs, zero);
    EXPECT_EQ(ids(cs), (std::vector<std::string>{"b", "c", "a"}));
}

TEST(Rerank, TieKeyOrder) {
    RerankParams p;
    Candidate a = cand("a", 0, 0);
    Candidate b = cand("b", 0, 0);
    a.recency = 0.5;
    b.recency = -1;  // undated
    EXPECT_TRUE(ranks_before(a, b, p));
    b.recency = 0.5;
    b.quality = 0.2;
    EXPECT_TRUE(ranks_before(b, a, p));
    a.quality = 0.2;
    EXPECT_TRUE(ranks_before(a, b, p));
    p.quality_weight = 0;
    a.quality = 0;
    EXPECT_TRUE(ranks_before(a, b, p));
}

TEST(Rerank, FacilityMatchAddsAlpha) {
    SlotParser parser;
    const auto q = parser.parse("pump drawing at R8E8700");
    ASSERT_TRUE(q.facility.has_value());
    EXPECT_EQ(*q.facility, "R8E8700");
    std::vector<Candidate> cs = {cand("m", 2, 1), cand("n", 1, 2)};
    const auto dm = drawing("m", "R8E8700", std::nullopt);
    const auto dn = drawing("n", "Q1Q1111", std::nullopt);
    std::vector<const index::DocEntry*> docs = {&dm, &dn};
    apply_fusion(cs, FusionParams{0.5, 1e-6});
    RerankParams p;
    p.alpha = 0.5;
    rerank(cs, docs, q, p);
    const auto& m = cs[0].doc_id == "m" ? cs[0] : cs[1];
    EXPECT_EQ(m.match_region, 1);
    EXPECT_EQ(m.s_final, m.s_lambda + 0.5);
    const auto& n = cs[0].doc_id == "n" ? cs[0] : cs[1];
    EXPECT_EQ(n.match_region, 0);
    EXPECT_EQ(n.s_final, n.s_lambda);
}

TEST(Rerank, RevisionConsistency) {
    SlotParser parser;
    const auto q = parser.parse("pump drawing rev C");
    const auto c = drawing("c", std::nullopt, "C");
    const auto b = drawing("b", std::nullopt, "B");
    EXPECT_EQ(consistency_rev(c, q), 0.0);
    EXPECT_EQ(consistency_rev(b, q), -1.0);
    EXPECT_EQ(match_region(c, q), 1);
    EXPECT_EQ(match_region(b, q), 0);
    const auto ex = parser.parse("pump drawing excluding rev B");
    EXPECT_EQ(consistency_rev(b, ex), -1.0);
    EXPECT_EQ(consistency_rev(c, ex), 0.0);
}

TEST(Rerank, OffTypeDropsPolicyBelowDrawings) {
    // 5 candidates, allowed types {Drawing}, gamma = 10: the policy must land
    // below every drawing whose s_lambda >= its s_lambda - 10 (brute force).
    SlotParser parser;
    const auto q = parser.parse("cable tray layout", std::vector<ItemType>{ItemType::Drawing});
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 5);
    for (int t = 0; t < 100; ++t) {
        std::vector<index::DocEntry> entries = {policy("p"), drawing("d1", {}, {}), drawing("d2", {}, {}),
                                                drawing("d3", {}, {}), drawing("d4", {}, {})};
        std::vector<Candidate> cs;
        for (const auto& e : entries) cs.push_back(cand(e.doc_id, u(rng), u(rng)));
        std::vector<const index::DocEntry*> docs;
        for (const auto& e : entries) docs.push_back(&e);
        apply_fusion(cs, FusionParams{0.5, 1e-6});
        RerankParams p;
        p.gamma = 10;
        rerank(cs, docs, q, p);
        const auto pos = [&](const std::string& id) {
            return std::find_if(cs.begin(), cs.end(), [&](const Candidate& c) { return c.doc_id == id; }) - cs.begin();
        };
        const auto& pc = cs[static_cast<std::size_t>(pos("p"))];
        EXPECT_EQ(pc.off_type, 1);
        for (const auto& c : cs) {
            if (c.doc_id == "p") continue;
            EXPECT_EQ(c.off_type, 0);
            if (c.s_lambda >= pc.s_lambda - 10) {
                EXPECT_LT(pos(c.doc_id), pos("p"));
            }
        }
    }
}

TEST(Rerank, DecompositionIdentity) {
    SlotParser parser;
    const auto q = parser.parse("drawing rev B at R8E8700");
    std::vector<index::DocEntry> entries = {drawing("a", "R8E8700", "B"), drawing("b", "R8E8700", "A"), policy("c")};
    std::vector<Candidate> cs = {cand("a", 1, 0.2), cand("b", 3, 0.9), cand("c", 0.5, 0.1)};
    std::vector<const index::DocEntry*> docs = {&entries[0], &entries[1], &entries[2]};
    apply_fusion(cs, FusionParams{0.3, 1e-6});
    RerankParams p{0.7, 0.4, 1.3, 1, 1};
    rerank(cs, docs, q, p);
    for (const auto& c : cs) {
        EXPECT_NEAR(c.s_final, c.s_lambda + 0.7 * c.match_region + 0.4 * c.consistency_rev - 1.3 * c.off_type, 1e-12);
        EXPECT_LE(c.consistency_rev, 0.0);
    }
}

TEST(Rerank, AlphaMonotone) {
    SlotParser parser;
    const auto q = parser.parse("drawing at R8E8700");
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 5);
    for (int t = 0; t < 50; ++t) {
        std::vector<index::DocEntry> entries;
        for (int i = 0; i < 6; ++i)
            entries.push_back(drawing("d" + std::to_string(i), i % 2 ? "R8E8700" : "Z9Z9999", std::nullopt));
        std::vector<Candidate> base;
        for (const auto& e : entries) base.push_back(cand(e.doc_id, u(rng), u(rng)));
        int prev_rank = 1000;
        for (double alpha : {0.0, 0.25, 0.5, 1.0, 2.0}) {
            auto cs = base;
            std::vector<const index::DocEntry*> docs;
            for (const auto& e : entries) docs.push_back(&e);
            apply_fusion(cs, FusionParams{0.5, 1e-6});
            RerankParams p;
            p.alpha = alpha;
            rerank(cs, docs, q, p);
            const int r = static_cast<int>(
                std::find_if(cs.begin(), cs.end(), [](const Candidate& c) { return c.doc_id == "d1"; }) - cs.begin());
            EXPECT_LE(r, prev_rank);
            prev_rank = r;
        }
    }
}

TEST(SlotParser, Slots) {
    SlotParser parser;
    const auto q = parser.parse("Assembly with parts list size D, 2 sheets, rev C, excluding rev A, since 2019");
    EXPECT_EQ(q.normalized_text, normalize_text(q.raw_text));
    auto has = [&](ConstraintKind k, const std::string& v, Polarity p) {
        return std::find(q.constraints.begin(), q.constraints.end(), Constraint{k, v, p}) != q.constraints.end();
    };
    EXPECT_TRUE(has(ConstraintKind::Revision, "C", Polarity::Require));
    EXPECT_TRUE(has(ConstraintKind::Revision, "A", Polarity::Exclude));
    EXPECT_TRUE(has(ConstraintKind::Size, "D", Polarity::Require));
    EXPECT_TRUE(has(ConstraintKind::SheetCount, "2", Polarity::Require));
    EXPECT_TRUE(has(ConstraintKind::PartsList, "*", Polarity::Require));
    EXPECT_TRUE(has(ConstraintKind::DateMin, "2019-01-01", Polarity::Require));
}

TEST(SlotParser, TypeKeywords) {
    SlotParser parser;
    EXPECT_EQ(parser.parse("lockout procedure").allowed_types, std::vector<ItemType>{ItemType::Procedure});
    EXPECT_EQ(parser.parse("wiring drawing").allowed_types, std::vector<ItemType>{ItemType::Drawing});
    EXPECT_TRUE(parser.parse("feedwater pump").allowed_types.empty());
    const auto forced = parser.parse("lockout procedure", std::vector<ItemType>{ItemType::Policy});
    EXPECT_EQ(forced.allowed_types, std::vector<ItemType>{ItemType::Policy});
}

TEST(Params, Validation) {
    EXPECT_THROW((FusionParams{1.5, 1e-6}.validate()), Error);
    EXPECT_THROW((FusionParams{0.5, 0}.validate()), Error);
    RerankParams r;
    r.beta = -1;
    EXPECT_THROW(r.validate(), Error);
}
