#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "archsearch/embedding.hpp"
#include "archsearch/error.hpp"
#include "archsearch/text.hpp"

using namespace archsearch;
using namespace archsearch::embedding;

namespace {

ProjectionConfig identity(std::size_t dt, std::size_t dr) {
    ProjectionConfig c;
    c.text_proj = Eigen::MatrixXd::Identity(static_cast<long>(dt), static_cast<long>(dt));
    c.region_proj = Eigen::MatrixXd::Identity(static_cast<long>(dr), static_cast<long>(dr));
    c.query_proj = Eigen::MatrixXd::Zero(static_cast<long>(dt + dr), static_cast<long>(dt));
    c.query_proj.topRows(static_cast<long>(dt)) = Eigen::MatrixXd::Identity(static_cast<long>(dt), static_cast<long>(dt));
    return c;
}

TextEmbedding text(std::vector<double> v) {
    TextEmbedding t;
    t.vector = std::move(v);
    return t;
}

double norm(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST(EmbedDocument, IdentityConcatenation) {
    RegionFeatureVector r{{0, 1}};
    const auto z = embed_document(text({1, 0}), r, identity(2, 2));
    const double h = 1 / std::sqrt(2.0);
    ASSERT_EQ(z.vector.size(), 4u);
    EXPECT_NEAR(z.vector[0], h, 1e-15);
    EXPECT_EQ(z.vector[1], 0.0);
    EXPECT_EQ(z.vector[2], 0.0);
    EXPECT_NEAR(z.vector[3], h, 1e-15);
}

TEST(EmbedDocument, ZeroProjectionIsDegenerate) {
    auto c = identity(2, 2);
    c.text_proj.setZero();
    c.region_proj.setZero();
    try {
        embed_document(text({1, 0}), RegionFeatureVector{{0, 1}}, c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateEmbedding);
    }
}

TEST(EmbedDocument, DimensionMismatch) {
    try {
        embed_document(text({1, 0, 0}), RegionFeatureVector{{0, 1}}, identity(2, 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
    }
}

TEST(EmbedDocument, UnitNormAndJointScaleInvariance) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 1);
    for (int t = 0; t < 50; ++t) {
        ProjectionConfig c;
        c.text_proj = Eigen::MatrixXd::NullaryExpr(5, 4, [&] { return n(rng); });
        c.region_proj = Eigen::MatrixXd::NullaryExpr(3, 3, [&] { return n(rng); });
        c.query_proj = Eigen::MatrixXd::NullaryExpr(8, 4, [&] { return n(rng); });
        std::vector<double> tv(4), rv(3);
        for (auto& x : tv) x = n(rng);
        for (auto& x : rv) x = n(rng);
        const auto z = embed_document(text(tv), RegionFeatureVector{rv}, c);
        EXPECT_NEAR(norm(z.vector), 1.0, 1e-9);
        for (auto& x : tv) x *= 3.5;
        for (auto& x : rv) x *= 3.5;
        const auto z2 = embed_document(text(tv), RegionFeatureVector{rv}, c);
        for (std::size_t i = 0; i < z.vector.size(); ++i) EXPECT_NEAR(z.vector[i], z2.vector[i], 1e-12);
    }
}

TEST(EmbedQuery, ThreeFourFive) {
    ProjectionConfig c;
    c.text_proj = Eigen::MatrixXd::Identity(2, 2);
    c.region_proj = Eigen::MatrixXd::Zero(0, 0);
    c.query_proj = Eigen::MatrixXd::Identity(2, 2);
    const auto z = embed_query(text({3, 4}), c);
    EXPECT_NEAR(z.vector[0], 0.6, 1e-15);
    EXPECT_NEAR(z.vector[1], 0.8, 1e-15);
    const auto z10 = embed_query(text({30, 40}), c);
    EXPECT_EQ(z.vector, z10.vector);
    EXPECT_THROW(embed_query(text({0, 0}), c), Error);
}

TEST(EmbedQuery, SharesDocumentDimension) {
    const auto c = ProjectionConfig::identity_block(16, kRegionFeatureDim, 9);
    const auto q = embed_query(stub_text_encoder("voltage monitor", 16, 1), c);
    const auto d = embed_document(stub_text_encoder("voltage monitor", 16, 1), region_features({}), c);
    EXPECT_EQ(q.vector.size(), d.vector.size());
    EXPECT_EQ(q.vector.size(), c.output_dim());
}

TEST(IdentityBlock, OrthonormalCompletion) {
    const auto c = ProjectionConfig::identity_block(4, kRegionFeatureDim, 31, 7);
    const Eigen::MatrixXd g = c.text_proj.transpose() * c.text_proj;
    EXPECT_TRUE(g.isApprox(Eigen::MatrixXd::Identity(4, 4), 1e-12));
    EXPECT_TRUE(c.region_proj.isApprox(0.05 * Eigen::MatrixXd::Identity(12, 12)));
}

TEST(StubEncoder, DeterministicAndCaseInsensitive) {
    const auto a = stub_text_encoder("Voltage Monitor", 64, 7);
    const auto b = stub_text_encoder("voltage monitor", 64, 7);
    EXPECT_EQ(a.vector, b.vector);
    EXPECT_NEAR(norm(a.vector), 1.0, 1e-12);
    EXPECT_EQ(stub_text_encoder("", 64, 7).vector, std::vector<double>(64, 0.0));
}

TEST(StubEncoder, DisjointVocabularyLessSimilar) {
    const auto a = stub_text_encoder("feedwater pump impeller", 128, 7);
    const auto b = stub_text_encoder("safety policy review", 128, 7);
    // brute-force cosine
    double dot = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < 128; ++i) {
        dot += a.vector[i] * b.vector[i];
        aa += a.vector[i] * a.vector[i];
        bb += b.vector[i] * b.vector[i];
    }
    const double cross = dot / std::sqrt(aa * bb);
    EXPECT_LT(cross, 1.0 - 1e-6);
    EXPECT_NEAR(cosine(a.vector, a.vector), 1.0, 1e-9);
    EXPECT_NEAR(cosine(a.vector, b.vector), cosine(b.vector, a.vector), 1e-15);
}

TEST(RegionFeatures, DefaultLayout) {
    std::vector<extraction::RegionExtraction> regions(1);
    regions[0].kind = RegionKind::PartsList;
    regions[0].text = "abc";
    regions[0].confidence = 0.5;
    const auto r = region_features(regions);
    ASSERT_EQ(r.vector.size(), kRegionFeatureDim);
    EXPECT_EQ(r.vector[index_of(RegionKind::PartsList)], 1.0);
    EXPECT_EQ(r.vector[index_of(RegionKind::DataBlock)], 0.0);
    EXPECT_EQ(r.vector[4 + index_of(RegionKind::PartsList)], 0.5);
    EXPECT_NEAR(r.vector[8 + index_of(RegionKind::PartsList)], std::log(4.0), 1e-15);
}

TEST(ProjectionConfig, JsonRoundTrip) {
    const auto c = ProjectionConfig::identity_block(6, 12, 3, 9);
    nlohmann::json j;
    to_json(j, c);
    ProjectionConfig back;
    from_json(j, back);
    EXPECT_TRUE(back.text_proj.isApprox(c.text_proj, 0));
    EXPECT_TRUE(back.query_proj.isApprox(c.query_proj, 0));
}
