#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "archsearch/error.hpp"
#include "archsearch/hash.hpp"
#include "archsearch/index.hpp"
#include "archsearch/shard_io.hpp"
#include "fixtures.hpp"

using namespace archsearch;
using namespace archsearch::index;
using fixtures::doc;

namespace {

std::vector<ScoredDoc> brute_force_cosine(const HybridIndex& idx, const std::vector<double>& q, std::size_t k) {
    std::vector<ScoredDoc> all;
    for (std::size_t s = 0; s < idx.shard_count(); ++s) {
        for (const auto& d : idx.shard(s).docs) {
            double dot = 0, qq = 0, dd = 0;
            for (std::size_t i = 0; i < q.size(); ++i) {
                dot += q[i] * d.embedding.vector[i];
                qq += q[i] * q[i];
                dd += d.embedding.vector[i] * d.embedding.vector[i];
            }
            all.push_back({d.doc_id, dot / std::sqrt(qq * dd)});
        }
    }
    std::sort(all.begin(), all.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        return a.score != b.score ? a.score > b.score : a.doc_id < b.doc_id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

std::vector<std::string> words() {
    return {"pump", "valve", "motor", "breaker", "panel", "cable", "tray", "relay", "feeder", "bus"};
}

void fill_random(HybridIndex& idx, std::size_t n, std::mt19937_64& rng) {
    const auto w = words();
    for (std::size_t i = 0; i < n; ++i) {
        std::string text;
        const int len = 1 + static_cast<int>(rng() % 8);
        for (int t = 0; t < len; ++t) text += w[rng() % w.size()] + " ";
        idx.add_document(doc("D" + std::to_string(1000 + i), text, fixtures::random_unit(idx.dim(), rng)));
    }
}

}  // namespace

TEST(Bm25, TwoDocHandExample) {
    HybridIndex idx(1, 2);
    idx.add_document(doc("doc1", "a a b", {1, 0}));
    idx.add_document(doc("doc2", "b", {0, 1}));
    const std::vector<std::string> qa = {"a"};
    const std::vector<std::string> qb = {"b"};
    // idf(a) = ln(1 + 1.5/1.5); tf 2, dl 3, avgdl 2: 2*2.2/(2 + 1.2*(0.25 + 0.75*1.5))
    EXPECT_NEAR(idx.bm25_score(qa, "doc1"), 0.835574683414728592174, 1e-9);
    EXPECT_EQ(idx.bm25_score(qa, "doc2"), 0.0);
    EXPECT_NEAR(idx.bm25_score(qb, "doc1"), 0.151361292432717048, 1e-9);
    EXPECT_NEAR(idx.bm25_score(qb, "doc2"), 0.229204242826685816, 1e-9);
    EXPECT_THROW(idx.bm25_score(qa, "doc3"), Error);
}

TEST(Bm25, AdditiveOverTerms) {
    std::mt19937_64 rng(4);
    HybridIndex idx(3, 4);
    fill_random(idx, 40, rng);
    const std::vector<std::string> q = {"pump", "relay", "bus"};
    for (std::size_t s = 0; s < idx.shard_count(); ++s) {
        for (const auto& d : idx.shard(s).docs) {
            double sum = 0;
            for (const auto& t : q) sum += idx.bm25_score(std::vector<std::string>{t}, d.doc_id);
            EXPECT_NEAR(idx.bm25_score(q, d.doc_id), sum, 1e-12);
        }
    }
}

TEST(Bm25, TfMonotone) {
    // Raising tf at fixed document length and df never lowers the score.
    std::mt19937_64 rng(5);
    const auto w = words();
    for (int t = 0; t < 50; ++t) {
        const int len = 4 + static_cast<int>(rng() % 6);
        std::vector<std::string> body(static_cast<std::size_t>(len));
        for (auto& x : body) x = w[1 + rng() % (w.size() - 1)];
        body[0] = "pump";
        double prev = -1;
        for (int tf = 1; tf <= len; ++tf) {
            HybridIndex idx(1, 2);
            idx.add_document(doc("other", "pump motor bus cable", {0, 1}));
            std::string text;
            for (int i = 0; i < len; ++i) text += (i < tf ? std::string("pump") : body[static_cast<std::size_t>(i)]) + " ";
            idx.add_document(doc("x", text, {1, 0}));
            const double s = idx.bm25_score(std::vector<std::string>{"pump"}, "x");
            EXPECT_GE(s, prev);
            prev = s;
        }
    }
}

TEST(Bm25, FieldWeightsApply) {
    HybridIndex idx(1, 2);
    auto d1 = doc("n", "", {1, 0});
    d1.fields[static_cast<std::size_t>(Field::DrawingNumber)] = "59x1235";
    auto d2 = doc("f", "59x1235", {0, 1});
    idx.add_document(d1);
    idx.add_document(d2);
    const auto top = idx.sparse_topk(std::vector<std::string>{"59x1235"}, 2);
    ASSERT_EQ(top.size(), 2u);
    EXPECT_EQ(top[0].doc_id, "n");
}

TEST(AddDocument, UniqueTermFound) {
    HybridIndex idx(2, 2);
    idx.add_document(doc("d1", "zebra crossing", {1, 0}));
    idx.add_document(doc("d2", "pump", {0, 1}));
    const auto top = idx.sparse_topk(std::vector<std::string>{"zebra"}, 5);
    ASSERT_EQ(top.size(), 1u);
    EXPECT_EQ(top[0].doc_id, "d1");
}

TEST(AddDocument, DuplicateConflicts) {
    HybridIndex idx(2, 2);
    idx.add_document(doc("d1", "x", {1, 0}));
    try {
        idx.add_document(doc("d1", "y", {0, 1}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Conflict);
    }
    EXPECT_EQ(idx.size(), 1u);
}

TEST(AddDocument, DimensionMismatch) {
    HybridIndex idx(2, 3);
    try {
        idx.add_document(doc("d1", "x", {1, 0}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
    }
}

TEST(AddDocument, ShardAssignmentMatchesHashRule) {
    std::mt19937_64 rng(8);
    HybridIndex idx(4, 3);
    fill_random(idx, 100, rng);
    for (std::size_t s = 0; s < 4; ++s) {
        for (const auto& d : idx.shard(s).docs) {
            // FNV-1a 64 recomputed by hand
            std::uint64_t h = 14695981039346656037ULL;
            for (unsigned char c : d.doc_id) {
                h ^= c;
                h *= 1099511628211ULL;
            }
            EXPECT_EQ(h % 4, s) << d.doc_id;
        }
    }
    EXPECT_EQ(idx.size(), 100u);
}

TEST(AddDocument, DfRecount) {
    std::mt19937_64 rng(9);
    HybridIndex idx(3, 2);
    fill_random(idx, 60, rng);
    std::map<std::string, std::size_t> df;
    for (std::size_t s = 0; s < 3; ++s) {
        for (const auto& d : idx.shard(s).docs) {
            auto toks = tokenize(d.field(Field::FullText));
            std::sort(toks.begin(), toks.end());
            toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
            for (const auto& t : toks) ++df[t];
        }
    }
    for (const auto& [t, n] : df) {
        EXPECT_EQ(idx.document_frequency(t), n) << t;
        EXPECT_LE(n, idx.size());
    }
    EXPECT_GT(idx.average_length(), 0.0);
}

TEST(DenseTopk, SelfMatchAndOrthogonal) {
    HybridIndex idx(2, 3);
    idx.add_document(doc("a", "", {1, 0, 0}));
    idx.add_document(doc("b", "", {0, 1, 0}));
    const std::vector<double> qa = {1, 0, 0};
    const auto top = idx.dense_topk(qa, 1);
    ASSERT_EQ(top.size(), 1u);
    EXPECT_EQ(top[0].doc_id, "a");
    EXPECT_NEAR(top[0].score, 1.0, 1e-9);
    const std::vector<double> qz = {0, 0, 1};
    for (const auto& s : idx.dense_topk(qz, 2)) EXPECT_EQ(s.score, 0.0);
    // ties go to doc_id order
    const auto tied = idx.dense_topk(qz, 2);
    EXPECT_EQ(tied[0].doc_id, "a");
}

TEST(DenseTopk, EmptyIndex) {
    HybridIndex idx(2, 3);
    const std::vector<double> q = {1, 0, 0};
    EXPECT_TRUE(idx.dense_topk(q, 5).empty());
}

TEST(DenseTopk, ExactEqualsBruteForce) {
    std::mt19937_64 rng(12);
    for (std::size_t n : {5u, 50u, 700u}) {
        HybridIndex idx(4, 16);
        fill_random(idx, n, rng);
        for (int t = 0; t < 10; ++t) {
            const auto q = fixtures::random_unit(16, rng);
            const auto exact = idx.dense_topk(q, 3);
            const auto brute = brute_force_cosine(idx, q, 3);
            ASSERT_EQ(exact.size(), brute.size());
            for (std::size_t i = 0; i < exact.size(); ++i) {
                EXPECT_EQ(exact[i].doc_id, brute[i].doc_id);
                EXPECT_NEAR(exact[i].score, brute[i].score, 1e-12);
            }
        }
    }
}

TEST(DenseTopk, ApproximateRecallAfterCalibration) {
    std::mt19937_64 rng(13);
    HybridIndex idx(4, 24);
    fill_random(idx, 2000, rng);
    idx.build_ann();
    const double recall = idx.calibrate_ann(0.95, 200);
    EXPECT_GE(recall, 0.95);
    EXPECT_GE(idx.ann_self_test(10, 200), 0.95);
}

TEST(ShardIo, RoundTripReplay) {
    std::mt19937_64 rng(14);
    HybridIndex idx(4, 8);
    fill_random(idx, 50, rng);
    const auto dir = fixtures::scratch("roundtrip");
    save_shards(idx, dir);
    const auto loaded = load_shards(dir);
    ASSERT_TRUE(loaded.failed.empty());
    const auto w = words();
    for (int t = 0; t < 10; ++t) {
        const std::vector<std::string> q = {w[rng() % w.size()], w[rng() % w.size()]};
        const auto a = idx.sparse_topk(q, 20);
        const auto b = loaded.index->sparse_topk(q, 20);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_EQ(a[i].doc_id, b[i].doc_id);
            EXPECT_EQ(a[i].score, b[i].score);
        }
        const auto qv = fixtures::random_unit(8, rng);
        const auto da = idx.dense_topk(qv, 10);
        const auto db = loaded.index->dense_topk(qv, 10);
        for (std::size_t i = 0; i < da.size(); ++i) {
            EXPECT_EQ(da[i].doc_id, db[i].doc_id);
            EXPECT_EQ(da[i].score, db[i].score);
        }
    }
}

TEST(ShardIo, EmptyRoundTrip) {
    HybridIndex idx(3, 4);
    const auto dir = fixtures::scratch("empty");
    save_shards(idx, dir);
    const auto loaded = load_shards(dir);
    EXPECT_EQ(loaded.index->size(), 0u);
    EXPECT_EQ(loaded.index->shard_count(), 3u);
}

TEST(ShardIo, TruncatedShardIsCorrupt) {
    std::mt19937_64 rng(15);
    HybridIndex idx(4, 8);
    fill_random(idx, 60, rng);
    const auto dir = fixtures::scratch("truncated");
    const auto manifest = save_shards(idx, dir);
    const auto victim = dir / manifest.shards[1].path;
    const auto size = std::filesystem::file_size(victim);
    std::filesystem::resize_file(victim, size / 2);

    try {
        load_shards(dir);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CorruptIndex);
    }
    LoadOptions partial;
    partial.allow_partial = true;
    const auto loaded = load_shards(dir, partial);
    ASSERT_EQ(loaded.failed.size(), 1u);
    EXPECT_EQ(loaded.failed[0].index, 1u);
    EXPECT_EQ(loaded.index->size(), 60u - idx.shard(1).size());
}

TEST(ShardIo, FlippedByteFailsChecksum) {
    std::mt19937_64 rng(16);
    HybridIndex idx(2, 8);
    fill_random(idx, 20, rng);
    const auto dir = fixtures::scratch("flipped");
    const auto manifest = save_shards(idx, dir);
    const auto victim = dir / manifest.shards[0].path;
    std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(-20, std::ios::end);
    char c;
    f.get(c);
    f.seekp(-20, std::ios::end);
    f.put(static_cast<char>(c ^ 0x5a));
    f.close();
    EXPECT_THROW(load_shards(dir), Error);
}

TEST(ShardIo, RejectsForeignAssignmentRule) {
    HybridIndex idx(2, 4);
    const auto dir = fixtures::scratch("rule");
    auto m = to_json(save_shards(idx, dir));
    m["assignment_rule"] = "round-robin";
    try {
        manifest_from_json(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CorruptIndex);
    }
}
