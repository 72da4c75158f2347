#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "archsearch/engine.hpp"
#include "archsearch/error.hpp"
#include "archsearch/metrics.hpp"
#include "archsearch/planted.hpp"
#include "archsearch/search.hpp"
#include "archsearch/synth.hpp"
#include "fixtures.hpp"

using namespace archsearch;
using nlohmann::json;

namespace {

json drawing_record(const std::string& id, const std::string& title, const std::string& facility,
                    const std::string& revs) {
    std::string rev_text;
    for (char r : revs) rev_text += std::string("REV ") + r + "  ISSUED\n";
    const std::string data = title + "\nFACILITY " + facility + "\n";
    return json{{"file_id", id},
                {"kind", "drawing"},
                {"kind_features", {{"p_draw", 0.9}, {"h", 0.8}, {"cad_prior", 1}}},
                {"full_text", id + "\n" + data + rev_text},
                {"regions",
                 {{{"kind", "drawing_number"}, {"text", id}},
                  {{"kind", "data_block"}, {"text", data}},
                  {{"kind", "revisions_block"}, {"text", rev_text}}}}};
}

std::unique_ptr<Engine> engine_with(const std::vector<json>& records, std::size_t shards = 2) {
    EngineConfig cfg;
    cfg.shard_count = shards;
    cfg.text_dim = 64;
    auto e = std::make_unique<Engine>(cfg);
    std::stringstream in;
    for (const auto& r : records) in << r.dump() << "\n";
    const auto stats = e->ingestor().ingest_jsonl(in, e->index());
    EXPECT_EQ(stats.failed, 0u);
    return e;
}

search::ValidationQuery pool_of(const std::vector<std::tuple<std::string, double, double>>& rows,
                                std::map<std::string, int> grades) {
    search::ValidationQuery v;
    for (const auto& [id, s, d] : rows) {
        fusion::Candidate c;
        c.doc_id = id;
        c.s_sparse = s;
        c.s_dense = d;
        v.pool.candidates.push_back(c);
        v.pool.docs.push_back(fixtures::doc(id, "", fixtures::unit({1, 0})));
    }
    v.grades = std::move(grades);
    return v;
}

search::SearchParams rerank_off() {
    search::SearchParams p;
    p.rerank_enabled = false;
    return p;
}

}  // namespace

TEST(Search, EmptyIndexEmptyResult) {
    Engine e(EngineConfig{});
    const auto r = e.searcher().search("anything", 3, {});
    EXPECT_TRUE(r.results.empty());
}

TEST(Search, SingleDocAlwaysFirst) {
    auto e = engine_with({drawing_record("DWG-1", "PUMP LAYOUT", "R8E8700", "A")});
    for (const char* q : {"pump", "unrelated words entirely", "R8E8700"}) {
        const auto r = e->searcher().search(q, 3, {});
        ASSERT_EQ(r.results.size(), 1u) << q;
        EXPECT_EQ(r.results[0].doc.doc_id, "DWG-1");
    }
}

TEST(Search, KLargerThanCorpusReturnsAll) {
    std::vector<json> recs;
    for (int i = 0; i < 7; ++i) recs.push_back(drawing_record("DWG-" + std::to_string(i), "PUMP LAYOUT", "R8E8700", "A"));
    auto e = engine_with(recs);
    const auto r = e->searcher().search("pump layout", 50, {});
    EXPECT_EQ(r.results.size(), 7u);
    for (std::size_t i = 1; i < r.results.size(); ++i)
        EXPECT_FALSE(fusion::ranks_before(r.results[i].scores, r.results[i - 1].scores, search::SearchParams{}.rerank));
}

TEST(Search, ScoresAlignWithDocs) {
    const auto corpus = synth::generate(synth::SynthConfig{2, 7});
    auto planted = synth::build_planted_index(corpus);
    const auto r = planted.engine->searcher().search("feedwater pump general arrangement rev B", 5, {});
    for (const auto& h : r.results) {
        EXPECT_EQ(h.scores.doc_id, h.doc.doc_id);
        EXPECT_NEAR(h.scores.s_final,
                    h.scores.s_lambda + 0.5 * h.scores.match_region + 0.5 * h.scores.consistency_rev -
                        1.0 * h.scores.off_type,
                    1e-12);
    }
}

TEST(Search, DeterministicOutput) {
    const auto corpus = synth::generate(synth::SynthConfig{2, 7});
    auto planted = synth::build_planted_index(corpus);
    const auto s = planted.engine->searcher();
    for (const auto& q : corpus.queries) {
        const auto a = search::to_json(s.search(q.text, 3, {}), false).dump();
        const auto b = search::to_json(s.search(q.text, 3, {}), false).dump();
        EXPECT_EQ(a, b);
    }
}

TEST(Search, OnlyConstraintSatisfierRanksFirstWithLargeAlpha) {
    // 20 drawings over 4 facilities and revision histories; exactly one is at
    // R8E8700 with latest revision C.
    const std::vector<std::string> facilities = {"R8E8700", "K2L3456", "M9N1234", "P4Q5678"};
    const std::vector<std::string> revs = {"A", "AB", "ABC", "ABCD", "ABC"};
    std::vector<json> recs;
    int planted = 0;
    for (int i = 0; i < 20; ++i) {
        const auto& fac = facilities[static_cast<std::size_t>(i % 4)];
        auto rv = revs[static_cast<std::size_t>(i / 4)];
        if (fac == "R8E8700" && rv == "ABC") {
            if (planted++ > 0) rv = "AB";
        }
        recs.push_back(drawing_record("DWG-" + std::to_string(500 + i), "SWITCHGEAR ONE LINE DIAGRAM", fac, rv));
    }
    auto e = engine_with(recs, 3);
    const auto searcher = e->searcher();
    const auto q = searcher.parse("switchgear one line diagram rev C at R8E8700");

    // Exhaustive oracle over the index: which docs satisfy both constraints?
    std::vector<std::string> satisfying;
    for (std::size_t s = 0; s < e->index().shard_count(); ++s) {
        for (const auto& d : e->index().shard(s).docs) {
            const auto& m = std::get<extraction::DrawingMetadata>(d.metadata);
            if (m.facility_tag == std::optional<std::string>("R8E8700") && m.revision == std::optional<std::string>("C"))
                satisfying.push_back(d.doc_id);
        }
    }
    ASSERT_EQ(satisfying.size(), 1u);

    search::SearchParams p;
    p.rerank.alpha = 10.0;
    const auto r = searcher.search(q, 3, p);
    ASSERT_FALSE(r.results.empty());
    EXPECT_EQ(r.results[0].doc.doc_id, satisfying[0]);
    EXPECT_EQ(r.results[0].scores.match_region, 1);
}

TEST(Search, AllowedTypesKeepsDocumentsBelowEqualDrawings) {
    const auto corpus = synth::generate(synth::SynthConfig{3, 11});
    auto planted = synth::build_planted_index(corpus);
    const auto s = planted.engine->searcher();
    search::SearchParams p;
    p.rerank.gamma = 1.0;
    for (const auto& q : corpus.queries) {
        const auto pool = s.gather(s.parse(q.text, std::vector<ItemType>{ItemType::Drawing}), p);
        const auto r = s.rank(pool, pool.candidates.size(), p);
        for (std::size_t i = 0; i < r.results.size(); ++i) {
            if (r.results[i].doc.item_type() == ItemType::Drawing) continue;
            for (std::size_t j = i + 1; j < r.results.size(); ++j) {
                const auto& later = r.results[j];
                if (later.doc.item_type() != ItemType::Drawing) continue;
                // a drawing below an off-type item must have scored strictly lower
                // before the penalty
                const double base_doc = r.results[i].scores.s_final + 1.0 * r.results[i].scores.off_type;
                EXPECT_EQ(r.results[i].scores.off_type, 1);
                EXPECT_LT(later.scores.s_final, base_doc);
            }
        }
    }
}

TEST(TuneLambda, SparsePerfectDenseInverted) {
    std::vector<search::ValidationQuery> v;
    for (int q = 0; q < 4; ++q)
        v.push_back(pool_of({{"a", 3, 1}, {"b", 2, 2}, {"c", 1, 3}}, {{"a", 2}, {"b", 1}}));
    const auto grid = search::default_lambda_grid();
    EXPECT_EQ(search::tune_lambda(v, grid, rerank_off()).lambda, 1.0);
}

TEST(TuneLambda, MirrorPicksZero) {
    std::vector<search::ValidationQuery> v;
    for (int q = 0; q < 4; ++q)
        // dense ranks a first by a hair; any sparse weight lifts x above a
        v.push_back(pool_of({{"a", 0, 1.001}, {"x", 1, 1.0}, {"y", 0.5, 0}}, {{"a", 2}}));
    const auto grid = search::default_lambda_grid();
    const auto r = search::tune_lambda(v, grid, rerank_off());
    EXPECT_EQ(r.lambda, 0.0);
    for (const auto& [lambda, score] : r.curve) {
        if (lambda > 0) {
            EXPECT_LT(score, r.score);
        }
    }
}

TEST(TuneLambda, MixedCorpusPrefersInterior) {
    // Half the queries are solved only by the sparse ranking, half only by the
    // dense one; the relevant doc is strong on one side and decent on the other.
    std::vector<search::ValidationQuery> v;
    for (int q = 0; q < 6; ++q) {
        if (q % 2 == 0) {
            v.push_back(pool_of({{"r", 10, 7}, {"x", 0, 10}, {"f1", 5, 0}, {"f2", 4, 1}, {"f3", 3, 2}}, {{"r", 2}}));
        } else {
            v.push_back(pool_of({{"r", 7, 10}, {"x", 10, 0}, {"f1", 0, 5}, {"f2", 1, 4}, {"f3", 2, 3}}, {{"r", 2}}));
        }
    }
    const auto grid = search::default_lambda_grid();
    const auto t = search::tune_lambda(v, grid, rerank_off(), 3);
    EXPECT_GT(t.lambda, 0.0);
    EXPECT_LT(t.lambda, 1.0);
    // exhaustive grid: the curve itself is the oracle
    const double at0 = t.curve.front().second;
    const double at1 = t.curve.back().second;
    EXPECT_GT(t.score, at0);
    EXPECT_GT(t.score, at1);
    for (const auto& [l, s] : t.curve) EXPECT_LE(s, t.score);
}

TEST(TuneLambda, EmptyValidationRejected) {
    const auto grid = search::default_lambda_grid();
    EXPECT_THROW(search::tune_lambda({}, grid, {}), Error);
}

TEST(Params, JsonRoundTripAndUnknownKeys) {
    search::SearchParams p;
    p.fusion.lambda = 0.35;
    p.rerank.gamma = 2.5;
    p.sparse_pool = 50;
    p.dense_mode = index::DenseMode::Approximate;
    const auto back = search::params_from_json(search::to_json(p));
    EXPECT_EQ(back.fusion.lambda, 0.35);
    EXPECT_EQ(back.rerank.gamma, 2.5);
    EXPECT_EQ(back.sparse_pool, 50u);
    EXPECT_EQ(back.dense_mode, index::DenseMode::Approximate);
    EXPECT_THROW(search::params_from_json(json{{"lambda", 0.5}, {"mystery", 1}}), Error);
    EXPECT_THROW(search::params_from_json(json{{"lambda", 2.0}}), Error);
}

TEST(Planted, RerankingHelpsAndSolvesConstraints) {
    const auto corpus = synth::generate(synth::SynthConfig{});
    ASSERT_EQ(corpus.records.size(), 200u);
    std::size_t tests = 0;
    for (const auto& q : corpus.queries) tests += q.validation ? 0 : 1;
    ASSERT_EQ(tests, 30u);
    auto planted = synth::build_planted_index(corpus);
    search::SearchParams base;
    base.rerank.alpha = 0.5;
    base.rerank.gamma = 1.0;
    const auto run = synth::run_planted(*planted.engine, corpus, base, 3);
    EXPECT_EQ(run.solvable_success_on, 1.0);
    EXPECT_GT(run.mean_ndcg_on, run.mean_ndcg_off);
    EXPECT_LT(run.p_value, 0.05);
}

TEST(Engine, SaveOpenReplay) {
    const auto corpus = synth::generate(synth::SynthConfig{2, 5});
    auto planted = synth::build_planted_index(corpus);
    const auto dir = fixtures::scratch("engine");
    planted.engine->save(dir);
    const auto reopened = Engine::open(dir);
    const auto a = planted.engine->searcher();
    const auto b = reopened->searcher();
    for (const auto& q : corpus.queries) {
        EXPECT_EQ(search::to_json(a.search(q.text, 5, {}), false), search::to_json(b.search(q.text, 5, {}), false));
    }
}

TEST(Engine, ConfigRejectsUnknownKeys) {
    auto j = to_json(EngineConfig{});
    j["surprise"] = true;
    EXPECT_THROW(engine_config_from_json(j), Error);
}
