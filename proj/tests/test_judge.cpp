#include <atomic>
#include <functional>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "archsearch/error.hpp"
#include "archsearch/judge.hpp"
#include "archsearch/text.hpp"

using namespace archsearch;
using namespace archsearch::judge;
using nlohmann::json;

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

ResultItem item(const std::string& text, const std::string& type = "ENGINEERING_DRAWING") {
    ResultItem r;
    r.kind = type == "ENGINEERING_DRAWING" ? "DRAWING" : "DOCUMENT";
    r.text = text;
    r.metadata = json{{"type", type}};
    return r;
}

Judge judge_with(ChatClient& c, const std::string& id = "judge-1") {
    Judge j;
    j.config.judge_id = id;
    j.config.model = "m";
    j.client = &c;
    return j;
}

std::map<std::string, std::vector<std::string>> keys() {
    return {{normalize_text("pump flange drawing"), {"pump", "flange"}},
            {normalize_text("hot work permit"), {"hot", "permit"}}};
}

}  // namespace

TEST(Assignment, BalancedHalves) {
    for (std::size_t n : {0u, 1u, 10u, 11u, 40u}) {
        const auto a = balanced_ab_assignment(n, 7);
        ASSERT_EQ(a.size(), n);
        EXPECT_EQ(static_cast<std::size_t>(std::count(a.begin(), a.end(), true)), n / 2);
    }
    EXPECT_EQ(balanced_ab_assignment(30, 5), balanced_ab_assignment(30, 5));
    EXPECT_NE(balanced_ab_assignment(30, 5), balanced_ab_assignment(30, 6));
}

TEST(DeMap, AllCells) {
    EXPECT_EQ(de_map(Winner::A, true), Outcome::Win);
    EXPECT_EQ(de_map(Winner::B, true), Outcome::Loss);
    EXPECT_EQ(de_map(Winner::Tie, true), Outcome::Tie);
    EXPECT_EQ(de_map(Winner::A, false), Outcome::Loss);
    EXPECT_EQ(de_map(Winner::B, false), Outcome::Win);
    EXPECT_EQ(de_map(Winner::Tie, false), Outcome::Tie);
}

TEST(ArenaReply, Parse) {
    EXPECT_EQ(parse_arena_reply(R"({"winner":"A","explanation":"x"})").winner, Winner::A);
    EXPECT_EQ(parse_arena_reply(R"(  {"winner":"tie","explanation":""} )").winner, Winner::Tie);
    EXPECT_EQ(code_of([] { parse_arena_reply("System A is better."); }), ErrorCode::JudgeFormat);
    EXPECT_EQ(code_of([] { parse_arena_reply(R"({"winner":"C","explanation":"x"})"); }), ErrorCode::JudgeFormat);
    EXPECT_EQ(code_of([] { parse_arena_reply(R"({"winner":"A"})"); }), ErrorCode::JudgeFormat);
}

TEST(Arena, PassthroughWinner) {
    CallbackChatClient c([](const ChatRequest&) { return std::string(R"({"winner":"A","explanation":"ok"})"); });
    const auto v = run_arena("q", {}, {item("a")}, {item("b")}, true, judge_with(c));
    EXPECT_EQ(v.winner, Winner::A);
    EXPECT_EQ(v.attempts, 1);
    EXPECT_EQ(de_map(v.winner, v.focal_is_a), Outcome::Win);
}

TEST(Arena, ProseRetriedThenFormatError) {
    std::vector<std::string> prompts;
    CallbackChatClient c([&](const ChatRequest& r) {
        prompts.push_back(r.prompt);
        return std::string("I think system A did better.");
    });
    EXPECT_EQ(code_of([&] { run_arena("q", {}, {item("a")}, {item("b")}, true, judge_with(c)); }),
              ErrorCode::JudgeFormat);
    ASSERT_EQ(prompts.size(), 2u);
    EXPECT_EQ(prompts[0].find(kStrictReminder), std::string::npos);
    EXPECT_NE(prompts[1].find(kStrictReminder), std::string::npos);
}

TEST(Arena, RetrySucceeds) {
    int calls = 0;
    CallbackChatClient c([&](const ChatRequest&) {
        return std::string(++calls == 1 ? "nope" : R"({"winner":"B","explanation":"x"})");
    });
    const auto v = run_arena("q", {}, {item("a")}, {item("b")}, false, judge_with(c));
    EXPECT_EQ(v.winner, Winner::B);
    EXPECT_EQ(v.attempts, 2);
    EXPECT_EQ(de_map(v.winner, false), Outcome::Win);
}

TEST(Arena, TransportRetriesExhausted) {
    int calls = 0;
    CallbackChatClient c([&](const ChatRequest&) -> std::string {
        ++calls;
        fail(ErrorCode::Transport, "connection refused");
    });
    auto j = judge_with(c);
    j.config.transport_retries = 2;
    EXPECT_EQ(code_of([&] { run_arena("q", {}, {item("a")}, {item("b")}, true, j); }), ErrorCode::Transport);
    EXPECT_EQ(calls, 3);
}

TEST(Arena, FocalSideFollowsFlag) {
    std::string prompt;
    CallbackChatClient c([&](const ChatRequest& r) {
        prompt = r.prompt;
        return std::string(R"({"winner":"tie","explanation":""})");
    });
    run_arena("q", {}, {item("focaltext")}, {item("othertext")}, false, judge_with(c));
    EXPECT_LT(prompt.find("othertext"), prompt.find("focaltext"));
    run_arena("q", {}, {item("focaltext")}, {item("othertext")}, true, judge_with(c));
    EXPECT_LT(prompt.find("focaltext"), prompt.find("othertext"));
}

TEST(Scoring, AllTwos) {
    CallbackChatClient c([](const ChatRequest&) {
        return std::string(R"({"ratings":[{"item_id":"SYSTEM-RANK1","score":2},{"item_id":"SYSTEM-RANK2","score":2},)"
                           R"({"item_id":"SYSTEM-RANK3","score":2}]})");
    });
    const auto s = run_scoring("q", {}, {item("a"), item("b"), item("c")}, judge_with(c));
    ASSERT_EQ(s.ratings.size(), 3u);
    for (const auto& [id, g] : s.ratings) EXPECT_EQ(g, 2);
    EXPECT_EQ(s.ratings[2].first, "SYSTEM-RANK3");
}

TEST(Scoring, ParseErrors) {
    const std::vector<std::string> ids = {"SYSTEM-RANK1", "SYSTEM-RANK2"};
    EXPECT_EQ(code_of([&] {
                  parse_scoring_reply(
                      R"({"ratings":[{"item_id":"SYSTEM-RANK1","score":3},{"item_id":"SYSTEM-RANK2","score":0}]})", ids);
              }),
              ErrorCode::JudgeFormat);
    EXPECT_EQ(code_of([&] { parse_scoring_reply(R"({"ratings":[{"item_id":"SYSTEM-RANK1","score":1}]})", ids); }),
              ErrorCode::JudgeFormat);
    EXPECT_EQ(code_of([&] {
                  parse_scoring_reply(
                      R"({"ratings":[{"item_id":"SYSTEM-RANK1","score":1},{"item_id":"SYSTEM-RANK1","score":1}]})", ids);
              }),
              ErrorCode::JudgeFormat);
}

TEST(Scoring, RoundTripOrder) {
    const std::vector<std::string> ids = {"SYSTEM-RANK1", "SYSTEM-RANK2", "SYSTEM-RANK3"};
    json reply = {{"ratings", json::array()}};
    // emitted out of order, read back in requested order
    reply["ratings"].push_back({{"item_id", "SYSTEM-RANK3"}, {"score", 2}});
    reply["ratings"].push_back({{"item_id", "SYSTEM-RANK1"}, {"score", 1}});
    reply["ratings"].push_back({{"item_id", "SYSTEM-RANK2"}, {"score", 2}});
    const auto s = parse_scoring_reply(reply.dump(), ids);
    const std::vector<std::pair<std::string, int>> want = {{"SYSTEM-RANK1", 1}, {"SYSTEM-RANK2", 2}, {"SYSTEM-RANK3", 2}};
    EXPECT_EQ(s.ratings, want);
}

TEST(Anonymization, DenyList) {
    EXPECT_NO_THROW(check_anonymized("rank these drawings", {"hybrid", "bm25"}));
    EXPECT_EQ(code_of([] { check_anonymized("system: Hybrid search", {"hybrid"}); }), ErrorCode::InvalidInput);
    const auto p = render_arena_prompt("pump", {}, {item("a")}, {item("b")});
    EXPECT_NO_THROW(check_anonymized(p, {"hybrid", "sparse", "dense", "bm25"}));
    CallbackChatClient c([](const ChatRequest&) { return std::string(R"({"winner":"A","explanation":""})"); });
    EXPECT_EQ(code_of([&] {
                  run_arena("q", {}, {item("produced by hybrid")}, {item("b")}, true, judge_with(c), nullptr, "", {"hybrid"});
              }),
              ErrorCode::InvalidInput);
}

TEST(Prompts, AllowedTypesAndIds) {
    const auto p = render_scoring_prompt("pump", {ItemType::Drawing}, {item("a"), item("b")});
    EXPECT_NE(p.find("SYSTEM-RANK1"), std::string::npos);
    EXPECT_NE(p.find("SYSTEM-RANK2"), std::string::npos);
    EXPECT_NE(p.find("ENGINEERING_DRAWING"), std::string::npos);
    const auto a = render_arena_prompt("pump", {}, {item("a")}, {item("b")});
    EXPECT_NE(a.find("SYSTEM-A-RANK1"), std::string::npos);
    EXPECT_NE(a.find("SYSTEM-B-RANK1"), std::string::npos);
}

TEST(Config, Validation) {
    JudgeConfig c;
    EXPECT_NO_THROW(c.validate());
    c.arena.temperature = 0.7;
    EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidInput);
    c.benchmark = false;
    EXPECT_NO_THROW(c.validate());
    JudgeConfig d;
    d.scoring_template = "unknown";
    EXPECT_EQ(code_of([&] { d.validate(); }), ErrorCode::InvalidInput);
    JudgeConfig e;
    e.judge_id = "";
    EXPECT_EQ(code_of([&] { e.validate(); }), ErrorCode::InvalidInput);
    const auto back = judge_config_from_json(to_json(JudgeConfig{}));
    EXPECT_EQ(to_json(back), to_json(JudgeConfig{}));
}

TEST(Stub, GradesByKeyTerms) {
    StubJudge s(keys());
    EXPECT_EQ(s.grade("pump flange drawing", item("PUMP FLANGE detail")), 2);
    EXPECT_EQ(s.grade("pump flange drawing", item("pump casing")), 1);
    EXPECT_EQ(s.grade("pump flange drawing", item("valve body")), 0);
}

namespace {

std::vector<ArenaPairing> pairings() {
    std::vector<ArenaPairing> out;
    for (int i = 0; i < 10; ++i) {
        ArenaPairing p;
        p.query_id = "q" + std::to_string(i);
        p.query = i % 2 ? "pump flange drawing" : "hot work permit";
        p.opponent = i < 6 ? "sparse" : "dense";
        const bool focal_good = i % 3 != 0;
        const std::string good = i % 2 ? "pump flange" : "hot work permit";
        p.focal = {item(focal_good ? good : "unrelated text")};
        p.opponent_items = {item(i % 4 == 0 ? good : "other words")};
        out.push_back(p);
    }
    return out;
}

}  // namespace

TEST(Benchmark, DeterministicAndPositionInvariant) {
    StubJudge s1(keys());
    StubJudge s2(keys());
    const std::vector<Judge> judges = {judge_with(s1, "stub-1"), judge_with(s2, "stub-2")};
    MemoryTranscript t1, t2;
    const auto a = run_arena_benchmark("hybrid", pairings(), judges, 11, 4, &t1);
    const auto b = run_arena_benchmark("hybrid", pairings(), judges, 11, 1, &t2);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    ASSERT_EQ(t1.lines().size(), t2.lines().size());
    for (std::size_t i = 0; i < t1.lines().size(); ++i) EXPECT_EQ(t1.lines()[i].dump(), t2.lines()[i].dump());

    // another seed shows sides differently; the key-term verdicts do not move
    const auto c = run_arena_benchmark("hybrid", pairings(), judges, 12, 4);
    for (const auto& [opp, t] : a.tallies) {
        EXPECT_EQ(t.wins, c.tallies.at(opp).wins);
        EXPECT_EQ(t.losses, c.tallies.at(opp).losses);
        EXPECT_EQ(t.ties, c.tallies.at(opp).ties);
    }
    std::uint64_t total = 0;
    for (const auto& [_, t] : a.tallies) total += t.wins + t.losses + t.ties;
    EXPECT_EQ(total, 20u);
    EXPECT_EQ(a.unjudged, 0u);
}

TEST(Benchmark, MalformedJudgeCountedUnjudged) {
    CallbackChatClient bad([](const ChatRequest&) { return std::string("prose"); });
    const auto a = run_arena_benchmark("hybrid", pairings(), {judge_with(bad)}, 1, 2);
    EXPECT_EQ(a.unjudged, 10u);
    for (const auto& r : a.records) {
        EXPECT_FALSE(r.winner.has_value());
        EXPECT_FALSE(r.error.empty());
    }
}

TEST(Transcript, CarriesPromptDecodingAndResponse) {
    CallbackChatClient c([](const ChatRequest&) { return std::string(R"({"winner":"A","explanation":"e"})"); });
    MemoryTranscript t;
    run_arena("q", {}, {item("a")}, {item("b")}, true, judge_with(c), &t, "q1/sparse");
    const auto lines = t.lines();
    ASSERT_EQ(lines.size(), 1u);
    EXPECT_EQ(lines[0]["key"], "q1/sparse");
    EXPECT_EQ(lines[0]["decoding"]["temperature"], 0.0);
    EXPECT_TRUE(lines[0].contains("prompt"));
    EXPECT_EQ(lines[0]["response"], R"({"winner":"A","explanation":"e"})");
}

TEST(ScoringBenchmark, EmitsOneJudgmentPerItem) {
    StubJudge s(keys());
    ScoringTask t;
    t.query_id = "q";
    t.query = "pump flange drawing";
    t.system_id = "hybrid";
    t.doc_ids = {"d1", "d2"};
    t.items = {item("pump flange"), item("nothing")};
    t.items[0].item_id = "SYSTEM-RANK1";
    t.items[1].item_id = "SYSTEM-RANK2";
    const auto b = run_scoring_benchmark({t}, {judge_with(s, "stub")}, 2);
    ASSERT_EQ(b.judgments.size(), 2u);
    EXPECT_EQ(b.judgments[0]["doc_id"], "d1");
    EXPECT_EQ(b.judgments[0]["grade"], 2);
    EXPECT_EQ(b.judgments[1]["grade"], 0);
}
