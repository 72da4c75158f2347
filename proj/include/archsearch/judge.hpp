#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archsearch/eval.hpp"
#include "archsearch/index.hpp"
#include "archsearch/types.hpp"

namespace archsearch::judge {

struct Decoding {
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 4000;
};

struct JudgeConfig {
    std::string judge_id = "judge";
    std::string endpoint;  // base URL of a chat-completion service; empty for in-process clients
    std::string model;
    Decoding arena;
    Decoding scoring;
    std::string arena_template = "arena_v1";
    std::string scoring_template = "scoring_v1";
    int timeout_ms = 60000;
    int format_retries = 1;     // extra attempts after a malformed reply
    int transport_retries = 2;  // extra attempts after a transport failure
    bool benchmark = true;      // enforces temperature 0 and top_p 1

    void validate() const;
};

nlohmann::json to_json(const JudgeConfig& c);
JudgeConfig judge_config_from_json(const nlohmann::json& j);

struct ChatRequest {
    std::string model;
    std::string prompt;
    Decoding decoding;
};

/// Single message in, single text out. Throws Error(Transport) on failure.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
};

/// Adapter for tests and scripted judges.
class CallbackChatClient final : public ChatClient {
public:
    explicit CallbackChatClient(std::function<std::string(const ChatRequest&)> fn) : fn_(std::move(fn)) {}
    std::string complete(const ChatRequest& request) override { return fn_(request); }

private:
    std::function<std::string(const ChatRequest&)> fn_;
};

/// One anonymized result shown to a judge.
struct ResultItem {
    std::string item_id;
    std::string kind;  // "DRAWING" or "DOCUMENT"
    std::string text;  // OCR snippet
    nlohmann::json metadata = nlohmann::json::object();
};

/// Minimal metadata view of an indexed document for judging.
ResultItem make_result_item(const index::DocEntry& doc, std::string item_id, std::size_t max_chars = 600);

/// Spelling used in prompts: ENGINEERING_DRAWING, POLICY, PROCEDURE, OTHER.
std::string prompt_type_name(ItemType t);

std::string render_arena_prompt(const std::string& query, const std::vector<ItemType>& allowed,
                                const std::vector<ResultItem>& system_a, const std::vector<ResultItem>& system_b);
std::string render_scoring_prompt(const std::string& query, const std::vector<ItemType>& allowed,
                                  const std::vector<ResultItem>& results);

/// Throws InvalidInput if the prompt mentions any deny-listed term (case-insensitive).
void check_anonymized(const std::string& prompt, const std::vector<std::string>& deny_list);

/// Appended to the prompt on the retry after a malformed reply.
inline constexpr const char* kStrictReminder = "Return STRICT JSON ONLY";

enum class Winner { A, B, Tie };
std::string_view to_string(Winner w);

struct ArenaVerdict {
    Winner winner = Winner::Tie;
    std::string explanation;
    bool focal_is_a = true;  // position map
    int attempts = 0;
};

enum class Outcome { Win, Loss, Tie };

/// Verdict translated to the focal system's perspective.
Outcome de_map(Winner winner, bool focal_is_a);

/// {"winner": "A"|"B"|"tie", "explanation": string}; anything else is JudgeFormat.
ArenaVerdict parse_arena_reply(const std::string& text);

struct ScoreSheet {
    std::vector<std::pair<std::string, int>> ratings;  // in requested item order
};

/// {"ratings":[{"item_id","score"}]} with every expected id exactly once and
/// scores in {0,1,2}; anything else is JudgeFormat.
ScoreSheet parse_scoring_reply(const std::string& text, const std::vector<std::string>& expected_ids);

/// Collects transcript lines; thread-safe.
class TranscriptSink {
public:
    virtual ~TranscriptSink() = default;
    virtual void write(const nlohmann::json& line) = 0;
};

class StreamTranscript final : public TranscriptSink {
public:
    explicit StreamTranscript(std::ostream& out) : out_(out) {}
    void write(const nlohmann::json& line) override;

private:
    std::ostream& out_;
    std::mutex mu_;
};

class MemoryTranscript final : public TranscriptSink {
public:
    void write(const nlohmann::json& line) override;
    std::vector<nlohmann::json> lines() const;

private:
    std::vector<nlohmann::json> lines_;
    mutable std::mutex mu_;
};

/// Ties a config to its client.
struct Judge {
    JudgeConfig config;
    ChatClient* client = nullptr;
};

/// Runs one arena comparison. `focal_is_a` says which side the focal system is
/// shown on. Throws JudgeFormat when the reply stays malformed after the retry
/// budget, Transport when the client keeps failing.
ArenaVerdict run_arena(const std::string& query, const std::vector<ItemType>& allowed,
                       const std::vector<ResultItem>& focal, const std::vector<ResultItem>& opponent, bool focal_is_a,
                       const Judge& judge, TranscriptSink* transcript = nullptr, const std::string& key = "",
                       const std::vector<std::string>& deny_list = {});

/// Scores one system's results. Item ids must be SYSTEM-RANK1..n.
ScoreSheet run_scoring(const std::string& query, const std::vector<ItemType>& allowed,
                       const std::vector<ResultItem>& results, const Judge& judge,
                       TranscriptSink* transcript = nullptr, const std::string& key = "",
                       const std::vector<std::string>& deny_list = {});

/// Focal-in-A flags with exactly floor(n/2) true, order shuffled by seed.
std::vector<bool> balanced_ab_assignment(std::size_t n, std::uint64_t seed);

// Benchmark orchestration. Tasks run on up to `in_flight` threads; results and
// transcript lines are collected per task and emitted in task order.

struct ArenaPairing {
    std::string query_id;
    std::string query;
    std::vector<ItemType> allowed;
    std::string opponent;
    std::vector<ResultItem> focal;
    std::vector<ResultItem> opponent_items;
};

struct ArenaRecord {
    std::string query_id;
    std::string opponent;
    std::string judge_id;
    bool focal_is_a = true;
    std::optional<Winner> winner;  // absent when unjudged
    std::optional<Outcome> outcome;
    std::string explanation;
    std::string error;
};

struct ArenaBenchmark {
    std::string focal;
    std::vector<ArenaRecord> records;
    std::map<std::string, eval::WinLossTie> tallies;  // by opponent, all judges pooled
    std::map<std::string, std::map<std::string, eval::WinLossTie>> per_judge;
    std::size_t unjudged = 0;
};

nlohmann::json to_json(const ArenaBenchmark& b);

ArenaBenchmark run_arena_benchmark(const std::string& focal, const std::vector<ArenaPairing>& pairings,
                                   const std::vector<Judge>& judges, std::uint64_t seed, std::size_t in_flight = 4,
                                   TranscriptSink* transcript = nullptr, const std::vector<std::string>& deny_list = {});

struct ScoringTask {
    std::string query_id;
    std::string query;
    std::vector<ItemType> allowed;
    std::string system_id;
    std::vector<std::string> doc_ids;   // ranked
    std::vector<ResultItem> items;      // ids SYSTEM-RANKi, aligned with doc_ids
};

struct ScoringBenchmark {
    std::vector<nlohmann::json> judgments;  // {query_id, doc_id, judge_id, grade|null, system_id}
    std::size_t unjudged = 0;
};

ScoringBenchmark run_scoring_benchmark(const std::vector<ScoringTask>& tasks, const std::vector<Judge>& judges,
                                       std::size_t in_flight = 4, TranscriptSink* transcript = nullptr,
                                       const std::vector<std::string>& deny_list = {});

/// Offline judge: grades each item by normalized-token overlap with the planted
/// relevance key of the query (all key tokens present: 2, at least half: 1,
/// else 0); arena verdicts compare rank-discounted grade sums.
class StubJudge final : public ChatClient {
public:
    /// key: normalized query text -> key terms.
    explicit StubJudge(std::map<std::string, std::vector<std::string>> keys) : keys_(std::move(keys)) {}

    std::string complete(const ChatRequest& request) override;

    int grade(const std::string& query, const ResultItem& item) const;

private:
    std::map<std::string, std::vector<std::string>> keys_;
};

/// Chat-completions over HTTP: POST {endpoint}/v1/chat/completions.
class HttpChatClient final : public ChatClient {
public:
    HttpChatClient(std::string endpoint, std::string model, int timeout_ms);
    std::string complete(const ChatRequest& request) override;

private:
    std::string endpoint_;
    std::string model_;
    int timeout_ms_;
};

}  // namespace archsearch::judge
