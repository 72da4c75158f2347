#include "archsearch/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "archsearch/error.hpp"
#include "archsearch/hash.hpp"
#include "archsearch/judge_templates.hpp"
#include "archsearch/text.hpp"

namespace archsearch::judge {

using nlohmann::json;

namespace {

constexpr const char* kQueryMarker = "### QUERY";
constexpr const char* kAllowedMarker = "### ALLOWED TYPES";
constexpr const char* kSystemAMarker = "### SYSTEM A RESULTS";
constexpr const char* kSystemBMarker = "### SYSTEM B RESULTS";
constexpr const char* kResultsMarker = "### RESULTS";

std::string one_line(std::string_view s) {
    std::string out(s);
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return trim(out);
}

std::string allowed_line(const std::vector<ItemType>& allowed) {
    if (allowed.empty()) return "(none)";
    std::string out;
    for (auto t : allowed) {
        if (!out.empty()) out += ", ";
        out += prompt_type_name(t);
    }
    return out;
}

void append_items(std::ostringstream& out, const std::vector<ResultItem>& items, const std::string& id_prefix) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& it = items[i];
        json j{{"rank", i + 1},
               {"item_id", id_prefix + std::to_string(i + 1)},
               {"kind", it.kind},
               {"metadata", it.metadata},
               {"text", it.text}};
        out << j.dump() << "\n";
    }
}

std::optional<ItemType> type_from_prompt_name(const std::string& s) {
    if (s == "ENGINEERING_DRAWING" || s == "DRAWING") return ItemType::Drawing;
    return parse_item_type(s);
}

json strict_object(const std::string& text) {
    const auto t = trim(text);
    if (t.empty() || t.front() != '{' || t.back() != '}') {
        fail(ErrorCode::JudgeFormat, "reply is not a bare JSON object");
    }
    try {
        return json::parse(t);
    } catch (const json::exception& e) {
        fail(ErrorCode::JudgeFormat, std::string("reply is not valid JSON: ") + e.what());
    }
}

std::string call_with_retries(const Judge& judge, const ChatRequest& req, TranscriptSink* transcript,
                              json base_line) {
    for (int attempt = 0;; ++attempt) {
        try {
            return judge.client->complete(req);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Transport) throw;
            if (transcript) {
                auto line = base_line;
                line["transport_attempt"] = attempt;
                line["error"] = e.what();
                transcript->write(line);
            }
            if (attempt >= judge.config.transport_retries) throw;
        }
    }
}

template <typename Parse>
auto run_protocol(const std::string& protocol, const std::string& prompt, const Decoding& decoding,
                  const Judge& judge, TranscriptSink* transcript, const std::string& key, Parse&& parse) {
    require(judge.client != nullptr, ErrorCode::InvalidInput, "judge " + judge.config.judge_id + " has no client");
    judge.config.validate();
    std::string last_error;
    for (int attempt = 0; attempt <= judge.config.format_retries; ++attempt) {
        ChatRequest req;
        req.model = judge.config.model;
        req.decoding = decoding;
        req.prompt = attempt == 0 ? prompt : prompt + "\n\n" + kStrictReminder;
        json line{{"protocol", protocol},
                  {"judge_id", judge.config.judge_id},
                  {"model", judge.config.model},
                  {"key", key},
                  {"attempt", attempt},
                  {"decoding",
                   {{"temperature", decoding.temperature}, {"top_p", decoding.top_p}, {"max_tokens", decoding.max_tokens}}},
                  {"prompt", req.prompt}};
        const auto reply = call_with_retries(judge, req, transcript, line);
        line["response"] = reply;
        try {
            auto parsed = parse(reply);
            if (transcript) transcript->write(line);
            parsed.attempts_hint(attempt + 1);
            return parsed.value;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::JudgeFormat) throw;
            last_error = e.what();
            line["error"] = last_error;
            if (transcript) transcript->write(line);
        }
    }
    fail(ErrorCode::JudgeFormat, protocol + " reply unusable after retry: " + last_error);
}

template <typename T>
struct Parsed {
    T value;
    void attempts_hint(int n) {
        if constexpr (std::is_same_v<T, ArenaVerdict>) value.attempts = n;
    }
};

}  // namespace

void JudgeConfig::validate() const {
    require(!judge_id.empty(), ErrorCode::InvalidInput, "judge_id must be nonempty");
    for (const auto* d : {&arena, &scoring}) {
        require(d->max_tokens > 0, ErrorCode::InvalidInput, "max_tokens must be positive");
        if (benchmark) {
            require(d->temperature == 0.0 && d->top_p == 1.0, ErrorCode::InvalidInput,
                    "benchmark judges must decode with temperature 0 and top_p 1");
        }
    }
    require(arena_template == kArenaTemplateId && scoring_template == kScoringTemplateId, ErrorCode::InvalidInput,
            "unknown prompt template id");
    require(format_retries >= 0 && transport_retries >= 0 && timeout_ms > 0, ErrorCode::InvalidInput,
            "retry budgets must be >= 0 and the timeout positive");
}

json to_json(const JudgeConfig& c) {
    auto dec = [](const Decoding& d) {
        return json{{"temperature", d.temperature}, {"top_p", d.top_p}, {"max_tokens", d.max_tokens}};
    };
    return json{{"judge_id", c.judge_id},         {"endpoint", c.endpoint},
                {"model", c.model},               {"arena", dec(c.arena)},
                {"scoring", dec(c.scoring)},      {"arena_template", c.arena_template},
                {"scoring_template", c.scoring_template}, {"timeout_ms", c.timeout_ms},
                {"format_retries", c.format_retries},     {"transport_retries", c.transport_retries},
                {"benchmark", c.benchmark}};
}

JudgeConfig judge_config_from_json(const json& j) {
    JudgeConfig c;
    try {
        c.judge_id = j.at("judge_id").get<std::string>();
        c.endpoint = j.value("endpoint", std::string{});
        c.model = j.value("model", std::string{});
        auto dec = [&](const char* key, Decoding& d) {
            if (auto it = j.find(key); it != j.end()) {
                d.temperature = it->value("temperature", d.temperature);
                d.top_p = it->value("top_p", d.top_p);
                d.max_tokens = it->value("max_tokens", d.max_tokens);
            }
        };
        dec("arena", c.arena);
        dec("scoring", c.scoring);
        c.arena_template = j.value("arena_template", c.arena_template);
        c.scoring_template = j.value("scoring_template", c.scoring_template);
        c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
        c.format_retries = j.value("format_retries", c.format_retries);
        c.transport_retries = j.value("transport_retries", c.transport_retries);
        c.benchmark = j.value("benchmark", c.benchmark);
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidInput, std::string("judge config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string prompt_type_name(ItemType t) {
    switch (t) {
        case ItemType::Drawing: return "ENGINEERING_DRAWING";
        case ItemType::Policy: return "POLICY";
        case ItemType::Procedure: return "PROCEDURE";
        case ItemType::Other: return "OTHER";
    }
    return "OTHER";
}

ResultItem make_result_item(const index::DocEntry& doc, std::string item_id, std::size_t max_chars) {
    ResultItem item;
    item.item_id = std::move(item_id);
    item.kind = doc.kind == Kind::Drawing ? "DRAWING" : "DOCUMENT";
    json meta{{"type", prompt_type_name(doc.item_type())}, {"title", doc.title}};
    if (const auto* d = std::get_if<extraction::DrawingMetadata>(&doc.metadata)) {
        meta["drawing_number"] = d->drawing_number;
        if (d->revision) meta["rev"] = *d->revision;
        if (d->sheet) meta["sheet"] = std::to_string(d->sheet->first) + " of " + std::to_string(d->sheet->second);
        if (d->size_code) meta["size"] = std::string(1, *d->size_code);
        if (d->facility_tag) meta["facility"] = *d->facility_tag;
        meta["parts_count"] = d->parts.size();
    } else {
        const auto& m = std::get<extraction::DocumentMetadata>(doc.metadata);
        if (m.doc_id) meta["doc_id"] = *m.doc_id;
        if (!m.facility_tags.empty()) meta["facility"] = m.facility_tags.front();
    }
    if (doc.date) meta["date"] = doc.date->to_string();
    item.metadata = std::move(meta);
    std::string text = doc.field(index::Field::Title);
    const auto& full = doc.field(index::Field::FullText);
    if (!full.empty()) text += (text.empty() ? "" : " | ") + full;
    const auto& parts = doc.field(index::Field::Parts);
    if (!parts.empty()) text += " | parts: " + parts;
    item.text = truncate_code_points(text, max_chars);
    return item;
}

std::string render_arena_prompt(const std::string& query, const std::vector<ItemType>& allowed,
                                const std::vector<ResultItem>& system_a, const std::vector<ResultItem>& system_b) {
    std::ostringstream out;
    out << kArenaTemplateV1 << "\n"
        << kQueryMarker << "\n" << one_line(query) << "\n\n"
        << kAllowedMarker << "\n" << allowed_line(allowed) << "\n\n"
        << kSystemAMarker << "\n";
    append_items(out, system_a, "SYSTEM-A-RANK");
    out << "\n" << kSystemBMarker << "\n";
    append_items(out, system_b, "SYSTEM-B-RANK");
    return out.str();
}

std::string render_scoring_prompt(const std::string& query, const std::vector<ItemType>& allowed,
                                  const std::vector<ResultItem>& results) {
    std::ostringstream out;
    out << kScoringTemplateV1 << "\n"
        << kQueryMarker << "\n" << one_line(query) << "\n\n"
        << kAllowedMarker << "\n" << allowed_line(allowed) << "\n\n"
        << kResultsMarker << "\n";
    append_items(out, results, "SYSTEM-RANK");
    return out.str();
}

void check_anonymized(const std::string& prompt, const std::vector<std::string>& deny_list) {
    const auto hay = to_upper_ascii(prompt);
    for (const auto& term : deny_list) {
        if (trim(term).empty()) continue;
        if (hay.find(to_upper_ascii(term)) != std::string::npos) {
            fail(ErrorCode::InvalidInput, "rendered prompt reveals a system or model identity: " + term);
        }
    }
}

std::string_view to_string(Winner w) {
    switch (w) {
        case Winner::A: return "A";
        case Winner::B: return "B";
        case Winner::Tie: return "tie";
    }
    return "tie";
}

Outcome de_map(Winner winner, bool focal_is_a) {
    if (winner == Winner::Tie) return Outcome::Tie;
    const bool a_won = winner == Winner::A;
    return a_won == focal_is_a ? Outcome::Win : Outcome::Loss;
}

ArenaVerdict parse_arena_reply(const std::string& text) {
    const auto j = strict_object(text);
    const auto w = j.find("winner");
    if (w == j.end() || !w->is_string()) fail(ErrorCode::JudgeFormat, "missing string field 'winner'");
    const auto e = j.find("explanation");
    if (e == j.end() || !e->is_string()) fail(ErrorCode::JudgeFormat, "missing string field 'explanation'");
    ArenaVerdict v;
    const auto s = to_upper_ascii(trim(w->get<std::string>()));
    if (s == "A") {
        v.winner = Winner::A;
    } else if (s == "B") {
        v.winner = Winner::B;
    } else if (s == "TIE") {
        v.winner = Winner::Tie;
    } else {
        fail(ErrorCode::JudgeFormat, "winner must be A, B or tie");
    }
    v.explanation = e->get<std::string>();
    return v;
}

ScoreSheet parse_scoring_reply(const std::string& text, const std::vector<std::string>& expected_ids) {
    const auto j = strict_object(text);
    const auto r = j.find("ratings");
    if (r == j.end() || !r->is_array()) fail(ErrorCode::JudgeFormat, "missing array field 'ratings'");
    std::map<std::string, int> got;
    for (const auto& item : *r) {
        if (!item.is_object()) fail(ErrorCode::JudgeFormat, "rating entries must be objects");
        const auto id = item.find("item_id");
        const auto sc = item.find("score");
        if (id == item.end() || !id->is_string()) fail(ErrorCode::JudgeFormat, "rating without item_id");
        if (sc == item.end() || !sc->is_number_integer()) fail(ErrorCode::JudgeFormat, "rating score must be an integer");
        const int score = sc->get<int>();
        if (score < 0 || score > 2) fail(ErrorCode::JudgeFormat, "rating score outside {0,1,2}");
        const auto key = id->get<std::string>();
        if (std::find(expected_ids.begin(), expected_ids.end(), key) == expected_ids.end()) {
            fail(ErrorCode::JudgeFormat, "rating for unknown item " + key);
        }
        if (!got.emplace(key, score).second) fail(ErrorCode::JudgeFormat, "item rated twice: " + key);
    }
    ScoreSheet sheet;
    for (const auto& id : expected_ids) {
        const auto it = got.find(id);
        if (it == got.end()) fail(ErrorCode::JudgeFormat, "missing rating for " + id);
        sheet.ratings.emplace_back(id, it->second);
    }
    return sheet;
}

void StreamTranscript::write(const json& line) {
    std::lock_guard lock(mu_);
    out_ << line.dump() << "\n";
}

void MemoryTranscript::write(const json& line) {
    std::lock_guard lock(mu_);
    lines_.push_back(line);
}

std::vector<json> MemoryTranscript::lines() const {
    std::lock_guard lock(mu_);
    return lines_;
}

ArenaVerdict run_arena(const std::string& query, const std::vector<ItemType>& allowed,
                       const std::vector<ResultItem>& focal, const std::vector<ResultItem>& opponent, bool focal_is_a,
                       const Judge& judge, TranscriptSink* transcript, const std::string& key,
                       const std::vector<std::string>& deny_list) {
    require(!focal.empty() && !opponent.empty(), ErrorCode::InvalidInput, "arena needs two nonempty result lists");
    const auto& a = focal_is_a ? focal : opponent;
    const auto& b = focal_is_a ? opponent : focal;
    const auto prompt = render_arena_prompt(query, allowed, a, b);
    check_anonymized(prompt, deny_list);
    auto v = run_protocol("arena", prompt, judge.config.arena, judge, transcript, key, [](const std::string& reply) {
        return Parsed<ArenaVerdict>{parse_arena_reply(reply)};
    });
    v.focal_is_a = focal_is_a;
    return v;
}

ScoreSheet run_scoring(const std::string& query, const std::vector<ItemType>& allowed,
                       const std::vector<ResultItem>& results, const Judge& judge, TranscriptSink* transcript,
                       const std::string& key, const std::vector<std::string>& deny_list) {
    require(!results.empty(), ErrorCode::InvalidInput, "scoring needs at least one result");
    const auto prompt = render_scoring_prompt(query, allowed, results);
    check_anonymized(prompt, deny_list);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < results.size(); ++i) ids.push_back("SYSTEM-RANK" + std::to_string(i + 1));
    return run_protocol("scoring", prompt, judge.config.scoring, judge, transcript, key,
                        [&](const std::string& reply) { return Parsed<ScoreSheet>{parse_scoring_reply(reply, ids)}; });
}

std::vector<bool> balanced_ab_assignment(std::size_t n, std::uint64_t seed) {
    std::vector<bool> out(n, false);
    for (std::size_t i = 0; i < n / 2; ++i) out[i] = true;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        const bool tmp = out[i - 1];
        out[i - 1] = out[j];
        out[j] = tmp;
    }
    return out;
}

namespace {

// Runs fn(i) for i in [0, n) on up to `in_flight` threads.
template <typename F>
void run_tasks(std::size_t n, std::size_t in_flight, F&& fn) {
    const std::size_t workers = std::max<std::size_t>(1, std::min(in_flight, n));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    auto loop = [&](std::size_t w) {
        try {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        } catch (...) {
            errors[w] = std::current_exception();
            next = n;
        }
    };
    std::vector<std::thread> threads;
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(loop, w);
    loop(0);
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

void flush(const std::vector<MemoryTranscript>& per_task, TranscriptSink* transcript) {
    if (!transcript) return;
    for (const auto& t : per_task)
        for (const auto& line : t.lines()) transcript->write(line);
}

}  // namespace

json to_json(const ArenaBenchmark& b) {
    auto tally = [](const eval::WinLossTie& t) {
        json j{{"wins", t.wins}, {"losses", t.losses}, {"ties", t.ties}};
        j["win_rate"] = t.wins + t.losses > 0 ? json(100.0 * t.wins / static_cast<double>(t.wins + t.losses)) : json(nullptr);
        return j;
    };
    json tallies = json::object();
    for (const auto& [opp, t] : b.tallies) tallies[opp] = tally(t);
    json per_judge = json::object();
    for (const auto& [judge, rows] : b.per_judge) {
        json r = json::object();
        for (const auto& [opp, t] : rows) r[opp] = tally(t);
        per_judge[judge] = std::move(r);
    }
    json records = json::array();
    for (const auto& r : b.records) {
        json j{{"query_id", r.query_id}, {"opponent", r.opponent}, {"judge_id", r.judge_id}, {"focal_is_a", r.focal_is_a}};
        j["winner"] = r.winner ? json(std::string(to_string(*r.winner))) : json(nullptr);
        j["outcome"] = r.outcome ? json(*r.outcome == Outcome::Win ? "win" : *r.outcome == Outcome::Loss ? "loss" : "tie")
                                 : json(nullptr);
        j["explanation"] = r.explanation;
        if (!r.error.empty()) j["error"] = r.error;
        records.push_back(std::move(j));
    }
    return json{{"focal", b.focal},
                {"tallies", std::move(tallies)},
                {"per_judge", std::move(per_judge)},
                {"unjudged", b.unjudged},
                {"records", std::move(records)}};
}

ArenaBenchmark run_arena_benchmark(const std::string& focal, const std::vector<ArenaPairing>& pairings,
                                   const std::vector<Judge>& judges, std::uint64_t seed, std::size_t in_flight,
                                   TranscriptSink* transcript, const std::vector<std::string>& deny_list) {
    ArenaBenchmark out;
    out.focal = focal;
    const std::size_t n = pairings.size() * judges.size();
    std::vector<std::vector<bool>> positions;
    for (std::size_t j = 0; j < judges.size(); ++j) {
        positions.push_back(balanced_ab_assignment(pairings.size(), stream_seed(seed, j)));
    }
    out.records.resize(n);
    std::vector<MemoryTranscript> logs(n);
    run_tasks(n, in_flight, [&](std::size_t t) {
        const auto j = t / pairings.size();
        const auto p = t % pairings.size();
        const auto& pr = pairings[p];
        auto& rec = out.records[t];
        rec.query_id = pr.query_id;
        rec.opponent = pr.opponent;
        rec.judge_id = judges[j].config.judge_id;
        rec.focal_is_a = positions[j][p];
        try {
            const auto v = run_arena(pr.query, pr.allowed, pr.focal, pr.opponent_items, rec.focal_is_a, judges[j],
                                     &logs[t], pr.query_id + "/" + pr.opponent, deny_list);
            rec.winner = v.winner;
            rec.outcome = de_map(v.winner, v.focal_is_a);
            rec.explanation = v.explanation;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::JudgeFormat && e.code() != ErrorCode::Transport) throw;
            rec.error = std::string(to_string(e.code())) + ": " + e.what();
        }
    });
    flush(logs, transcript);
    for (const auto& r : out.records) {
        if (!r.outcome) {
            ++out.unjudged;
            continue;
        }
        for (auto* t : {&out.tallies[r.opponent], &out.per_judge[r.judge_id][r.opponent]}) {
            switch (*r.outcome) {
                case Outcome::Win: ++t->wins; break;
                case Outcome::Loss: ++t->losses; break;
                case Outcome::Tie: ++t->ties; break;
            }
        }
    }
    return out;
}

ScoringBenchmark run_scoring_benchmark(const std::vector<ScoringTask>& tasks, const std::vector<Judge>& judges,
                                       std::size_t in_flight, TranscriptSink* transcript,
                                       const std::vector<std::string>& deny_list) {
    const std::size_t n = tasks.size() * judges.size();
    std::vector<std::vector<json>> rows(n);
    std::vector<MemoryTranscript> logs(n);
    std::atomic<std::size_t> unjudged{0};
    run_tasks(n, in_flight, [&](std::size_t t) {
        const auto j = t / tasks.size();
        const auto& task = tasks[t % tasks.size()];
        require(task.doc_ids.size() == task.items.size(), ErrorCode::InvalidInput, "scoring task misaligned");
        if (task.items.empty()) return;
        std::optional<ScoreSheet> sheet;
        try {
            sheet = run_scoring(task.query, task.allowed, task.items, judges[j], &logs[t],
                                task.query_id + "/" + task.system_id, deny_list);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::JudgeFormat && e.code() != ErrorCode::Transport) throw;
            ++unjudged;
        }
        for (std::size_t i = 0; i < task.doc_ids.size(); ++i) {
            rows[t].push_back(json{{"query_id", task.query_id},
                                   {"doc_id", task.doc_ids[i]},
                                   {"judge_id", judges[j].config.judge_id},
                                   {"system_id", task.system_id},
                                   {"grade", sheet ? json(sheet->ratings[i].second) : json(nullptr)}});
        }
    });
    flush(logs, transcript);
    ScoringBenchmark out;
    out.unjudged = unjudged;
    for (auto& r : rows)
        for (auto& line : r) out.judgments.push_back(std::move(line));
    return out;
}

namespace {

struct ParsedPrompt {
    bool arena = false;
    std::string query;
    std::vector<ItemType> allowed;
    std::vector<ResultItem> a;
    std::vector<ResultItem> b;
};

ParsedPrompt parse_prompt(const std::string& prompt) {
    ParsedPrompt p;
    p.arena = prompt.rfind(std::string(kArenaTemplateV1), 0) == 0;
    std::istringstream in(prompt);
    std::string line;
    std::string section;
    while (std::getline(in, line)) {
        if (line.rfind("### ", 0) == 0) {
            section = line;
            continue;
        }
        if (trim(line).empty() || section.empty()) continue;
        if (section == kQueryMarker) {
            p.query = line;
        } else if (section == kAllowedMarker) {
            if (line == "(none)") continue;
            std::string tok;
            std::istringstream ts(line);
            while (std::getline(ts, tok, ',')) {
                if (auto t = type_from_prompt_name(trim(tok))) p.allowed.push_back(*t);
            }
        } else if (line.front() == '{') {
            const auto j = json::parse(line, nullptr, false);
            if (j.is_discarded()) continue;
            ResultItem it{j.value("item_id", std::string{}), j.value("kind", std::string{}),
                          j.value("text", std::string{}), j.value("metadata", json::object())};
            (section == kSystemBMarker ? p.b : p.a).push_back(std::move(it));
        }
    }
    return p;
}

double discounted(const std::vector<int>& grades) {
    double s = 0.0;
    for (std::size_t i = 0; i < grades.size(); ++i) s += grades[i] / std::log2(static_cast<double>(i) + 2.0);
    return s;
}

}  // namespace

int StubJudge::grade(const std::string& query, const ResultItem& item) const {
    const auto it = keys_.find(normalize_text(query));
    if (it == keys_.end() || it->second.empty()) return 0;
    std::set<std::string> have;
    for (const auto& t : tokenize(item.text)) have.insert(t);
    for (const auto& [k, v] : item.metadata.items()) {
        const auto s = v.is_string() ? v.get<std::string>() : v.dump();
        for (const auto& t : tokenize(s)) have.insert(t);
    }
    std::size_t hits = 0;
    std::size_t total = 0;
    for (const auto& term : it->second) {
        for (const auto& t : tokenize(term)) {
            ++total;
            hits += have.contains(t) ? 1 : 0;
        }
    }
    if (total == 0) return 0;
    if (hits == total) return 2;
    return 2 * hits >= total ? 1 : 0;
}

std::string StubJudge::complete(const ChatRequest& request) {
    const auto p = parse_prompt(request.prompt);
    auto graded = [&](const std::vector<ResultItem>& items) {
        std::vector<int> g;
        for (const auto& it : items) {
            int s = grade(p.query, it);
            if (!p.allowed.empty()) {
                const auto t = type_from_prompt_name(it.metadata.value("type", std::string{}));
                if (!t || std::find(p.allowed.begin(), p.allowed.end(), *t) == p.allowed.end()) s = 0;
            }
            g.push_back(s);
        }
        return g;
    };
    if (p.arena) {
        const double a = discounted(graded(p.a));
        const double b = discounted(graded(p.b));
        std::string winner = "tie";
        if (a > b + 1e-12) winner = "A";
        if (b > a + 1e-12) winner = "B";
        char buf[160];
        std::snprintf(buf, sizeof buf, "Key-term overlap: A=%.3f, B=%.3f.", a, b);
        return json{{"winner", winner}, {"explanation", buf}}.dump();
    }
    const auto g = graded(p.a);
    json ratings = json::array();
    for (std::size_t i = 0; i < p.a.size(); ++i) ratings.push_back({{"item_id", p.a[i].item_id}, {"score", g[i]}});
    return json{{"ratings", std::move(ratings)}}.dump();
}

}  // namespace archsearch::judge
