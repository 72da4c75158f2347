// archsearch command-line suite.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 external-service error.

#include <algorithm>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "archsearch/engine.hpp"
#include "archsearch/error.hpp"
#include "archsearch/eval.hpp"
#include "archsearch/judge.hpp"
#include "archsearch/routing.hpp"
#include "archsearch/search.hpp"
#include "archsearch/service.hpp"
#include "archsearch/synth.hpp"
#include "archsearch/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace archsearch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitExternal = 3;

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::Transport:
        case ErrorCode::ClassificationUnavailable:
        case ErrorCode::JudgeFormat:
            return kExitExternal;
        default: return kExitData;
    }
}

std::vector<json> read_json_lines(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::NotFound, "cannot open " + path);
    std::vector<json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        auto j = json::parse(line, nullptr, false);
        require(!j.is_discarded(), ErrorCode::InvalidInput, path + " line " + std::to_string(n) + ": invalid JSON");
        out.push_back(std::move(j));
    }
    return out;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::NotFound, "cannot open " + path);
    auto j = json::parse(in, nullptr, false);
    require(!j.is_discarded(), ErrorCode::InvalidInput, path + ": invalid JSON");
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorCode::InvalidInput, "cannot write " + path);
    out << text;
}

std::optional<std::vector<ItemType>> parse_types(const std::string& csv) {
    if (csv.empty()) return std::nullopt;
    std::vector<ItemType> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto t = parse_item_type(trim(tok));
        require(t.has_value(), ErrorCode::InvalidInput, "unknown item type: " + tok);
        out.push_back(*t);
    }
    return out;
}

search::SearchParams load_params(const std::string& path) {
    if (path.empty()) return {};
    return search::params_from_json(read_json_file(path));
}

// A query file line: {query_id, text, bucket?, allowed_types?, key_terms?}.
struct QueryLine {
    std::string query_id;
    std::string text;
    std::optional<eval::Bucket> bucket;
    std::optional<std::vector<ItemType>> allowed;
    std::vector<std::string> key_terms;
    bool validation = false;
};

std::vector<QueryLine> load_queries(const std::string& path) {
    std::vector<QueryLine> out;
    for (const auto& j : read_json_lines(path)) {
        QueryLine q;
        try {
            q.query_id = j.at("query_id").get<std::string>();
            q.text = j.at("text").get<std::string>();
            if (auto it = j.find("bucket"); it != j.end() && !it->is_null()) q.bucket = eval::parse_bucket(it->get<std::string>());
            if (auto it = j.find("allowed_types"); it != j.end() && !it->is_null()) {
                q.allowed.emplace();
                for (const auto& t : *it) {
                    const auto p = parse_item_type(t.get<std::string>());
                    require(p.has_value(), ErrorCode::InvalidInput, "unknown item type in " + q.query_id);
                    q.allowed->push_back(*p);
                }
            }
            q.key_terms = j.value("key_terms", std::vector<std::string>{});
            q.validation = j.value("validation", false);
        } catch (const json::exception& e) {
            fail(ErrorCode::InvalidInput, path + ": " + e.what());
        }
        out.push_back(std::move(q));
    }
    return out;
}

std::map<std::string, std::vector<std::string>> stub_keys(const std::vector<QueryLine>& queries) {
    std::map<std::string, std::vector<std::string>> keys;
    for (const auto& q : queries) keys[normalize_text(q.text)] = q.key_terms;
    return keys;
}

double percentile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()))) - 1;
    return v[std::min(idx, v.size() - 1)];
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
    std::string out;
    std::size_t families = 10;
    std::uint64_t seed = 20240601;
    std::size_t router_examples = 500;
};

int cmd_synth(const SynthOpts& o) {
    synth::SynthConfig cfg;
    cfg.families = o.families;
    cfg.seed = o.seed;
    const auto corpus = synth::generate(cfg);
    synth::write_corpus(corpus, o.out, o.router_examples);
    std::cout << json{{"records", corpus.records.size()}, {"queries", corpus.queries.size()}, {"dir", o.out}}.dump()
              << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- ingest

struct IngestOpts {
    std::string input;
    std::string index;
    std::string config;
    std::string router;
    bool append = false;
};

int cmd_ingest(const IngestOpts& o) {
    std::unique_ptr<Engine> engine;
    if (o.append && fs::exists(fs::path(o.index) / kEngineFile)) {
        engine = Engine::open(o.index);
    } else {
        EngineConfig cfg = o.config.empty() ? EngineConfig{} : load_engine_config(o.config);
        if (!o.router.empty()) {
            routing::RouterModel m;
            routing::from_json(read_json_file(o.router), m);
            cfg.router = m;
        }
        engine = std::make_unique<Engine>(cfg);
    }
    std::ifstream in(o.input);
    require(static_cast<bool>(in), ErrorCode::NotFound, "cannot open " + o.input);
    const auto stats = engine->ingestor().ingest_jsonl(in, engine->index());
    engine->save(o.index);
    for (const auto& e : stats.errors) std::cerr << "error: " << e << "\n";
    if (stats.ingested == 0 && stats.failed == 0) std::cerr << "warning: " << o.input << " contained no records\n";
    std::cerr << "ingestion: " << stats.ingested << " docs in " << stats.seconds << " s (" << stats.ms_per_doc()
              << " ms/doc)\n";
    std::cout << json{{"lines", stats.lines},
                      {"ingested", stats.ingested},
                      {"failed", stats.failed},
                      {"pending_classification", stats.pending_classification},
                      {"seconds", stats.seconds},
                      {"ms_per_doc", stats.ms_per_doc()},
                      {"documents", engine->index().size()}}
                     .dump()
              << "\n";
    if (stats.service_failures > 0) return kExitExternal;
    return stats.failed > 0 ? kExitData : kExitOk;
}

// ---------------------------------------------------------------- index

int cmd_index_stats(const std::string& dir, bool verify_ann) {
    index::LoadOptions lo;
    lo.allow_partial = true;
    const auto engine = Engine::open(dir, lo);
    const auto s = engine->index().stats();
    json failed = json::array();
    for (const auto& f : engine->load_failures()) failed.push_back(json{{"shard", f.index}, {"error", f.reason}});
    json out{{"documents", s.documents},       {"terms", s.terms},
             {"postings", s.postings},         {"shard_sizes", s.shard_sizes},
             {"average_length", s.average_length}, {"failed_shards", failed}};
    if (verify_ann && s.documents > 0) {
        auto& idx = engine->index();
        idx.build_ann();
        const auto probes = idx.calibrate_ann();
        out["ann"] = {{"lists", idx.ann_lists()}, {"probes", probes}, {"recall_at_10", idx.ann_self_test(10, 50)}};
    }
    std::cout << out.dump(2) << "\n";
    return engine->load_failures().empty() ? kExitOk : kExitData;
}

int cmd_index_export(const std::string& dir, const std::string& out_path) {
    const auto engine = Engine::open(dir);
    std::ofstream out(out_path);
    require(static_cast<bool>(out), ErrorCode::InvalidInput, "cannot write " + out_path);
    std::vector<const index::DocEntry*> docs;
    const auto& idx = engine->index();
    for (std::size_t i = 0; i < idx.shard_count(); ++i)
        for (const auto& d : idx.shard(i).docs) docs.push_back(&d);
    std::sort(docs.begin(), docs.end(), [](auto* a, auto* b) { return a->doc_id < b->doc_id; });
    for (const auto* d : docs) {
        out << json{{"doc_id", d->doc_id}, {"dup_key", d->dup_key}, {"quality", d->quality}}.dump() << "\n";
    }
    std::cerr << "exported " << docs.size() << " documents\n";
    return kExitOk;
}

// ---------------------------------------------------------------- route

struct RouteOpts {
    std::string input;
    std::string model;
    bool fit = false;
    std::string out;
    double l2 = 1e-4;
};

int cmd_route(const RouteOpts& o) {
    const auto lines = read_json_lines(o.input);
    std::vector<extraction::ExtractionRecord> records;
    for (const auto& j : lines) records.push_back(extraction::validate_record(j));
    if (o.fit) {
        std::vector<routing::LabeledExample> data;
        for (const auto& r : records) {
            require(r.kind.has_value(), ErrorCode::InvalidInput, "record " + r.file_id + " has no kind label");
            data.push_back({r.kind_features, *r.kind});
        }
        routing::FitConfig fc;
        fc.l2 = o.l2;
        const auto fit = routing::fit_router(data, fc);
        std::vector<Kind> pred;
        std::vector<Kind> truth;
        for (const auto& e : data) {
            pred.push_back(routing::score_logit(e.features, fit.model).label);
            truth.push_back(e.label);
        }
        json model;
        routing::to_json(model, fit.model);
        json report;
        routing::to_json(report, routing::evaluate_router(pred, truth));
        if (!o.out.empty()) write_text(o.out, model.dump(2) + "\n");
        std::cout << json{{"model", model},
                          {"iterations", fit.iterations},
                          {"gradient_norm", fit.gradient_norm},
                          {"objective", fit.objective},
                          {"training_report", report}}
                         .dump(2)
                  << "\n";
        return kExitOk;
    }
    require(!o.model.empty(), ErrorCode::InvalidInput, "route needs --model (or --fit)");
    routing::RouterModel m;
    routing::from_json(read_json_file(o.model), m);
    m.validate();
    std::vector<Kind> pred;
    std::vector<Kind> truth;
    for (const auto& r : records) {
        const auto d = routing::score_logit(r.kind_features, m);
        std::cout << json{{"file_id", r.file_id},
                          {"label", std::string(to_string(d.label))},
                          {"probability", d.probability},
                          {"logit", d.logit}}
                         .dump()
                  << "\n";
        if (r.kind) {
            pred.push_back(d.label);
            truth.push_back(*r.kind);
        }
    }
    if (!truth.empty()) {
        json report;
        routing::to_json(report, routing::evaluate_router(pred, truth));
        std::cerr << "labeled records: " << report.dump() << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------- search

struct SearchOpts {
    std::string index;
    std::string query;
    std::string queries;
    std::size_t k = 10;
    std::string params;
    std::string format = "json";
    std::string types;
    std::string run_out;
    std::string system_id = "archsearch";
    bool no_timings = false;
    std::string dense_mode;
};

void report_timings(const std::vector<search::StageTimings>& t) {
    if (t.empty()) return;
    std::vector<double> total;
    search::StageTimings mean;
    for (const auto& x : t) {
        total.push_back(x.total_ms);
        mean.parse_ms += x.parse_ms;
        mean.encode_ms += x.encode_ms;
        mean.sparse_ms += x.sparse_ms;
        mean.dense_ms += x.dense_ms;
        mean.fuse_ms += x.fuse_ms;
        mean.rerank_ms += x.rerank_ms;
        mean.total_ms += x.total_ms;
    }
    const double n = static_cast<double>(t.size());
    std::ostringstream s;
    s.precision(3);
    s << std::fixed << "query timings (ms): n=" << t.size() << " mean=" << mean.total_ms / n
      << " p50=" << percentile(total, 0.5) << " p95=" << percentile(total, 0.95) << " max=" << percentile(total, 1.0)
      << " | stage means parse=" << mean.parse_ms / n << " encode=" << mean.encode_ms / n
      << " sparse=" << mean.sparse_ms / n << " dense=" << mean.dense_ms / n << " fuse=" << mean.fuse_ms / n
      << " rerank=" << mean.rerank_ms / n;
    std::cerr << s.str() << "\n";
}

int cmd_search(const SearchOpts& o) {
    require(o.query.empty() != o.queries.empty(), ErrorCode::InvalidInput, "give exactly one of --query or --queries");
    const auto engine = Engine::open(o.index);
    auto params = load_params(o.params);
    if (!o.dense_mode.empty()) params = search::params_from_json(json{{"dense_mode", o.dense_mode}}, params);
    if (params.dense_mode == index::DenseMode::Approximate) {
        engine->index().build_ann();
        engine->index().calibrate_ann();
    }
    const auto searcher = engine->searcher();
    const auto types = parse_types(o.types);
    std::vector<search::StageTimings> timings;
    if (!o.query.empty()) {
        require(!trim(o.query).empty(), ErrorCode::InvalidInput, "query is empty");
        const auto resp = searcher.search(o.query, o.k, params, types);
        timings.push_back(resp.timings);
        if (o.format == "table") {
            std::cout << search::to_table(resp);
        } else {
            std::cout << search::to_json(resp, !o.no_timings).dump(2) << "\n";
        }
        report_timings(timings);
        return kExitOk;
    }
    const auto queries = load_queries(o.queries);
    eval::RunFile run;
    run.system_id = o.system_id;
    run.k = o.k;
    for (const auto& q : queries) {
        const auto resp = searcher.search(q.text, o.k, params, q.allowed ? q.allowed : types);
        timings.push_back(resp.timings);
        eval::RunEntry e;
        e.query_id = q.query_id;
        e.bucket = q.bucket;
        for (const auto& h : resp.results) e.results.push_back(h.doc.doc_id);
        run.queries.push_back(std::move(e));
        if (o.run_out.empty()) {
            auto j = search::to_json(resp, !o.no_timings);
            j["query_id"] = q.query_id;
            std::cout << j.dump() << "\n";
        }
    }
    if (!o.run_out.empty()) {
        std::ofstream out(o.run_out);
        require(static_cast<bool>(out), ErrorCode::InvalidInput, "cannot write " + o.run_out);
        eval::write_run(out, run);
        std::cerr << "wrote " << run.queries.size() << " ranked lists to " << o.run_out << "\n";
    }
    report_timings(timings);
    return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
    std::vector<std::string> runs;
    std::string judgments;
    std::string docs;
    std::string manifest;
    std::size_t k = 3;
    std::string baseline;
    std::string format = "json";
    std::string ensemble = "mean";
    std::size_t resamples = 10000;
    std::size_t permutations = 10000;
    std::uint64_t seed = 20240601;
};

int cmd_eval(const EvalOpts& o) {
    std::vector<eval::RunFile> runs;
    for (const auto& spec : o.runs) {
        // path or system_id=path
        const auto eq = spec.find('=');
        const auto id = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
        const auto path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        runs.push_back(eval::load_run(path, id, o.k));
    }
    const auto judgments = eval::load_judgments(o.judgments);
    const auto docs = o.docs.empty() ? eval::DocInfoMap{} : eval::load_doc_info(o.docs);
    std::vector<eval::QueryInfo> manifest;
    if (!o.manifest.empty()) manifest = eval::load_query_manifest(o.manifest);
    eval::EvalConfig cfg;
    cfg.k = o.k;
    cfg.baseline = o.baseline;
    cfg.bootstrap.resamples = o.resamples;
    cfg.bootstrap.seed = o.seed;
    cfg.permutation.permutations = o.permutations;
    cfg.permutation.seed = o.seed;
    require(o.ensemble == "mean" || o.ensemble == "median", ErrorCode::InvalidInput, "ensemble must be mean|median");
    cfg.ensemble = o.ensemble == "mean" ? eval::Ensemble::MeanOfJudges : eval::Ensemble::MedianGrade;
    const auto report = eval::evaluate(runs, judgments, docs, cfg, o.manifest.empty() ? nullptr : &manifest);
    if (o.format == "table") {
        std::cout << eval::to_table(report);
    } else {
        std::cout << eval::to_json(report).dump(2) << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------- judge

struct JudgeOpts {
    std::string mode;  // arena | scoring
    std::string index;
    std::string queries;
    std::vector<std::string> runs;  // scoring: runs; arena: opponents
    std::string focal;
    std::string judges;
    bool stub = false;
    std::size_t stub_judges = 1;
    std::size_t k = 3;
    std::uint64_t seed = 20240601;
    std::size_t in_flight = 4;
    std::string transcript;
    std::string out;
    std::vector<std::string> deny;
};

struct JudgePanel {
    std::vector<std::unique_ptr<judge::ChatClient>> clients;
    std::vector<judge::Judge> judges;
};

JudgePanel make_panel(const JudgeOpts& o, const std::vector<QueryLine>& queries) {
    JudgePanel p;
    if (o.stub) {
        require(o.judges.empty(), ErrorCode::InvalidInput, "use either --stub or --judges");
        for (std::size_t i = 0; i < o.stub_judges; ++i) {
            p.clients.push_back(std::make_unique<judge::StubJudge>(stub_keys(queries)));
            judge::JudgeConfig c;
            c.judge_id = o.stub_judges == 1 ? "stub" : "stub-" + std::to_string(i + 1);
            c.model = "stub";
            p.judges.push_back({c, p.clients.back().get()});
        }
        return p;
    }
    require(!o.judges.empty(), ErrorCode::InvalidInput, "judge needs --judges FILE or --stub");
    const auto j = read_json_file(o.judges);
    require(j.is_array() && !j.empty(), ErrorCode::InvalidInput, "judges file must be a nonempty JSON array");
    for (const auto& jc : j) {
        auto c = judge::judge_config_from_json(jc);
        require(!c.endpoint.empty(), ErrorCode::InvalidInput, "judge " + c.judge_id + " has no endpoint");
        p.clients.push_back(std::make_unique<judge::HttpChatClient>(c.endpoint, c.model, c.timeout_ms));
        p.judges.push_back({c, p.clients.back().get()});
    }
    return p;
}

eval::RunFile load_run_spec(const std::string& spec, std::size_t k) {
    const auto eq = spec.find('=');
    const auto id = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
    return eval::load_run(eq == std::string::npos ? spec : spec.substr(eq + 1), id, k);
}

std::vector<judge::ResultItem> items_for(const index::HybridIndex& idx, const std::vector<std::string>& ids,
                                         const std::string& prefix) {
    std::vector<judge::ResultItem> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto doc = idx.find(ids[i]);
        require(doc.has_value(), ErrorCode::NotFound, "run references unknown doc " + ids[i]);
        out.push_back(judge::make_result_item(*doc, prefix + std::to_string(i + 1)));
    }
    return out;
}

int cmd_judge(const JudgeOpts& o) {
    const auto engine = Engine::open(o.index);
    const auto queries = load_queries(o.queries);
    std::map<std::string, const QueryLine*> by_id;
    for (const auto& q : queries) by_id[q.query_id] = &q;
    auto panel = make_panel(o, queries);
    const auto parser = engine->slot_parser();
    auto allowed_for = [&](const QueryLine& q) { return q.allowed ? *q.allowed : parser.parse(q.text).allowed_types; };

    std::unique_ptr<std::ofstream> tfile;
    std::unique_ptr<judge::StreamTranscript> transcript;
    if (!o.transcript.empty()) {
        tfile = std::make_unique<std::ofstream>(o.transcript);
        require(static_cast<bool>(*tfile), ErrorCode::InvalidInput, "cannot write " + o.transcript);
        transcript = std::make_unique<judge::StreamTranscript>(*tfile);
    }

    std::vector<std::string> deny = o.deny;
    for (const auto& j : panel.judges) {
        if (!j.config.model.empty() && j.config.model != "stub") deny.push_back(j.config.model);
    }

    if (o.mode == "arena") {
        require(!o.focal.empty() && !o.runs.empty(), ErrorCode::InvalidInput, "arena needs --focal and --run");
        const auto focal = load_run_spec(o.focal, o.k);
        std::vector<judge::ArenaPairing> pairings;
        for (const auto& spec : o.runs) {
            const auto opp = load_run_spec(spec, o.k);
            for (const auto& fq : focal.queries) {
                const auto* oq = opp.find(fq.query_id);
                const auto qit = by_id.find(fq.query_id);
                if (oq == nullptr || qit == by_id.end() || fq.results.empty() || oq->results.empty()) continue;
                judge::ArenaPairing p;
                p.query_id = fq.query_id;
                p.query = qit->second->text;
                p.allowed = allowed_for(*qit->second);
                p.opponent = opp.system_id;
                p.focal = items_for(engine->index(), fq.results, "F");
                p.opponent_items = items_for(engine->index(), oq->results, "O");
                pairings.push_back(std::move(p));
            }
        }
        const auto bench = judge::run_arena_benchmark(focal.system_id, pairings, panel.judges, o.seed, o.in_flight,
                                                      transcript.get(), deny);
        const auto j = judge::to_json(bench);
        if (!o.out.empty()) write_text(o.out, j.dump(2) + "\n");
        std::cout << eval::win_table(focal.system_id, bench.tallies);
        std::cerr << "pairings: " << bench.records.size() << ", unjudged: " << bench.unjudged << "\n";
        return kExitOk;
    }

    require(o.mode == "scoring", ErrorCode::InvalidInput, "judge mode must be arena or scoring");
    require(!o.runs.empty(), ErrorCode::InvalidInput, "scoring needs --run");
    std::vector<judge::ScoringTask> tasks;
    for (const auto& spec : o.runs) {
        const auto run = load_run_spec(spec, o.k);
        for (const auto& rq : run.queries) {
            const auto qit = by_id.find(rq.query_id);
            if (qit == by_id.end() || rq.results.empty()) continue;
            judge::ScoringTask t;
            t.query_id = rq.query_id;
            t.query = qit->second->text;
            t.allowed = allowed_for(*qit->second);
            t.system_id = run.system_id;
            t.doc_ids = rq.results;
            t.items = items_for(engine->index(), rq.results, "SYSTEM-RANK");
            tasks.push_back(std::move(t));
        }
    }
    const auto bench = judge::run_scoring_benchmark(tasks, panel.judges, o.in_flight, transcript.get(), deny);
    // One grade per (query, doc, judge): the first system's call wins; later
    // disagreements are counted, not written.
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    std::map<std::tuple<std::string, std::string, std::string>, json> first;
    std::size_t disagreements = 0;
    std::ostringstream lines;
    for (const auto& j : bench.judgments) {
        const auto key = std::make_tuple(j.at("query_id").get<std::string>(), j.at("doc_id").get<std::string>(),
                                         j.at("judge_id").get<std::string>());
        if (auto it = first.find(key); it != first.end()) {
            if (it->second != j.at("grade")) ++disagreements;
            continue;
        }
        first.emplace(key, j.at("grade"));
        json line{{"query_id", std::get<0>(key)}, {"doc_id", std::get<1>(key)}, {"judge_id", std::get<2>(key)},
                  {"grade", j.at("grade")}};
        lines << line.dump() << "\n";
    }
    if (o.out.empty()) {
        std::cout << lines.str();
    } else {
        write_text(o.out, lines.str());
    }
    std::cerr << "scoring calls: " << tasks.size() * panel.judges.size() << ", unjudged: " << bench.unjudged
              << ", cross-system disagreements: " << disagreements << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- tune

struct TuneOpts {
    std::string index;
    std::string queries;
    std::string judgments;
    std::string params;
    std::string out;
    std::size_t k = 3;
    bool validation_only = false;
};

int cmd_tune(const TuneOpts& o) {
    const auto engine = Engine::open(o.index);
    const auto base = load_params(o.params);
    const auto queries = load_queries(o.queries);
    const auto judgments = eval::load_judgments(o.judgments);
    const auto searcher = engine->searcher();
    std::vector<search::ValidationQuery> val;
    for (const auto& q : queries) {
        if (o.validation_only && !q.validation) continue;
        search::ValidationQuery v;
        v.pool = searcher.gather(searcher.parse(q.text, q.allowed), base);
        // Lower median over judges per pooled doc.
        for (const auto& c : v.pool.candidates) {
            std::vector<int> g;
            for (const auto& judge_id : judgments.judges()) {
                if (auto x = judgments.grade(q.query_id, c.doc_id, judge_id)) g.push_back(*x);
            }
            if (g.empty()) continue;
            std::sort(g.begin(), g.end());
            v.grades[c.doc_id] = g[(g.size() - 1) / 2];
        }
        val.push_back(std::move(v));
    }
    require(!val.empty(), ErrorCode::InvalidInput, "no validation queries");
    const auto grid = search::default_lambda_grid();
    const auto result = search::tune_lambda(val, grid, base, o.k);
    auto tuned = base;
    tuned.fusion.lambda = result.lambda;
    json curve = json::array();
    for (const auto& [l, s] : result.curve) curve.push_back({{"lambda", l}, {"ndcg", s}});
    if (!o.out.empty()) write_text(o.out, search::to_json(tuned).dump(2) + "\n");
    std::cout << json{{"lambda", result.lambda}, {"score", result.score}, {"queries", val.size()}, {"curve", curve}}
                     .dump(2)
              << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- serve

service::HttpServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int cmd_serve(const std::string& config_path) {
    const auto path = service::resolve_config_path(config_path);
    require(!path.empty(), ErrorCode::InvalidInput, "serve needs --config or ARCHSEARCH_CONFIG");
    auto cfg = service::load_service_config(path);
    service::SearchService svc(cfg);
    service::HttpServer server(svc);
    const auto [host, port] = service::split_listen(cfg.listen);
    const int bound = server.bind(host, port);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on " << host << ":" << bound << " (" << svc.params().sparse_pool << "/"
              << svc.params().dense_pool << " pools)\n";
    server.run();
    g_server = nullptr;
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"archsearch: hybrid retrieval over engineering drawings and documents"};
    app.require_subcommand(1);
    int rc = kExitOk;
    std::function<int()> action;

    SynthOpts synth_o;
    auto* synth_cmd = app.add_subcommand("synth", "Write a planted synthetic corpus");
    synth_cmd->add_option("--out", synth_o.out, "Output directory")->required();
    synth_cmd->add_option("--families", synth_o.families, "Asset families (20 docs each)");
    synth_cmd->add_option("--seed", synth_o.seed);
    synth_cmd->add_option("--router-examples", synth_o.router_examples);
    synth_cmd->callback([&] { action = [&] { return cmd_synth(synth_o); }; });

    IngestOpts ingest_o;
    auto* ingest_cmd = app.add_subcommand("ingest", "Stream ExtractionRecord JSON lines into shards");
    ingest_cmd->add_option("--input", ingest_o.input, "Records (JSON lines)")->required();
    ingest_cmd->add_option("--index", ingest_o.index, "Index directory")->required();
    ingest_cmd->add_option("--config", ingest_o.config, "Engine config JSON");
    ingest_cmd->add_option("--router", ingest_o.router, "Router model JSON for records without a kind");
    ingest_cmd->add_flag("--append", ingest_o.append, "Add to an existing index");
    ingest_cmd->callback([&] { action = [&] { return cmd_ingest(ingest_o); }; });

    std::string index_dir;
    std::string export_out;
    bool verify_ann = false;
    auto* index_cmd = app.add_subcommand("index", "Inspect an index");
    index_cmd->require_subcommand(1);
    auto* stats_cmd = index_cmd->add_subcommand("stats", "Document, term and shard counts");
    stats_cmd->add_option("--index", index_dir)->required();
    stats_cmd->add_flag("--ann", verify_ann, "Build and calibrate the approximate dense index");
    stats_cmd->callback([&] { action = [&] { return cmd_index_stats(index_dir, verify_ann); }; });
    auto* export_cmd = index_cmd->add_subcommand("export-docs", "Write {doc_id, dup_key, quality} lines");
    export_cmd->add_option("--index", index_dir)->required();
    export_cmd->add_option("--out", export_out)->required();
    export_cmd->callback([&] { action = [&] { return cmd_index_export(index_dir, export_out); }; });

    RouteOpts route_o;
    auto* route_cmd = app.add_subcommand("route", "Route records to drawing/document, or fit the router");
    route_cmd->add_option("--input", route_o.input, "Records (JSON lines)")->required();
    route_cmd->add_option("--model", route_o.model, "Router model JSON");
    route_cmd->add_flag("--fit", route_o.fit, "Fit the router on labeled records (kind field)");
    route_cmd->add_option("--out", route_o.out, "Where --fit writes the model");
    route_cmd->add_option("--l2", route_o.l2, "Slope penalty for --fit");
    route_cmd->callback([&] { action = [&] { return cmd_route(route_o); }; });

    SearchOpts search_o;
    auto* search_cmd = app.add_subcommand("search", "Query the index");
    search_cmd->add_option("--index", search_o.index)->required();
    search_cmd->add_option("--query", search_o.query);
    search_cmd->add_option("--queries", search_o.queries, "Query lines {query_id, text}");
    search_cmd->add_option("--k", search_o.k)->check(CLI::Range(1, 1000));
    search_cmd->add_option("--params", search_o.params, "Search params JSON");
    search_cmd->add_option("--format", search_o.format)->check(CLI::IsMember({"json", "table"}));
    search_cmd->add_option("--types", search_o.types, "Allowed types, comma separated");
    search_cmd->add_option("--run-out", search_o.run_out, "Write a run file instead of responses");
    search_cmd->add_option("--system-id", search_o.system_id);
    search_cmd->add_option("--dense-mode", search_o.dense_mode)->check(CLI::IsMember({"exact", "approximate"}));
    search_cmd->add_flag("--no-timings", search_o.no_timings, "Omit timings from JSON output");
    search_cmd->callback([&] { action = [&] { return cmd_search(search_o); }; });

    EvalOpts eval_o;
    auto* eval_cmd = app.add_subcommand("eval", "Score runs against judgments");
    eval_cmd->add_option("--run", eval_o.runs, "Run file, optionally id=path")->required();
    eval_cmd->add_option("--judgments", eval_o.judgments)->required();
    eval_cmd->add_option("--docs", eval_o.docs, "Doc info lines from index export-docs");
    eval_cmd->add_option("--queries", eval_o.manifest, "Query manifest {query_id, bucket}");
    eval_cmd->add_option("--k", eval_o.k)->check(CLI::Range(1, 1000));
    eval_cmd->add_option("--baseline", eval_o.baseline);
    eval_cmd->add_option("--format", eval_o.format)->check(CLI::IsMember({"json", "table"}));
    eval_cmd->add_option("--ensemble", eval_o.ensemble)->check(CLI::IsMember({"mean", "median"}));
    eval_cmd->add_option("--resamples", eval_o.resamples);
    eval_cmd->add_option("--permutations", eval_o.permutations);
    eval_cmd->add_option("--seed", eval_o.seed);
    eval_cmd->callback([&] { action = [&] { return cmd_eval(eval_o); }; });

    JudgeOpts judge_o;
    auto* judge_cmd = app.add_subcommand("judge", "Run the arena or scoring protocol");
    judge_cmd->add_option("mode", judge_o.mode)->required()->check(CLI::IsMember({"arena", "scoring"}));
    judge_cmd->add_option("--index", judge_o.index)->required();
    judge_cmd->add_option("--queries", judge_o.queries, "Query lines {query_id, text, key_terms?}")->required();
    judge_cmd->add_option("--run", judge_o.runs, "Scoring: runs to grade. Arena: opponent runs");
    judge_cmd->add_option("--focal", judge_o.focal, "Arena focal run");
    judge_cmd->add_option("--judges", judge_o.judges, "Judge roster JSON array");
    judge_cmd->add_flag("--stub", judge_o.stub, "Offline key-term judge");
    judge_cmd->add_option("--stub-judges", judge_o.stub_judges);
    judge_cmd->add_option("--k", judge_o.k);
    judge_cmd->add_option("--seed", judge_o.seed);
    judge_cmd->add_option("--in-flight", judge_o.in_flight);
    judge_cmd->add_option("--transcript", judge_o.transcript, "JSON-lines transcript archive");
    judge_cmd->add_option("--out", judge_o.out);
    judge_cmd->add_option("--deny", judge_o.deny, "Terms that must not appear in prompts");
    judge_cmd->callback([&] { action = [&] { return cmd_judge(judge_o); }; });

    TuneOpts tune_o;
    auto* tune_cmd = app.add_subcommand("tune", "Grid-search lambda on validation queries");
    tune_cmd->add_option("--index", tune_o.index)->required();
    tune_cmd->add_option("--queries", tune_o.queries)->required();
    tune_cmd->add_option("--judgments", tune_o.judgments)->required();
    tune_cmd->add_option("--params", tune_o.params);
    tune_cmd->add_option("--out", tune_o.out);
    tune_cmd->add_option("--k", tune_o.k);
    tune_cmd->add_flag("--validation-only", tune_o.validation_only, "Use only queries marked validation");
    tune_cmd->callback([&] { action = [&] { return cmd_tune(tune_o); }; });

    std::string serve_config;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--config", serve_config, "Service config JSON (or ARCHSEARCH_CONFIG)");
    serve_cmd->callback([&] { action = [&] { return cmd_serve(serve_config); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    try {
        rc = action ? action() : kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        rc = exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error [io]: " << e.what() << "\n";
        rc = kExitData;
    } catch (const json::exception& e) {
        std::cerr << "error [json]: " << e.what() << "\n";
        rc = kExitData;
    }
    return rc;
}
