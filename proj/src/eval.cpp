#include "archsearch/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "archsearch/error.hpp"
#include "archsearch/metrics.hpp"
#include "archsearch/text.hpp"

namespace archsearch::eval {

using nlohmann::json;

namespace {

std::ifstream open_or_fail(const std::string& path, ErrorCode code) {
    std::ifstream in(path);
    if (!in) fail(code, "cannot open " + path);
    return in;
}

template <typename F>
void for_each_json_line(std::istream& in, ErrorCode code, const char* what, F&& f) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(code, std::string(what) + " line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            f(j, lineno);
        } catch (const json::exception& e) {
            fail(code, std::string(what) + " line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

json interval_json(const stats::Interval& i) { return json{{"mean", i.mean}, {"lo", i.lo}, {"hi", i.hi}}; }

}  // namespace

std::string_view to_string(Bucket b) {
    switch (b) {
        case Bucket::Vision: return "Vision";
        case Bucket::NLP: return "NLP";
        case Bucket::MultiModal: return "MultiModal";
    }
    return "unknown";
}

std::optional<Bucket> parse_bucket(std::string_view s) {
    std::string u = to_upper_ascii(s);
    u.erase(std::remove_if(u.begin(), u.end(), [](char c) { return c == '-' || c == '_' || c == ' '; }), u.end());
    if (u == "VISION") return Bucket::Vision;
    if (u == "NLP") return Bucket::NLP;
    if (u == "MULTIMODAL") return Bucket::MultiModal;
    return std::nullopt;
}

const RunEntry* RunFile::find(const std::string& query_id) const {
    for (const auto& q : queries) {
        if (q.query_id == query_id) return &q;
    }
    return nullptr;
}

RunFile parse_run(std::istream& in, const std::string& system_id, std::size_t k) {
    require(k >= 1, ErrorCode::InvalidInput, "k must be >= 1");
    RunFile run;
    run.system_id = system_id;
    run.k = k;
    std::set<std::string> seen;
    for_each_json_line(in, ErrorCode::InvalidRun, "run", [&](const json& j, std::size_t lineno) {
        const auto where = "run line " + std::to_string(lineno);
        RunEntry e;
        e.query_id = j.at("query_id").get<std::string>();
        if (run.system_id.empty()) {
            if (auto it = j.find("system_id"); it != j.end() && it->is_string()) run.system_id = it->get<std::string>();
        }
        if (auto it = j.find("bucket"); it != j.end() && !it->is_null()) {
            e.bucket = parse_bucket(it->get<std::string>());
            if (!e.bucket) fail(ErrorCode::InvalidRun, where + ": unknown bucket");
        }
        e.results = j.at("results").get<std::vector<std::string>>();
        if (e.results.size() > k) {
            fail(ErrorCode::InvalidRun, where + ": " + std::to_string(e.results.size()) + " results exceed k=" +
                                            std::to_string(k));
        }
        std::set<std::string> docs(e.results.begin(), e.results.end());
        if (docs.size() != e.results.size()) fail(ErrorCode::InvalidRun, where + ": duplicate doc_id in results");
        if (!seen.insert(e.query_id).second) fail(ErrorCode::InvalidRun, where + ": duplicate query " + e.query_id);
        run.queries.push_back(std::move(e));
    });
    if (run.system_id.empty()) run.system_id = "system";
    return run;
}

RunFile load_run(const std::string& path, const std::string& system_id, std::size_t k) {
    auto in = open_or_fail(path, ErrorCode::InvalidRun);
    auto run = parse_run(in, system_id, k);
    return run;
}

void write_run(std::ostream& out, const RunFile& run) {
    for (const auto& q : run.queries) {
        json j{{"query_id", q.query_id}, {"system_id", run.system_id}, {"results", q.results}};
        if (q.bucket) j["bucket"] = std::string(to_string(*q.bucket));
        out << j.dump() << "\n";
    }
}

void JudgmentSet::add(const Judgment& j) {
    require(j.grade >= 0 && j.grade <= 2, ErrorCode::InvalidInput, "grade must lie in {0,1,2}");
    const auto key = std::make_tuple(j.query_id, j.doc_id, j.judge_id);
    const auto [it, inserted] = grades_.emplace(key, j.grade);
    if (!inserted && it->second != j.grade) {
        fail(ErrorCode::InvalidInput,
             "conflicting grades for (" + j.query_id + ", " + j.doc_id + ", " + j.judge_id + ")");
    }
    if (std::find(judges_.begin(), judges_.end(), j.judge_id) == judges_.end()) judges_.push_back(j.judge_id);
}

void JudgmentSet::add_unjudgeable(const std::string&, const std::string&, const std::string& judge_id) {
    ++unjudgeable_;
    if (std::find(judges_.begin(), judges_.end(), judge_id) == judges_.end()) judges_.push_back(judge_id);
}

std::optional<int> JudgmentSet::grade(const std::string& query_id, const std::string& doc_id,
                                      const std::string& judge_id) const {
    const auto it = grades_.find(std::make_tuple(query_id, doc_id, judge_id));
    if (it == grades_.end()) return std::nullopt;
    return it->second;
}

JudgmentSet parse_judgments(std::istream& in) {
    JudgmentSet set;
    for_each_json_line(in, ErrorCode::InvalidInput, "judgments", [&](const json& j, std::size_t) {
        Judgment g;
        g.query_id = j.at("query_id").get<std::string>();
        g.doc_id = j.at("doc_id").get<std::string>();
        g.judge_id = j.value("judge_id", std::string("judge"));
        const auto& grade = j.at("grade");
        if (grade.is_null()) {
            set.add_unjudgeable(g.query_id, g.doc_id, g.judge_id);
            return;
        }
        g.grade = grade.get<int>();
        set.add(g);
    });
    return set;
}

JudgmentSet load_judgments(const std::string& path) {
    auto in = open_or_fail(path, ErrorCode::InvalidInput);
    return parse_judgments(in);
}

DocInfoMap load_doc_info(const std::string& path) {
    auto in = open_or_fail(path, ErrorCode::InvalidInput);
    DocInfoMap out;
    for_each_json_line(in, ErrorCode::InvalidInput, "doc info", [&](const json& j, std::size_t) {
        const auto id = j.at("doc_id").get<std::string>();
        out[id] = DocInfo{j.value("dup_key", id), j.value("quality", 0.0)};
    });
    return out;
}

std::vector<QueryInfo> load_query_manifest(const std::string& path) {
    auto in = open_or_fail(path, ErrorCode::InvalidInput);
    std::vector<QueryInfo> out;
    for_each_json_line(in, ErrorCode::InvalidInput, "query manifest", [&](const json& j, std::size_t) {
        QueryInfo q;
        q.query_id = j.at("query_id").get<std::string>();
        if (auto it = j.find("bucket"); it != j.end() && it->is_string()) q.bucket = parse_bucket(it->get<std::string>());
        out.push_back(std::move(q));
    });
    return out;
}

const PoolEntry* Pool::entry_for(const std::string& query_id, const std::string& dup_key) const {
    const auto it = entries.find(query_id);
    if (it == entries.end()) return nullptr;
    for (const auto& e : it->second) {
        if (e.dup_key == dup_key) return &e;
    }
    return nullptr;
}

namespace {

const DocInfo& info_of(const DocInfoMap& docs, const std::string& doc_id, DocInfo& scratch) {
    const auto it = docs.find(doc_id);
    if (it != docs.end()) return it->second;
    scratch = DocInfo{doc_id, 0.0};
    return scratch;
}

}  // namespace

Pool pool_and_dedup(const std::vector<RunFile>& runs, const DocInfoMap& docs, const std::vector<QueryInfo>* manifest) {
    require(!runs.empty(), ErrorCode::InvalidRun, "pooling needs at least one run");
    Pool pool;
    if (manifest) {
        for (const auto& q : *manifest) pool.query_ids.push_back(q.query_id);
    } else {
        for (const auto& q : runs.front().queries) pool.query_ids.push_back(q.query_id);
    }
    const std::set<std::string> known(pool.query_ids.begin(), pool.query_ids.end());
    for (const auto& run : runs) {
        for (const auto& q : run.queries) {
            if (!known.contains(q.query_id)) {
                fail(ErrorCode::InvalidRun, "run " + run.system_id + " has unknown query id " + q.query_id);
            }
        }
    }
    for (const auto& qid : pool.query_ids) {
        std::map<std::string, PoolEntry> by_key;
        std::map<std::string, double> best_quality;
        for (const auto& run : runs) {
            const auto* q = run.find(qid);
            if (!q) continue;
            for (const auto& d : q->results) {
                if (trim(d).empty()) {
                    pool.dropped.push_back(run.system_id + "/" + qid + "/" + d);
                    continue;
                }
                DocInfo scratch;
                const auto& info = info_of(docs, d, scratch);
                auto& e = by_key[info.dup_key];
                e.dup_key = info.dup_key;
                if (std::find(e.members.begin(), e.members.end(), d) != e.members.end()) continue;
                e.members.push_back(d);
                auto [bq, fresh] = best_quality.emplace(info.dup_key, info.quality);
                if (fresh || info.quality > bq->second || (info.quality == bq->second && d < e.representative)) {
                    bq->second = info.quality;
                    e.representative = d;
                }
            }
        }
        auto& list = pool.entries[qid];
        for (auto& [_, e] : by_key) {
            std::sort(e.members.begin(), e.members.end());
            list.push_back(std::move(e));
        }
    }
    return pool;
}

std::vector<std::string> metric_names(std::size_t k) {
    const auto ks = std::to_string(k);
    return {"nDCG@" + ks, "MAP@" + ks + "(>=1)", "MAP@" + ks + "(=2)", "P@" + ks, "R@" + ks, "Succ@1", "Succ@" + ks};
}

namespace {

// Grade of one pooled entry for one judge: representative first, then other members.
std::optional<int> entry_grade(const JudgmentSet& js, const std::string& qid, const PoolEntry& e,
                               const std::string& judge) {
    if (auto g = js.grade(qid, e.representative, judge)) return g;
    for (const auto& m : e.members) {
        if (auto g = js.grade(qid, m, judge)) return g;
    }
    return std::nullopt;
}

std::array<double, kMetricCount> score_list(const std::vector<int>& grades, const std::vector<int>& pool_grades,
                                            std::size_t k) {
    using metrics::Threshold;
    std::array<double, kMetricCount> v{};
    v[0] = metrics::ndcg_at_k(grades, pool_grades, k);
    v[1] = metrics::ap_at_k(grades, k, Threshold::AtLeast1, metrics::relevant_count(pool_grades, Threshold::AtLeast1));
    v[2] = metrics::ap_at_k(grades, k, Threshold::Exactly2, metrics::relevant_count(pool_grades, Threshold::Exactly2));
    const auto prf = metrics::prf_success(grades, k, metrics::relevant_count(pool_grades, Threshold::AtLeast1));
    v[3] = prf.precision;
    v[4] = prf.recall;
    v[5] = metrics::prf_success(grades, 1, 0).success;
    v[6] = prf.success;
    return v;
}

int median_grade(std::vector<int> gs) {
    if (gs.empty()) return 0;
    std::sort(gs.begin(), gs.end());
    return gs[(gs.size() - 1) / 2];  // lower median for even counts
}

}  // namespace

MetricReport evaluate(const std::vector<RunFile>& runs, const JudgmentSet& judgments, const DocInfoMap& docs,
                      const EvalConfig& cfg, const std::vector<QueryInfo>* manifest) {
    require(cfg.k >= 1, ErrorCode::InvalidInput, "k must be >= 1");
    require(!judgments.judges().empty(), ErrorCode::InvalidInput, "no judgments supplied");
    const Pool pool = pool_and_dedup(runs, docs, manifest);

    MetricReport report;
    report.k = cfg.k;
    report.judges = judgments.judges();
    report.ensemble = cfg.ensemble == Ensemble::MeanOfJudges ? "mean_of_judges" : "median_grade";
    report.baseline = cfg.baseline.empty() ? runs.front().system_id : cfg.baseline;

    // Per query: pool-entry grades for each judge (nullopt = missing).
    std::map<std::string, std::vector<std::vector<std::optional<int>>>> pooled;  // qid -> entry -> judge
    for (const auto& qid : pool.query_ids) {
        auto& rows = pooled[qid];
        for (const auto& e : pool.entries.at(qid)) {
            std::vector<std::optional<int>> row;
            for (const auto& j : report.judges) {
                auto g = entry_grade(judgments, qid, e, j);
                ++report.coverage.expected_grades;
                if (g) {
                    ++report.coverage.graded;
                } else {
                    ++report.coverage.missing;
                }
                row.push_back(g);
            }
            rows.push_back(std::move(row));
            ++report.coverage.pooled_items;
        }
    }
    report.coverage.unjudgeable = judgments.unjudgeable_count();

    std::map<std::string, std::optional<Bucket>> bucket_of;
    if (manifest) {
        for (const auto& q : *manifest) bucket_of[q.query_id] = q.bucket;
    }
    for (const auto& run : runs) {
        for (const auto& q : run.queries) {
            if (!bucket_of[q.query_id] && q.bucket) bucket_of[q.query_id] = q.bucket;
        }
    }

    for (const auto& run : runs) {
        SystemReport sys;
        sys.system_id = run.system_id;
        for (const auto& qid : pool.query_ids) {
            const auto* q = run.find(qid);
            if (!q) fail(ErrorCode::InvalidRun, "run " + run.system_id + " is missing query " + qid);
            const auto& entries = pool.entries.at(qid);
            const auto& rows = pooled.at(qid);

            // Entry index of each ranked doc; repeated near-duplicates earn nothing.
            std::vector<std::optional<std::size_t>> ranked;
            std::set<std::string> used;
            for (const auto& d : q->results) {
                DocInfo scratch;
                const auto& info = info_of(docs, d, scratch);
                if (trim(d).empty() || !used.insert(info.dup_key).second) {
                    ranked.push_back(std::nullopt);
                    continue;
                }
                const auto it = std::find_if(entries.begin(), entries.end(),
                                             [&](const PoolEntry& e) { return e.dup_key == info.dup_key; });
                ranked.push_back(static_cast<std::size_t>(it - entries.begin()));
            }

            auto grades_for = [&](auto&& grade_of_entry) {
                std::vector<int> grades;
                for (const auto& r : ranked) grades.push_back(r ? grade_of_entry(*r) : 0);
                std::vector<int> pool_grades;
                for (std::size_t e = 0; e < entries.size(); ++e) pool_grades.push_back(grade_of_entry(e));
                return score_list(grades, pool_grades, cfg.k);
            };

            QueryScores qs;
            qs.query_id = qid;
            qs.bucket = bucket_of[qid];
            if (cfg.ensemble == Ensemble::MeanOfJudges) {
                for (std::size_t j = 0; j < report.judges.size(); ++j) {
                    const auto v = grades_for([&](std::size_t e) { return rows[e][j].value_or(0); });
                    for (std::size_t m = 0; m < kMetricCount; ++m) qs.values[m] += v[m];
                }
                for (auto& v : qs.values) v /= static_cast<double>(report.judges.size());
            } else {
                qs.values = grades_for([&](std::size_t e) {
                    std::vector<int> gs;
                    for (const auto& g : rows[e]) {
                        if (g) gs.push_back(*g);
                    }
                    return median_grade(gs);
                });
            }
            sys.per_query.push_back(qs);
        }
        report.systems.push_back(std::move(sys));
    }

    auto column = [](const std::vector<QueryScores>& qs, std::size_t m, const std::optional<std::string>& bucket) {
        std::vector<double> out;
        for (const auto& q : qs) {
            if (bucket && (!q.bucket || std::string(to_string(*q.bucket)) != *bucket)) continue;
            out.push_back(q.values[m]);
        }
        return out;
    };
    std::set<std::string> buckets;
    for (const auto& [_, b] : bucket_of) {
        if (b) buckets.insert(std::string(to_string(*b)));
    }

    const SystemReport* base = nullptr;
    for (const auto& s : report.systems) {
        if (s.system_id == report.baseline) base = &s;
    }
    require(base != nullptr, ErrorCode::InvalidInput, "baseline system " + report.baseline + " not among runs");

    for (auto& sys : report.systems) {
        for (std::size_t m = 0; m < kMetricCount; ++m) {
            const auto all = column(sys.per_query, m, std::nullopt);
            if (!all.empty()) sys.overall[m] = stats::aggregate(all, cfg.bootstrap);
            for (const auto& b : buckets) {
                const auto vals = column(sys.per_query, m, b);
                if (!vals.empty()) sys.by_bucket[b][m] = stats::aggregate(vals, cfg.bootstrap);
            }
        }
    }
    for (auto& sys : report.systems) {
        if (sys.system_id == report.baseline) continue;
        std::array<double, kMetricCount> p{};
        for (std::size_t m = 0; m < kMetricCount; ++m) {
            p[m] = stats::paired_randomization_test(column(sys.per_query, m, std::nullopt),
                                                    column(base->per_query, m, std::nullopt), cfg.permutation);
            for (const auto& b : buckets) {
                const auto a = column(sys.per_query, m, b);
                if (a.empty()) continue;
                sys.p_by_bucket[b][m] =
                    stats::paired_randomization_test(a, column(base->per_query, m, b), cfg.permutation);
            }
        }
        sys.p_overall = p;
    }
    return report;
}

json to_json(const MetricReport& r) {
    const auto names = metric_names(r.k);
    json systems = json::array();
    for (const auto& s : r.systems) {
        json per_query = json::array();
        for (const auto& q : s.per_query) {
            json vals = json::object();
            for (std::size_t m = 0; m < kMetricCount; ++m) vals[names[m]] = q.values[m];
            per_query.push_back({{"query_id", q.query_id},
                                 {"bucket", q.bucket ? json(std::string(to_string(*q.bucket))) : json(nullptr)},
                                 {"metrics", std::move(vals)}});
        }
        json overall = json::object();
        for (std::size_t m = 0; m < kMetricCount; ++m) overall[names[m]] = interval_json(s.overall[m]);
        json buckets = json::object();
        for (const auto& [b, arr] : s.by_bucket) {
            json v = json::object();
            for (std::size_t m = 0; m < kMetricCount; ++m) v[names[m]] = interval_json(arr[m]);
            buckets[b] = std::move(v);
        }
        json sj{{"system_id", s.system_id}, {"overall", std::move(overall)}, {"by_bucket", std::move(buckets)},
                {"per_query", std::move(per_query)}};
        if (s.p_overall) {
            json p = json::object();
            for (std::size_t m = 0; m < kMetricCount; ++m) p[names[m]] = (*s.p_overall)[m];
            json pb = json::object();
            for (const auto& [b, arr] : s.p_by_bucket) {
                json v = json::object();
                for (std::size_t m = 0; m < kMetricCount; ++m) v[names[m]] = arr[m];
                pb[b] = std::move(v);
            }
            sj["p_values"] = {{"vs", r.baseline}, {"overall", std::move(p)}, {"by_bucket", std::move(pb)}};
        }
        systems.push_back(std::move(sj));
    }
    return json{{"k", r.k},
                {"judges", r.judges},
                {"ensemble", r.ensemble},
                {"baseline", r.baseline},
                {"coverage",
                 {{"pooled_items", r.coverage.pooled_items},
                  {"expected_grades", r.coverage.expected_grades},
                  {"graded", r.coverage.graded},
                  {"missing", r.coverage.missing},
                  {"unjudgeable", r.coverage.unjudgeable}}},
                {"systems", std::move(systems)}};
}

std::string to_table(const MetricReport& r) {
    const auto names = metric_names(r.k);
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"System"};
    header.insert(header.end(), names.begin(), names.end());
    rows.push_back(header);
    for (const auto& s : r.systems) {
        std::vector<std::string> row{s.system_id};
        for (std::size_t m = 0; m < kMetricCount; ++m) {
            const auto& i = s.overall[m];
            row.push_back(fmt(i.mean) + " [" + fmt(i.lo) + ", " + fmt(i.hi) + "]");
        }
        rows.push_back(std::move(row));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < rows[i].size(); ++c) {
            out << rows[i][c];
            if (c + 1 < rows[i].size()) out << std::string(width[c] - rows[i][c].size() + 2, ' ');
        }
        out << "\n";
        if (i == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w + 2;
            out << std::string(total - 2, '-') << "\n";
        }
    }
    bool any_p = false;
    for (const auto& s : r.systems) any_p = any_p || s.p_overall.has_value();
    if (any_p) {
        out << "\nPaired randomization p-values vs " << r.baseline << "\n";
        for (const auto& s : r.systems) {
            if (!s.p_overall) continue;
            out << s.system_id << ":";
            for (std::size_t m = 0; m < kMetricCount; ++m) out << "  " << names[m] << "=" << fmt((*s.p_overall)[m], 4);
            out << "\n";
        }
    }
    out << "\nCoverage: " << r.coverage.graded << "/" << r.coverage.expected_grades << " grades present, "
        << r.coverage.missing << " missing (scored 0), " << r.coverage.unjudgeable << " unjudgeable\n";
    return out.str();
}

std::string win_table(const std::string& focal, const std::map<std::string, WinLossTie>& rows) {
    std::ostringstream out;
    std::size_t w = 8;
    for (const auto& [opp, _] : rows) w = std::max(w, opp.size());
    char line[256];
    std::snprintf(line, sizeof line, "%-*s  %8s  %8s  %8s  %7s\n", static_cast<int>(w), "Opponent", "Wins", "Losses",
                  "Ties", "Win%");
    out << focal << " vs\n" << line;
    for (const auto& [opp, t] : rows) {
        std::string rate = "n/a";
        if (t.wins + t.losses > 0) rate = fmt(stats::win_rate(t.wins, t.losses, t.ties), 2);
        std::snprintf(line, sizeof line, "%-*s  %8llu  %8llu  %8llu  %7s\n", static_cast<int>(w), opp.c_str(),
                      static_cast<unsigned long long>(t.wins), static_cast<unsigned long long>(t.losses),
                      static_cast<unsigned long long>(t.ties), rate.c_str());
        out << line;
    }
    return out.str();
}

}  // namespace archsearch::eval
