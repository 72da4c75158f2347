#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "archsearch/stats.hpp"

// Benchmark protocol: run files, pooled judgments with near-duplicate
// collapsing, per-query metrics and their aggregation.
namespace archsearch::eval {

enum class Bucket { Vision, NLP, MultiModal };

std::string_view to_string(Bucket b);
std::optional<Bucket> parse_bucket(std::string_view s);

struct RunEntry {
    std::string query_id;
    std::optional<Bucket> bucket;
    std::vector<std::string> results;  // ranked doc ids
};

struct RunFile {
    std::string system_id;
    std::size_t k = 3;
    std::vector<RunEntry> queries;  // file order

    const RunEntry* find(const std::string& query_id) const;
};

/// JSON-lines {query_id, bucket?, results:[...] , system_id?}. Blank lines are
/// skipped. Throws InvalidRun on duplicate queries, duplicate doc ids within a
/// list, lists longer than k, or malformed lines.
RunFile parse_run(std::istream& in, const std::string& system_id, std::size_t k = 3);
RunFile load_run(const std::string& path, const std::string& system_id = "", std::size_t k = 3);
void write_run(std::ostream& out, const RunFile& run);

struct Judgment {
    std::string query_id;
    std::string doc_id;
    std::string judge_id;
    int grade = 0;
};

class JudgmentSet {
public:
    /// Throws InvalidInput on a grade outside {0,1,2} or a conflicting re-grade.
    void add(const Judgment& j);
    /// Records an item a judge could not grade (excluded, reported in coverage).
    void add_unjudgeable(const std::string& query_id, const std::string& doc_id, const std::string& judge_id);

    std::optional<int> grade(const std::string& query_id, const std::string& doc_id,
                             const std::string& judge_id) const;
    const std::vector<std::string>& judges() const { return judges_; }
    std::size_t size() const { return grades_.size(); }
    std::size_t unjudgeable_count() const { return unjudgeable_; }

private:
    std::map<std::tuple<std::string, std::string, std::string>, int> grades_;
    std::vector<std::string> judges_;
    std::size_t unjudgeable_ = 0;
};

/// JSON-lines {query_id, doc_id, judge_id, grade}; grade null marks an
/// unjudgeable item.
JudgmentSet parse_judgments(std::istream& in);
JudgmentSet load_judgments(const std::string& path);

/// doc_id -> near-duplicate key and quality. Docs absent from the map are
/// their own key with quality 0.
struct DocInfo {
    std::string dup_key;
    double quality = 0.0;
};
using DocInfoMap = std::map<std::string, DocInfo>;

/// JSON-lines {doc_id, dup_key, quality} (the `index export-docs` output).
DocInfoMap load_doc_info(const std::string& path);

struct QueryInfo {
    std::string query_id;
    std::optional<Bucket> bucket;
};

/// JSON-lines {query_id, bucket}.
std::vector<QueryInfo> load_query_manifest(const std::string& path);

struct PoolEntry {
    std::string dup_key;
    std::string representative;  // highest quality member, doc_id asc on ties
    std::vector<std::string> members;
};

struct Pool {
    std::vector<std::string> query_ids;                   // manifest order
    std::map<std::string, std::vector<PoolEntry>> entries; // per query, dup_key order
    std::vector<std::string> dropped;                      // "system/query/doc" dropped as corrupt

    const PoolEntry* entry_for(const std::string& query_id, const std::string& dup_key) const;
};

/// Union of every system's top-k per query, one entry per dup_key. The query
/// set comes from `manifest` when given, otherwise from the first run; any
/// other query id is an InvalidRun error.
Pool pool_and_dedup(const std::vector<RunFile>& runs, const DocInfoMap& docs,
                    const std::vector<QueryInfo>* manifest = nullptr);

enum class Ensemble { MeanOfJudges, MedianGrade };

struct EvalConfig {
    std::size_t k = 3;
    stats::BootstrapConfig bootstrap;
    stats::PermutationConfig permutation;
    Ensemble ensemble = Ensemble::MeanOfJudges;
    std::string baseline;  // system paired tests compare against; default first run
};

inline constexpr std::size_t kMetricCount = 7;
/// nDCG@k, MAP@k(>=1), MAP@k(=2), P@k, R@k, Succ@1, Succ@k.
std::vector<std::string> metric_names(std::size_t k);

struct QueryScores {
    std::string query_id;
    std::optional<Bucket> bucket;
    std::array<double, kMetricCount> values{};
};

struct SystemReport {
    std::string system_id;
    std::vector<QueryScores> per_query;
    std::array<stats::Interval, kMetricCount> overall{};
    std::map<std::string, std::array<stats::Interval, kMetricCount>> by_bucket;
    /// Paired sign-flip p-values against the baseline (absent for the baseline).
    std::optional<std::array<double, kMetricCount>> p_overall;
    std::map<std::string, std::array<double, kMetricCount>> p_by_bucket;
};

struct Coverage {
    std::size_t pooled_items = 0;
    std::size_t expected_grades = 0;  // pooled items x judges
    std::size_t graded = 0;
    std::size_t missing = 0;          // treated as grade 0
    std::size_t unjudgeable = 0;
};

struct MetricReport {
    std::size_t k = 3;
    std::vector<std::string> judges;
    std::string ensemble;
    std::string baseline;
    std::vector<SystemReport> systems;
    Coverage coverage;
};

/// Throws InvalidRun when a run misses queries of the pool.
MetricReport evaluate(const std::vector<RunFile>& runs, const JudgmentSet& judgments, const DocInfoMap& docs,
                      const EvalConfig& cfg = {}, const std::vector<QueryInfo>* manifest = nullptr);

nlohmann::json to_json(const MetricReport& r);
/// Aligned text table: one row per system, mean [lo, hi] per metric.
std::string to_table(const MetricReport& r);

struct WinLossTie {
    std::uint64_t wins = 0;
    std::uint64_t losses = 0;
    std::uint64_t ties = 0;
};

/// Rows "focal vs opponent": wins, losses, ties, Win%.
std::string win_table(const std::string& focal, const std::map<std::string, WinLossTie>& rows);

}  // namespace archsearch::eval
