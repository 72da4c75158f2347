#include "archsearch/planted.hpp"

#include <sstream>

#include "archsearch/metrics.hpp"
#include "archsearch/stats.hpp"

namespace archsearch::synth {

PlantedIndex build_planted_index(const Corpus& corpus, const EngineConfig& config) {
    PlantedIndex out;
    out.engine = std::make_unique<Engine>(config);
    std::ostringstream lines;
    for (const auto& r : corpus.records) lines << r.dump() << "\n";
    std::istringstream in(lines.str());
    out.stats = out.engine->ingestor().ingest_jsonl(in, out.engine->index());
    return out;
}

namespace {

std::vector<int> grades_of(const std::vector<std::string>& ranked, const PlantedQuery& q) {
    std::vector<int> g;
    for (const auto& id : ranked) {
        const auto it = q.grades.find(id);
        g.push_back(it == q.grades.end() ? 0 : it->second);
    }
    return g;
}

std::vector<int> pool_grades(const PlantedQuery& q) {
    std::vector<int> g;
    for (const auto& [id, v] : q.grades) g.push_back(v);
    return g;
}

std::vector<std::string> top(std::vector<std::string> ids, std::size_t k) {
    if (ids.size() > k) ids.resize(k);
    return ids;
}

}  // namespace

PlantedRun run_planted(const Engine& engine, const Corpus& corpus, const search::SearchParams& base, std::size_t k,
                       const stats::PermutationConfig& perm) {
    const auto searcher = engine.searcher();
    PlantedRun run;

    std::vector<search::ValidationQuery> validation;
    for (const auto& q : corpus.queries) {
        if (!q.validation) continue;
        search::ValidationQuery v;
        v.pool = searcher.gather(searcher.parse(q.text), base);
        v.grades = q.grades;
        validation.push_back(std::move(v));
    }
    auto tuned = base;
    if (!validation.empty()) {
        auto on = base;
        on.rerank_enabled = true;
        const auto grid = search::default_lambda_grid();
        run.tune = search::tune_lambda(validation, grid, on, k);
        tuned.fusion.lambda = run.tune.lambda;
    } else {
        run.tune.lambda = base.fusion.lambda;
    }

    std::vector<double> on_scores;
    std::vector<double> off_scores;
    std::size_t solvable = 0;
    double solvable_success = 0.0;
    for (const auto& q : corpus.queries) {
        if (q.validation) continue;
        const auto pool = searcher.gather(searcher.parse(q.text), tuned);
        auto on = tuned;
        on.rerank_enabled = true;
        auto off = tuned;
        off.rerank_enabled = false;
        PlantedQueryResult r;
        r.query_id = q.query_id;
        r.solvable = q.solvable;
        r.ranked_on = top(search::ranking(pool, on), k);
        r.ranked_off = top(search::ranking(pool, off), k);
        const auto ideal = pool_grades(q);
        const auto g_on = grades_of(r.ranked_on, q);
        const auto g_off = grades_of(r.ranked_off, q);
        r.ndcg_on = metrics::ndcg_at_k(g_on, ideal, k);
        r.ndcg_off = metrics::ndcg_at_k(g_off, ideal, k);
        r.success_on = metrics::prf_success(g_on, k, ideal.size()).success;
        r.success_off = metrics::prf_success(g_off, k, ideal.size()).success;
        on_scores.push_back(r.ndcg_on);
        off_scores.push_back(r.ndcg_off);
        if (q.solvable) {
            ++solvable;
            solvable_success += r.success_on;
        }
        run.queries.push_back(std::move(r));
    }
    if (!on_scores.empty()) {
        double a = 0.0;
        double b = 0.0;
        for (std::size_t i = 0; i < on_scores.size(); ++i) {
            a += on_scores[i];
            b += off_scores[i];
        }
        run.mean_ndcg_on = a / static_cast<double>(on_scores.size());
        run.mean_ndcg_off = b / static_cast<double>(off_scores.size());
        run.p_value = stats::paired_randomization_test(on_scores, off_scores, perm);
    }
    run.solvable_success_on = solvable == 0 ? 0.0 : solvable_success / static_cast<double>(solvable);
    return run;
}

}  // namespace archsearch::synth
