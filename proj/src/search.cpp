#include "archsearch/search.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>
#include <sstream>

#include "archsearch/error.hpp"
#include "archsearch/metrics.hpp"
#include "archsearch/text.hpp"

namespace archsearch::search {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string snippet_of(const index::DocEntry& d) {
    const auto& text = d.field(index::Field::FullText);
    const auto& src = text.empty() ? d.field(index::Field::Title) : text;
    auto s = truncate_code_points(src, 160);
    if (s.size() < src.size()) s += "...";
    return s;
}

fusion::RerankParams effective_rerank(const SearchParams& p) {
    auto r = p.rerank;
    if (!p.rerank_enabled) {
        r.alpha = 0.0;
        r.beta = 0.0;
        r.gamma = 0.0;
    }
    return r;
}

// Fused and reranked candidate order as indices into the pool.
std::vector<std::size_t> ranked_indices(const CandidatePool& pool, const SearchParams& params,
                                        std::vector<fusion::Candidate>* out = nullptr) {
    std::vector<fusion::Candidate> cands = pool.candidates;
    fusion::apply_fusion(cands, params.fusion);
    std::vector<const index::DocEntry*> docs;
    docs.reserve(pool.docs.size());
    for (const auto& d : pool.docs) docs.push_back(&d);
    fusion::rerank(cands, docs, pool.query, effective_rerank(params));
    std::vector<std::size_t> order;
    order.reserve(docs.size());
    for (const auto* d : docs) order.push_back(static_cast<std::size_t>(d - pool.docs.data()));
    if (out) *out = std::move(cands);
    return order;
}

}  // namespace

void SearchParams::validate() const {
    fusion.validate();
    rerank.validate();
    require(sparse_pool >= 1 && dense_pool >= 1, ErrorCode::InvalidInput, "candidate pools must be >= 1");
}

json to_json(const SearchParams& p) {
    return json{{"lambda", p.fusion.lambda},
                {"sigma_floor", p.fusion.sigma_floor},
                {"alpha", p.rerank.alpha},
                {"beta", p.rerank.beta},
                {"gamma", p.rerank.gamma},
                {"recency_weight", p.rerank.recency_weight},
                {"quality_weight", p.rerank.quality_weight},
                {"sparse_pool", p.sparse_pool},
                {"dense_pool", p.dense_pool},
                {"dense_mode", p.dense_mode == index::DenseMode::Exact ? "exact" : "approximate"},
                {"rerank", p.rerank_enabled}};
}

SearchParams params_from_json(const json& j, SearchParams p) {
    require(j.is_object(), ErrorCode::InvalidInput, "params must be a JSON object");
    static const std::set<std::string> known = {"lambda",         "sigma_floor",    "alpha",       "beta",
                                                "gamma",          "recency_weight", "quality_weight",
                                                "sparse_pool",    "dense_pool",     "dense_mode",  "rerank",
                                                "field_weights"};
    for (const auto& [key, _] : j.items()) {
        require(known.contains(key), ErrorCode::InvalidInput, "unknown search parameter '" + key + "'");
    }
    try {
        auto num = [&](const char* key, double& dst) {
            if (auto it = j.find(key); it != j.end()) dst = it->get<double>();
        };
        num("lambda", p.fusion.lambda);
        num("sigma_floor", p.fusion.sigma_floor);
        num("alpha", p.rerank.alpha);
        num("beta", p.rerank.beta);
        num("gamma", p.rerank.gamma);
        num("recency_weight", p.rerank.recency_weight);
        num("quality_weight", p.rerank.quality_weight);
        if (auto it = j.find("sparse_pool"); it != j.end()) p.sparse_pool = it->get<std::size_t>();
        if (auto it = j.find("dense_pool"); it != j.end()) p.dense_pool = it->get<std::size_t>();
        if (auto it = j.find("rerank"); it != j.end()) p.rerank_enabled = it->get<bool>();
        if (auto it = j.find("dense_mode"); it != j.end()) {
            const auto m = it->get<std::string>();
            require(m == "exact" || m == "approximate", ErrorCode::InvalidInput, "dense_mode must be exact|approximate");
            p.dense_mode = m == "exact" ? index::DenseMode::Exact : index::DenseMode::Approximate;
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidInput, std::string("search params: ") + e.what());
    }
    p.validate();
    return p;
}

json to_json(const SearchResponse& r, bool with_timings) {
    json results = json::array();
    std::size_t rank = 0;
    for (const auto& h : r.results) {
        const auto& d = h.doc;
        json item{{"rank", ++rank},
                  {"doc_id", d.doc_id},
                  {"kind", std::string(to_string(d.kind))},
                  {"item_type", std::string(to_string(d.item_type()))},
                  {"title", d.title},
                  {"thumbnail_ref", d.thumbnail_ref ? json(*d.thumbnail_ref) : json(nullptr)},
                  {"date", d.date ? json(d.date->to_string()) : json(nullptr)},
                  {"scores", fusion::to_json(h.scores)},
                  {"metadata", extraction::metadata_to_json(d.metadata)},
                  {"snippet", h.snippet}};
        if (const auto* m = std::get_if<extraction::DrawingMetadata>(&d.metadata)) {
            item["drawing_number"] = m->drawing_number;
        } else {
            item["doc_class"] = std::string(to_string(std::get<extraction::DocumentMetadata>(d.metadata).doc_class));
        }
        results.push_back(std::move(item));
    }
    json out{{"query", fusion::to_json(r.query)}, {"candidate_count", r.candidate_count}, {"results", std::move(results)}};
    if (with_timings) {
        const auto& t = r.timings;
        out["timings_ms"] = {{"parse", t.parse_ms},   {"encode", t.encode_ms}, {"sparse", t.sparse_ms},
                             {"dense", t.dense_ms},   {"fuse", t.fuse_ms},     {"rerank", t.rerank_ms},
                             {"total", t.total_ms}};
    }
    return out;
}

std::string to_table(const SearchResponse& r) {
    std::ostringstream out;
    char line[512];
    std::snprintf(line, sizeof line, "%-4s  %-24s  %-9s  %8s  %8s  %5s  %4s  %3s  %s\n", "rank", "doc_id", "type",
                  "s_final", "s_lambda", "match", "rev", "off", "title");
    out << line;
    std::size_t rank = 0;
    for (const auto& h : r.results) {
        const auto& s = h.scores;
        std::snprintf(line, sizeof line, "%-4zu  %-24s  %-9s  %8.4f  %8.4f  %5d  %4.0f  %3d  %s\n", ++rank,
                      h.doc.doc_id.c_str(), std::string(to_string(h.doc.item_type())).c_str(), s.s_final, s.s_lambda,
                      s.match_region, s.consistency_rev, s.off_type, h.doc.title.c_str());
        out << line;
    }
    std::snprintf(line, sizeof line, "%zu candidates; %.2f ms total (sparse %.2f, dense %.2f, rerank %.2f)\n",
                  r.candidate_count, r.timings.total_ms, r.timings.sparse_ms, r.timings.dense_ms, r.timings.rerank_ms);
    out << line;
    return out.str();
}

Searcher::Searcher(const index::HybridIndex& index, embedding::TextEncoder& encoder,
                   embedding::ProjectionConfig projection, fusion::SlotParser parser)
    : index_(index), encoder_(encoder), projection_(std::move(projection)), parser_(std::move(parser)) {
    projection_.validate();
    require(encoder_.dim() == static_cast<std::size_t>(projection_.query_proj.cols()), ErrorCode::InvalidInput,
            "encoder dimension does not match the query projection");
    require(projection_.output_dim() == index_.dim(), ErrorCode::InvalidInput,
            "projection output dimension does not match the index");
}

fusion::QuerySpec Searcher::parse(std::string_view text, std::optional<std::vector<ItemType>> allowed_types) const {
    return parser_.parse(text, std::move(allowed_types));
}

CandidatePool Searcher::gather(const fusion::QuerySpec& q, const SearchParams& params) const {
    params.validate();
    CandidatePool pool;
    pool.query = q;
    const auto terms = tokenize(q.rewritten_text);

    auto t0 = Clock::now();
    std::optional<embedding::DocEmbedding> zq;
    const auto tq = encoder_.encode(q.normalized_text);
    if (std::any_of(tq.vector.begin(), tq.vector.end(), [](double v) { return v != 0.0; })) {
        zq = embedding::embed_query(tq, projection_);
    }
    pool.encode_ms = ms_since(t0);

    t0 = Clock::now();
    const auto sparse = index_.sparse_topk(terms, params.sparse_pool);
    pool.sparse_ms = ms_since(t0);

    t0 = Clock::now();
    std::vector<index::ScoredDoc> dense;
    if (zq) dense = index_.dense_topk(zq->vector, params.dense_pool, params.dense_mode);
    pool.dense_ms = ms_since(t0);

    std::set<std::string> ids;
    for (const auto& s : sparse) ids.insert(s.doc_id);
    for (const auto& d : dense) ids.insert(d.doc_id);
    t0 = Clock::now();
    for (const auto& id : ids) {
        fusion::Candidate c;
        c.doc_id = id;
        c.s_sparse = index_.bm25_score(terms, id);
        c.s_dense = zq ? index_.dense_score(zq->vector, id) : 0.0;
        pool.candidates.push_back(std::move(c));
        pool.docs.push_back(*index_.find(id));
    }
    pool.sparse_ms += ms_since(t0);
    return pool;
}

SearchResponse Searcher::rank(const CandidatePool& pool, std::size_t k, const SearchParams& params) const {
    require(k >= 1, ErrorCode::InvalidInput, "k must be >= 1");
    SearchResponse r;
    r.query = pool.query;
    r.candidate_count = pool.candidates.size();
    r.timings.encode_ms = pool.encode_ms;
    r.timings.sparse_ms = pool.sparse_ms;
    r.timings.dense_ms = pool.dense_ms;
    if (pool.candidates.empty()) return r;

    auto t0 = Clock::now();
    std::vector<fusion::Candidate> cands;
    const auto order = ranked_indices(pool, params, &cands);
    r.timings.rerank_ms = ms_since(t0);
    for (std::size_t i = 0; i < order.size() && i < k; ++i) {
        const auto& doc = pool.docs[order[i]];
        r.results.push_back({cands[i], doc, snippet_of(doc)});
    }
    return r;
}

SearchResponse Searcher::search(const fusion::QuerySpec& q, std::size_t k, const SearchParams& params) const {
    const auto t0 = Clock::now();
    const auto pool = gather(q, params);
    auto r = rank(pool, k, params);
    r.timings.total_ms = ms_since(t0);
    return r;
}

SearchResponse Searcher::search(std::string_view text, std::size_t k, const SearchParams& params,
                                std::optional<std::vector<ItemType>> allowed_types) const {
    const auto t0 = Clock::now();
    const auto q = parse(text, std::move(allowed_types));
    const double parse_ms = ms_since(t0);
    auto r = search(q, k, params);
    r.timings.parse_ms = parse_ms;
    r.timings.total_ms = ms_since(t0);
    return r;
}

std::vector<std::string> ranking(const CandidatePool& pool, const SearchParams& params) {
    std::vector<std::string> out;
    if (pool.candidates.empty()) return out;
    for (auto i : ranked_indices(pool, params)) out.push_back(pool.docs[i].doc_id);
    return out;
}

std::vector<double> default_lambda_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 20; ++i) g.push_back(i / 20.0);
    return g;
}

TuneResult tune_lambda(std::span<const ValidationQuery> validation, std::span<const double> grid,
                       const SearchParams& base, std::size_t k) {
    require(!validation.empty(), ErrorCode::InvalidInput, "tune_lambda needs a nonempty validation set");
    require(!grid.empty(), ErrorCode::InvalidInput, "tune_lambda needs a nonempty grid");
    for (double l : grid) {
        require(l >= 0.0 && l <= 1.0, ErrorCode::InvalidInput, "lambda grid values must lie in [0,1]");
    }
    TuneResult result;
    bool first = true;
    for (double lambda : grid) {
        SearchParams p = base;
        p.fusion.lambda = lambda;
        std::vector<double> per_query(validation.size(), 0.0);
        const auto n = static_cast<std::int64_t>(validation.size());
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t i = 0; i < n; ++i) {
            const auto& v = validation[static_cast<std::size_t>(i)];
            const auto ranked = ranking(v.pool, p);
            std::vector<int> grades;
            for (std::size_t r = 0; r < ranked.size() && r < k; ++r) {
                const auto it = v.grades.find(ranked[r]);
                grades.push_back(it == v.grades.end() ? 0 : it->second);
            }
            std::vector<int> pool_grades;
            for (const auto& [_, g] : v.grades) pool_grades.push_back(g);
            per_query[static_cast<std::size_t>(i)] = metrics::ndcg_at_k(grades, pool_grades, k);
        }
        double total = 0.0;
        for (double x : per_query) total += x;  // fixed order
        const double mean = total / static_cast<double>(validation.size());
        result.curve.emplace_back(lambda, mean);
        if (first || mean > result.score || (mean == result.score && lambda > result.lambda)) {
            result.lambda = lambda;
            result.score = mean;
            first = false;
        }
    }
    return result;
}

}  // namespace archsearch::search
