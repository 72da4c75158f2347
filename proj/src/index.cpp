#include "archsearch/index.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>

#include "archsearch/error.hpp"
#include "archsearch/hash.hpp"
#include "archsearch/kernels.hpp"
#include "archsearch/text.hpp"

namespace archsearch::index {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kFieldCount> kFieldNames = {
    "full_text", "drawing_number", "parts", "revisions", "title", "sections"};

bool ranked_before(const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
}

void keep_top(std::vector<ScoredDoc>& docs, std::size_t k) {
    if (docs.size() > k) {
        std::partial_sort(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(k), docs.end(),
                          ranked_before);
        docs.resize(k);
    } else {
        std::sort(docs.begin(), docs.end(), ranked_before);
    }
}

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

// Postings of one term in one shard, restricted to a single local doc.
double weighted_tf(const std::vector<Posting>& list, std::uint32_t local, const FieldWeights& w) {
    auto it = std::lower_bound(list.begin(), list.end(), local,
                               [](const Posting& p, std::uint32_t d) { return p.doc < d; });
    double tfw = 0.0;
    for (; it != list.end() && it->doc == local; ++it) tfw += w[it->field] * it->tf;
    return tfw;
}

}  // namespace

std::string_view to_string(Field f) { return kFieldNames[static_cast<std::size_t>(f)]; }

std::optional<Field> parse_field(std::string_view s) {
    for (std::size_t i = 0; i < kFieldCount; ++i) {
        if (kFieldNames[i] == s) return static_cast<Field>(i);
    }
    return std::nullopt;
}

ItemType DocEntry::item_type() const {
    if (kind == Kind::Drawing) return ItemType::Drawing;
    if (const auto* d = std::get_if<extraction::DocumentMetadata>(&metadata)) {
        switch (d->doc_class) {
            case DocClass::Policy: return ItemType::Policy;
            case DocClass::Procedure: return ItemType::Procedure;
            case DocClass::Other: return ItemType::Other;
        }
    }
    return ItemType::Other;
}

json to_json(const DocEntry& e, bool with_embedding) {
    json fields = json::object();
    for (std::size_t i = 0; i < kFieldCount; ++i) fields[std::string(kFieldNames[i])] = e.fields[i];
    json j{{"doc_id", e.doc_id},
           {"kind", std::string(to_string(e.kind))},
           {"item_type", std::string(to_string(e.item_type()))},
           {"title", e.title},
           {"fields", std::move(fields)},
           {"metadata", extraction::metadata_to_json(e.metadata)},
           {"date", e.date ? json(e.date->to_string()) : json(nullptr)},
           {"quality", e.quality},
           {"dup_key", e.dup_key},
           {"thumbnail_ref", e.thumbnail_ref ? json(*e.thumbnail_ref) : json(nullptr)}};
    if (with_embedding) j["embedding"] = e.embedding.vector;
    return j;
}

DocEntry doc_entry_from_json(const json& j) {
    DocEntry e;
    e.doc_id = j.at("doc_id").get<std::string>();
    const auto kind = parse_kind(j.at("kind").get<std::string>());
    require(kind.has_value(), ErrorCode::InvalidInput, "doc entry: unknown kind");
    e.kind = *kind;
    e.title = j.value("title", std::string{});
    const auto& fields = j.at("fields");
    for (std::size_t i = 0; i < kFieldCount; ++i) {
        e.fields[i] = fields.value(std::string(kFieldNames[i]), std::string{});
    }
    e.metadata = extraction::metadata_from_json(j.at("metadata"));
    if (const auto it = j.find("date"); it != j.end() && it->is_string()) {
        e.date = Date::parse(it->get<std::string>());
    }
    e.quality = j.value("quality", 0.0);
    e.dup_key = j.value("dup_key", std::string{});
    if (const auto it = j.find("thumbnail_ref"); it != j.end() && it->is_string()) {
        e.thumbnail_ref = it->get<std::string>();
    }
    if (const auto it = j.find("embedding"); it != j.end()) {
        e.embedding.vector = it->get<std::vector<double>>();
    }
    return e;
}

void sort_ranked(std::vector<ScoredDoc>& docs) { std::sort(docs.begin(), docs.end(), ranked_before); }

std::array<std::vector<std::string>, kFieldCount> tokenize_fields(const DocEntry& e) {
    std::array<std::vector<std::string>, kFieldCount> out;
    for (std::size_t i = 0; i < kFieldCount; ++i) out[i] = tokenize(e.fields[i]);
    return out;
}

HybridIndex::HybridIndex(std::size_t shard_count, std::size_t dim, Bm25Params params)
    : dim_(dim), params_(params), shards_(shard_count) {
    require(shard_count >= 1, ErrorCode::InvalidInput, "shard_count must be >= 1");
    require(dim >= 1, ErrorCode::InvalidInput, "embedding dimension must be >= 1");
    require(params.k1 >= 0.0 && params.b >= 0.0 && params.b <= 1.0, ErrorCode::InvalidInput,
            "BM25 parameters out of range");
}

std::size_t HybridIndex::shard_of(std::string_view doc_id, std::size_t shard_count) {
    return static_cast<std::size_t>(fnv1a64(doc_id) % shard_count);
}

void HybridIndex::add_document(DocEntry entry) {
    require(!entry.doc_id.empty(), ErrorCode::InvalidInput, "doc_id must be nonempty");
    require(entry.embedding.vector.size() == dim_, ErrorCode::InvalidInput,
            "embedding dimension " + std::to_string(entry.embedding.vector.size()) +
                " does not match index dimension " + std::to_string(dim_));
    double norm = 0.0;
    for (double v : entry.embedding.vector) norm += v * v;
    require(std::abs(std::sqrt(norm) - 1.0) < 1e-6, ErrorCode::InvalidInput,
            "embedding must be unit-norm");
    require(entry.quality >= 0.0 && entry.quality <= 1.0, ErrorCode::InvalidInput,
            "quality must lie in [0,1]");

    const auto tokens = tokenize_fields(entry);
    std::unique_lock lock(mutex_);
    Shard& s = shards_[shard_of(entry.doc_id, shards_.size())];
    if (s.by_id.contains(entry.doc_id)) {
        fail(ErrorCode::Conflict, "duplicate doc_id: " + entry.doc_id);
    }
    const auto local = static_cast<std::uint32_t>(s.docs.size());

    // Everything below is non-throwing apart from allocation, so the update is
    // all-or-nothing for readers, who are excluded by the lock.
    std::array<std::uint32_t, kFieldCount> lens{};
    std::unordered_map<std::string, bool> seen;
    for (std::size_t f = 0; f < kFieldCount; ++f) {
        lens[f] = static_cast<std::uint32_t>(tokens[f].size());
        std::unordered_map<std::string, std::uint32_t> tf;
        std::vector<std::string> order;
        for (const auto& t : tokens[f]) {
            if (tf[t]++ == 0) order.push_back(t);
        }
        for (const auto& t : order) {
            s.postings[t].push_back({local, static_cast<std::uint8_t>(f), tf[t]});
            if (!seen[t]) {
                seen[t] = true;
                ++s.df[t];
            }
        }
        s.total_lengths[f] += lens[f];
    }
    s.lengths.push_back(lens);
    s.embeddings.insert(s.embeddings.end(), entry.embedding.vector.begin(), entry.embedding.vector.end());
    s.by_id.emplace(entry.doc_id, local);
    s.docs.push_back(std::move(entry));
    ann_.reset();
}

void HybridIndex::replace_shard(std::size_t i, Shard shard) {
    std::unique_lock lock(mutex_);
    require(i < shards_.size(), ErrorCode::InvalidInput, "shard index out of range");
    shards_[i] = std::move(shard);
    ann_.reset();
}

std::size_t HybridIndex::size() const {
    std::shared_lock lock(mutex_);
    std::size_t n = 0;
    for (const auto& s : shards_) n += s.size();
    return n;
}

std::optional<DocEntry> HybridIndex::find(std::string_view doc_id) const {
    std::shared_lock lock(mutex_);
    const Shard& s = shards_[shard_of(doc_id, shards_.size())];
    const auto it = s.by_id.find(std::string(doc_id));
    if (it == s.by_id.end()) return std::nullopt;
    return s.docs[it->second];
}

bool HybridIndex::contains(std::string_view doc_id) const {
    std::shared_lock lock(mutex_);
    const Shard& s = shards_[shard_of(doc_id, shards_.size())];
    return s.by_id.contains(std::string(doc_id));
}

double HybridIndex::avgdl_locked() const {
    std::size_t n = 0;
    double total = 0.0;
    for (const auto& s : shards_) {
        n += s.size();
        for (std::size_t f = 0; f < kFieldCount; ++f) {
            total += params_.field_weights[f] * static_cast<double>(s.total_lengths[f]);
        }
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

double HybridIndex::idf_locked(const std::string& term) const {
    std::size_t n = 0;
    std::size_t df = 0;
    for (const auto& s : shards_) {
        n += s.size();
        if (const auto it = s.df.find(term); it != s.df.end()) df += it->second;
    }
    const double N = static_cast<double>(n);
    const double d = static_cast<double>(df);
    return std::log(1.0 + (N - d + 0.5) / (d + 0.5));
}

double HybridIndex::doc_length(const Shard& s, std::uint32_t local) const {
    double dl = 0.0;
    for (std::size_t f = 0; f < kFieldCount; ++f) {
        dl += params_.field_weights[f] * static_cast<double>(s.lengths[local][f]);
    }
    return dl;
}

double HybridIndex::term_score(double idf, double tfw, double dl, double avgdl) const {
    if (tfw <= 0.0) return 0.0;
    const double norm = avgdl > 0.0 ? dl / avgdl : 1.0;
    return idf * tfw * (params_.k1 + 1.0) / (tfw + params_.k1 * (1.0 - params_.b + params_.b * norm));
}

double HybridIndex::bm25_score(std::span<const std::string> terms, std::string_view doc_id) const {
    std::shared_lock lock(mutex_);
    const Shard& s = shards_[shard_of(doc_id, shards_.size())];
    const auto it = s.by_id.find(std::string(doc_id));
    if (it == s.by_id.end()) fail(ErrorCode::NotFound, "unknown doc_id: " + std::string(doc_id));
    const auto local = it->second;
    const double avgdl = avgdl_locked();
    const double dl = doc_length(s, local);
    double score = 0.0;
    for (const auto& t : terms) {
        const auto p = s.postings.find(t);
        if (p == s.postings.end()) continue;
        score += term_score(idf_locked(t), weighted_tf(p->second, local, params_.field_weights), dl, avgdl);
    }
    return score;
}

std::vector<ScoredDoc> HybridIndex::sparse_topk(std::span<const std::string> terms, std::size_t k) const {
    std::shared_lock lock(mutex_);
    if (k == 0 || terms.empty()) return {};
    const double avgdl = avgdl_locked();
    std::vector<double> idfs;
    idfs.reserve(terms.size());
    for (const auto& t : terms) idfs.push_back(idf_locked(t));

    const auto shard_count = static_cast<std::int64_t>(shards_.size());
    std::vector<std::vector<ScoredDoc>> partial(shards_.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t si = 0; si < shard_count; ++si) {
        const Shard& s = shards_[static_cast<std::size_t>(si)];
        std::vector<double> acc(s.size(), 0.0);
        std::vector<std::uint32_t> touched;
        // Accumulate term by term in query order so the sum matches bm25_score exactly.
        for (std::size_t ti = 0; ti < terms.size(); ++ti) {
            const auto p = s.postings.find(terms[ti]);
            if (p == s.postings.end()) continue;
            const auto& list = p->second;
            for (std::size_t i = 0; i < list.size();) {
                const auto doc = list[i].doc;
                double tfw = 0.0;
                for (; i < list.size() && list[i].doc == doc; ++i) {
                    tfw += params_.field_weights[list[i].field] * list[i].tf;
                }
                if (acc[doc] == 0.0) touched.push_back(doc);
                acc[doc] += term_score(idfs[ti], tfw, doc_length(s, doc), avgdl);
            }
        }
        auto& out = partial[static_cast<std::size_t>(si)];
        for (auto d : touched) {
            if (acc[d] > 0.0) out.push_back({s.docs[d].doc_id, acc[d]});
        }
        keep_top(out, k);
    }
    std::vector<ScoredDoc> merged;
    for (auto& p : partial) std::move(p.begin(), p.end(), std::back_inserter(merged));
    keep_top(merged, k);
    return merged;
}

std::vector<ScoredDoc> HybridIndex::dense_exact_locked(std::span<const double> q, std::size_t k) const {
    std::vector<ScoredDoc> all;
    for (const auto& s : shards_) {
        if (s.size() == 0) continue;
        std::vector<double> scores(s.size());
        kernels::parallel::dot_scores(s.embeddings, dim_, q, scores);
        for (std::size_t i = 0; i < s.size(); ++i) all.push_back({s.docs[i].doc_id, scores[i]});
    }
    keep_top(all, k);
    return all;
}

std::vector<ScoredDoc> HybridIndex::dense_ann_locked(std::span<const double> q, std::size_t k) const {
    const auto& ann = *ann_;
    std::vector<std::pair<double, std::size_t>> cs;
    for (std::size_t c = 0; c < ann.centroids.size(); ++c) {
        cs.emplace_back(dot(ann.centroids[c].data(), q.data(), dim_), c);
    }
    const auto probes = std::min(ann.probes, cs.size());
    std::partial_sort(cs.begin(), cs.begin() + static_cast<std::ptrdiff_t>(probes), cs.end(),
                      [](const auto& a, const auto& b) {
                          return a.first != b.first ? a.first > b.first : a.second < b.second;
                      });
    std::vector<ScoredDoc> out;
    for (std::size_t i = 0; i < probes; ++i) {
        for (const auto& [si, local] : ann.lists[cs[i].second]) {
            const Shard& s = shards_[si];
            out.push_back({s.docs[local].doc_id, dot(s.embeddings.data() + std::size_t{local} * dim_, q.data(), dim_)});
        }
    }
    keep_top(out, k);
    return out;
}

std::vector<ScoredDoc> HybridIndex::dense_topk(std::span<const double> query, std::size_t k,
                                               DenseMode mode) const {
    require(query.size() == dim_, ErrorCode::InvalidInput, "query dimension mismatch");
    std::shared_lock lock(mutex_);
    if (k == 0) return {};
    if (mode == DenseMode::Approximate && ann_) return dense_ann_locked(query, k);
    return dense_exact_locked(query, k);
}

double HybridIndex::dense_score(std::span<const double> query, std::string_view doc_id) const {
    require(query.size() == dim_, ErrorCode::InvalidInput, "query dimension mismatch");
    std::shared_lock lock(mutex_);
    const Shard& s = shards_[shard_of(doc_id, shards_.size())];
    const auto it = s.by_id.find(std::string(doc_id));
    if (it == s.by_id.end()) fail(ErrorCode::NotFound, "unknown doc_id: " + std::string(doc_id));
    // Same arithmetic as the dot kernel so exact top-k scores match.
    double out = 0.0;
    kernels::serial::dot_scores(std::span<const double>(s.embeddings.data() + std::size_t{it->second} * dim_, dim_),
                                dim_, query, std::span<double>(&out, 1));
    return out;
}

std::size_t HybridIndex::document_frequency(const std::string& term) const {
    std::shared_lock lock(mutex_);
    std::size_t df = 0;
    for (const auto& s : shards_) {
        if (const auto it = s.df.find(term); it != s.df.end()) df += it->second;
    }
    return df;
}

double HybridIndex::idf(const std::string& term) const {
    std::shared_lock lock(mutex_);
    return idf_locked(term);
}

double HybridIndex::average_length() const {
    std::shared_lock lock(mutex_);
    return avgdl_locked();
}

void HybridIndex::build_ann(const AnnConfig& config) {
    std::unique_lock lock(mutex_);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> ids;
    for (std::uint32_t si = 0; si < shards_.size(); ++si) {
        for (std::uint32_t l = 0; l < shards_[si].size(); ++l) ids.emplace_back(si, l);
    }
    auto state = std::make_unique<AnnState>();
    if (ids.empty()) {
        ann_ = std::move(state);
        return;
    }
    auto vec = [&](std::size_t i) {
        return shards_[ids[i].first].embeddings.data() + std::size_t{ids[i].second} * dim_;
    };
    std::size_t lists = config.lists != 0
                            ? config.lists
                            : static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(ids.size()))));
    lists = std::clamp<std::size_t>(lists, 1, ids.size());

    // Spherical k-means, seeded by a deterministic sample of distinct points.
    std::vector<std::size_t> perm(ids.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(config.seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<double>> centroids(lists);
    for (std::size_t c = 0; c < lists; ++c) centroids[c].assign(vec(perm[c]), vec(perm[c]) + dim_);

    std::vector<std::size_t> assign(ids.size(), 0);
    for (int it = 0; it <= config.iterations; ++it) {
        const auto n = static_cast<std::int64_t>(ids.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            const double* x = vec(static_cast<std::size_t>(i));
            std::size_t best = 0;
            double best_s = -2.0;
            for (std::size_t c = 0; c < lists; ++c) {
                const double sc = dot(centroids[c].data(), x, dim_);
                if (sc > best_s) {
                    best_s = sc;
                    best = c;
                }
            }
            assign[static_cast<std::size_t>(i)] = best;
        }
        if (it == config.iterations) break;
        std::vector<std::vector<double>> sums(lists, std::vector<double>(dim_, 0.0));
        std::vector<std::size_t> counts(lists, 0);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const double* x = vec(i);
            for (std::size_t j = 0; j < dim_; ++j) sums[assign[i]][j] += x[j];
            ++counts[assign[i]];
        }
        for (std::size_t c = 0; c < lists; ++c) {
            double nn = 0.0;
            for (double v : sums[c]) nn += v * v;
            if (counts[c] == 0 || nn == 0.0) continue;  // keep the old centroid
            nn = std::sqrt(nn);
            for (std::size_t j = 0; j < dim_; ++j) centroids[c][j] = sums[c][j] / nn;
        }
    }
    state->centroids = std::move(centroids);
    state->lists.assign(lists, {});
    for (std::size_t i = 0; i < ids.size(); ++i) state->lists[assign[i]].push_back(ids[i]);
    state->probes = config.probes != 0 ? std::min(config.probes, lists) : std::max<std::size_t>(1, lists / 8);
    ann_ = std::move(state);
}

bool HybridIndex::has_ann() const {
    std::shared_lock lock(mutex_);
    return ann_ != nullptr;
}

void HybridIndex::set_ann_probes(std::size_t probes) {
    std::unique_lock lock(mutex_);
    require(ann_ != nullptr, ErrorCode::InvalidInput, "approximate index not built");
    ann_->probes = std::clamp<std::size_t>(probes, 1, std::max<std::size_t>(1, ann_->lists.size()));
}

std::size_t HybridIndex::ann_probes() const {
    std::shared_lock lock(mutex_);
    return ann_ ? ann_->probes : 0;
}

std::size_t HybridIndex::ann_lists() const {
    std::shared_lock lock(mutex_);
    return ann_ ? ann_->lists.size() : 0;
}

double HybridIndex::ann_self_test(std::size_t k, std::size_t sample) const {
    std::shared_lock lock(mutex_);
    require(ann_ != nullptr, ErrorCode::InvalidInput, "approximate index not built");
    std::vector<const double*> queries;
    for (const auto& s : shards_) {
        for (std::size_t l = 0; l < s.size(); ++l) queries.push_back(s.embeddings.data() + l * dim_);
    }
    if (queries.empty()) return 1.0;
    const std::size_t step = std::max<std::size_t>(1, queries.size() / std::max<std::size_t>(1, sample));
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < queries.size() && n < sample; i += step, ++n) {
        const std::span<const double> q(queries[i], dim_);
        const auto exact = dense_exact_locked(q, k);
        const auto approx = dense_ann_locked(q, k);
        std::size_t hit = 0;
        for (const auto& e : exact) {
            hit += std::any_of(approx.begin(), approx.end(),
                               [&](const ScoredDoc& a) { return a.doc_id == e.doc_id; })
                       ? 1
                       : 0;
        }
        total += exact.empty() ? 1.0 : static_cast<double>(hit) / static_cast<double>(exact.size());
    }
    return total / static_cast<double>(n);
}

double HybridIndex::calibrate_ann(double target, std::size_t sample) {
    if (!has_ann()) build_ann();
    double recall = ann_self_test(10, sample);
    while (recall < target && ann_probes() < ann_lists()) {
        set_ann_probes(ann_probes() * 2);
        recall = ann_self_test(10, sample);
    }
    return recall;
}

IndexStats HybridIndex::stats() const {
    std::shared_lock lock(mutex_);
    IndexStats st;
    std::unordered_map<std::string, bool> terms;
    for (const auto& s : shards_) {
        st.documents += s.size();
        st.shard_sizes.push_back(s.size());
        for (const auto& [t, list] : s.postings) {
            terms[t] = true;
            st.postings += list.size();
        }
    }
    st.terms = terms.size();
    st.average_length = avgdl_locked();
    return st;
}

}  // namespace archsearch::index
