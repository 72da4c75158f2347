#include "archsearch/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>
#include <set>

#include "archsearch/error.hpp"
#include "archsearch/text.hpp"

namespace archsearch::fusion {

using nlohmann::json;
namespace chr = std::chrono;

namespace {

const std::set<std::string> kRevStopwords = {"of", "to", "in", "on", "at", "is", "as", "by", "or",
                                             "an", "if", "be", "it", "no"};

std::string canonical_rev(std::string v) {
    v = to_upper_ascii(v);
    if (!v.empty() && std::all_of(v.begin(), v.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        v = std::to_string(std::stoi(v));
    }
    return v;
}

std::string strip_dashes(std::string s) {
    s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
    return s;
}

Date make_date(int y, unsigned m, unsigned d) {
    return Date{chr::year_month_day{chr::year{y}, chr::month{m}, chr::day{d}}};
}

Date shift_days(const Date& d, int days) {
    return Date{chr::year_month_day{chr::sys_days{d.ymd} + chr::days{days}}};
}

// "2010" or "2010-05-01" -> (first day, last day) covered by the phrase.
std::optional<std::pair<Date, Date>> date_span(const std::string& s) {
    if (s.size() == 4) {
        const int y = std::stoi(s);
        return std::make_pair(make_date(y, 1, 1), make_date(y, 12, 31));
    }
    if (auto d = Date::parse(s)) return std::make_pair(*d, *d);
    return std::nullopt;
}

void add_constraint(QuerySpec& q, Constraint c) {
    if (std::find(q.constraints.begin(), q.constraints.end(), c) == q.constraints.end()) {
        q.constraints.push_back(std::move(c));
    }
}

int word_count(const std::string& w) {
    if (w == "one" || w == "single" || w == "a") return 1;
    if (w == "two") return 2;
    if (w == "three") return 3;
    return std::stoi(w);
}

bool overlaps(std::size_t b, std::size_t e, const std::vector<std::pair<std::size_t, std::size_t>>& spans) {
    return std::any_of(spans.begin(), spans.end(), [&](const auto& s) { return b < s.second && s.first < e; });
}

bool doc_has_token(const index::DocEntry& doc, const std::string& token) {
    for (const auto& f : doc.fields) {
        const auto toks = tokenize(f);
        if (std::find(toks.begin(), toks.end(), token) != toks.end()) return true;
    }
    return false;
}

enum class Verdict { NotGoverned, Satisfied, Violated };

Verdict check_facility(const index::DocEntry& doc, const std::string& facility) {
    const auto want = normalize_identifier(facility);
    if (const auto* d = std::get_if<extraction::DrawingMetadata>(&doc.metadata)) {
        if (!d->facility_tag) return Verdict::Violated;
        return normalize_identifier(*d->facility_tag) == want ? Verdict::Satisfied : Verdict::Violated;
    }
    const auto& m = std::get<extraction::DocumentMetadata>(doc.metadata);
    for (const auto& t : m.facility_tags) {
        if (normalize_identifier(t) == want) return Verdict::Satisfied;
    }
    return Verdict::Violated;
}

Verdict check_asset(const index::DocEntry& doc, const std::string& asset) {
    const auto want = strip_dashes(normalize_identifier(asset));
    if (const auto* d = std::get_if<extraction::DrawingMetadata>(&doc.metadata)) {
        if (strip_dashes(d->drawing_number) == want) return Verdict::Satisfied;
        for (const auto& p : d->parts) {
            if (strip_dashes(p.part_id) == want) return Verdict::Satisfied;
        }
    } else {
        const auto& m = std::get<extraction::DocumentMetadata>(doc.metadata);
        if (m.doc_id && strip_dashes(normalize_identifier(*m.doc_id)) == want) return Verdict::Satisfied;
    }
    std::string lower = want;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return doc_has_token(doc, lower) ? Verdict::Satisfied : Verdict::Violated;
}

Verdict check_constraint(const index::DocEntry& doc, const Constraint& c) {
    const auto* d = std::get_if<extraction::DrawingMetadata>(&doc.metadata);
    switch (c.kind) {
        case ConstraintKind::Revision:
            // Revisions only gate matching when required with a concrete value.
            if (c.polarity == Polarity::Exclude || c.value == "*") return Verdict::NotGoverned;
            if (!d || !d->revision) return Verdict::Violated;
            return *d->revision == c.value ? Verdict::Satisfied : Verdict::Violated;
        case ConstraintKind::Size:
            if (!d || !d->size_code) return Verdict::Violated;
            return std::string(1, *d->size_code) == c.value ? Verdict::Satisfied : Verdict::Violated;
        case ConstraintKind::SheetCount:
            if (!d || !d->sheet) return Verdict::Violated;
            return std::to_string(d->sheet->second) == c.value ? Verdict::Satisfied : Verdict::Violated;
        case ConstraintKind::DateMin:
        case ConstraintKind::DateMax: {
            const auto bound = Date::parse(c.value);
            if (!bound || !doc.date) return Verdict::Violated;
            const bool ok = c.kind == ConstraintKind::DateMin ? *doc.date >= *bound : *doc.date <= *bound;
            return ok ? Verdict::Satisfied : Verdict::Violated;
        }
        case ConstraintKind::PartsList: {
            const bool has = d && !d->parts.empty();
            if (c.polarity == Polarity::Exclude) return has ? Verdict::Violated : Verdict::Satisfied;
            return has ? Verdict::Satisfied : Verdict::Violated;
        }
    }
    return Verdict::NotGoverned;
}

double mean_of(std::span<const double> xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

std::string_view to_string(ConstraintKind k) {
    switch (k) {
        case ConstraintKind::Revision: return "revision";
        case ConstraintKind::Size: return "size";
        case ConstraintKind::SheetCount: return "sheet_count";
        case ConstraintKind::DateMin: return "date_min";
        case ConstraintKind::DateMax: return "date_max";
        case ConstraintKind::PartsList: return "parts_list";
    }
    return "unknown";
}

std::string_view to_string(Polarity p) { return p == Polarity::Require ? "require" : "exclude"; }

json to_json(const QuerySpec& q) {
    json types = json::array();
    for (auto t : q.allowed_types) types.push_back(std::string(to_string(t)));
    json cons = json::array();
    for (const auto& c : q.constraints) {
        cons.push_back({{"kind", std::string(to_string(c.kind))},
                        {"value", c.value},
                        {"polarity", std::string(to_string(c.polarity))}});
    }
    return json{{"raw_text", q.raw_text},
                {"normalized_text", q.normalized_text},
                {"rewritten_text", q.rewritten_text},
                {"facility", q.facility ? json(*q.facility) : json(nullptr)},
                {"asset_part", q.asset_part ? json(*q.asset_part) : json(nullptr)},
                {"allowed_types", std::move(types)},
                {"constraints", std::move(cons)}};
}

void finalize_query(QuerySpec& q) {
    q.normalized_text = normalize_text(q.raw_text);
    q.rewritten_text = q.normalized_text;
    auto append = [&](const std::string& v) {
        const auto n = normalize_text(v);
        if (!n.empty()) q.rewritten_text += " " + n;
    };
    if (q.facility) append(*q.facility);
    if (q.asset_part) append(*q.asset_part);
    std::sort(q.allowed_types.begin(), q.allowed_types.end());
    q.allowed_types.erase(std::unique(q.allowed_types.begin(), q.allowed_types.end()), q.allowed_types.end());
}

SlotParser::SlotParser(std::vector<std::string> facility_patterns) : fields_(std::move(facility_patterns)) {}

QuerySpec SlotParser::parse(std::string_view raw, std::optional<std::vector<ItemType>> allowed_types) const {
    QuerySpec q;
    q.raw_text = std::string(raw);
    const std::string text = normalize_text(raw);
    const std::string upper = to_upper_ascii(text);

    const auto facilities = fields_.find_facilities(upper);
    if (!facilities.empty()) q.facility = facilities.front();

    // Revision mentions. Negated forms first so their spans are not re-read as requirements.
    std::vector<std::pair<std::size_t, std::size_t>> used;
    static const std::regex neg_rev(
        R"(\b(?:exclude|excluding|without|no|not|except)\s+(?:any\s+|all\s+)?(?:rev|revision|revisions|revs)\b\.?(?:\s+([a-z]{1,2}|\d{1,3})\b)?)");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), neg_rev); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        std::string v = m[1].matched ? m[1].str() : std::string{};
        if (!v.empty() && kRevStopwords.contains(v)) v.clear();
        add_constraint(q, {ConstraintKind::Revision, v.empty() ? "*" : canonical_rev(v), Polarity::Exclude});
        used.emplace_back(m.position(0), m.position(0) + m.length(0));
    }
    static const std::regex req_rev(
        R"(\b(?:revised\s+to\s+(?:version|rev|revision)|rev|revision|version)\b\.?\s*(?:#\s*)?([a-z]{1,2}|\d{1,3})\b)");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), req_rev); it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        const auto b = static_cast<std::size_t>(m.position(0));
        if (overlaps(b, b + static_cast<std::size_t>(m.length(0)), used)) continue;
        const auto v = m[1].str();
        if (kRevStopwords.contains(v)) continue;
        add_constraint(q, {ConstraintKind::Revision, canonical_rev(v), Polarity::Require});
        used.emplace_back(b, b + static_cast<std::size_t>(m.length(0)));
    }

    std::smatch m;
    static const std::regex size_re(R"(\bsize\s*:?\s*([a-f])\b)");
    if (std::regex_search(text, m, size_re)) {
        add_constraint(q, {ConstraintKind::Size, to_upper_ascii(m[1].str()), Polarity::Require});
    }
    static const std::regex sheet_re(R"(\b(\d{1,3}|one|two|three|single|a)\s*-?\s*sheets?\b)");
    if (std::regex_search(text, m, sheet_re)) {
        add_constraint(q, {ConstraintKind::SheetCount, std::to_string(word_count(m[1].str())), Polarity::Require});
    }

    static const std::regex between_re(R"(\bbetween\s+(\d{4}(?:-\d{2}-\d{2})?)\s+and\s+(\d{4}(?:-\d{2}-\d{2})?)\b)");
    static const std::regex after_re(R"(\b(after|since|from)\s+(\d{4}(?:-\d{2}-\d{2})?)\b)");
    static const std::regex before_re(R"(\b(before|until|prior\s+to)\s+(\d{4}(?:-\d{2}-\d{2})?)\b)");
    static const std::regex in_re(R"(\b(?:in|during|dated)\s+(\d{4})\b)");
    if (std::regex_search(text, m, between_re)) {
        const auto a = date_span(m[1].str());
        const auto b = date_span(m[2].str());
        if (a && b) {
            add_constraint(q, {ConstraintKind::DateMin, a->first.to_string(), Polarity::Require});
            add_constraint(q, {ConstraintKind::DateMax, b->second.to_string(), Polarity::Require});
        }
    } else {
        if (std::regex_search(text, m, after_re)) {
            if (auto s = date_span(m[2].str())) {
                // "after X" is strict, "since/from X" inclusive.
                const Date lo = m[1].str() == "after" ? shift_days(s->second, 1) : s->first;
                add_constraint(q, {ConstraintKind::DateMin, lo.to_string(), Polarity::Require});
            }
        }
        if (std::regex_search(text, m, before_re)) {
            if (auto s = date_span(m[2].str())) {
                const Date hi = m[1].str() == "until" ? s->second : shift_days(s->first, -1);
                add_constraint(q, {ConstraintKind::DateMax, hi.to_string(), Polarity::Require});
            }
        }
        if (std::regex_search(text, m, in_re)) {
            if (auto s = date_span(m[1].str())) {
                add_constraint(q, {ConstraintKind::DateMin, s->first.to_string(), Polarity::Require});
                add_constraint(q, {ConstraintKind::DateMax, s->second.to_string(), Polarity::Require});
            }
        }
    }

    static const std::regex no_parts(R"(\b(?:no|without|excluding|exclude)\s+(?:a\s+)?(?:parts?\s*(?:list|lists)|bom|bill\s+of\s+materials?)\b)");
    static const std::regex with_parts(R"(\b(?:with|has|having|including)\s+(?:a\s+)?(?:parts?\s*(?:list|lists)|bom|bill\s+of\s+materials?)\b)");
    if (std::regex_search(text, no_parts)) {
        add_constraint(q, {ConstraintKind::PartsList, "*", Polarity::Exclude});
    } else if (std::regex_search(text, with_parts)) {
        add_constraint(q, {ConstraintKind::PartsList, "*", Polarity::Require});
    }

    if (allowed_types) {
        q.allowed_types = *allowed_types;
    } else {
        static const std::regex drawing_re(R"(\b(?:drawings?|dwgs?|schematics?|diagrams?|blueprints?|prints?)\b)");
        static const std::regex policy_re(R"(\b(?:policy|policies)\b)");
        static const std::regex procedure_re(
            R"(\b(?:procedures?|manuals?|checklists?|instructions?|sops?|work\s+instructions?)\b)");
        if (std::regex_search(text, drawing_re)) q.allowed_types.push_back(ItemType::Drawing);
        if (std::regex_search(text, policy_re)) q.allowed_types.push_back(ItemType::Policy);
        if (std::regex_search(text, procedure_re)) q.allowed_types.push_back(ItemType::Procedure);
    }

    // Asset / part identifier: first identifier-like token that is not a facility,
    // a year or a revision value.
    static const std::regex ident_re(R"(\b[A-Z0-9]+(?:-[A-Z0-9]+)+\b|\b[A-Z0-9]*[0-9][A-Z0-9]*\b)");
    for (auto it = std::sregex_iterator(upper.begin(), upper.end(), ident_re); it != std::sregex_iterator(); ++it) {
        const auto tok = it->str();
        const auto b = static_cast<std::size_t>(it->position(0));
        if (overlaps(b, b + tok.size(), used)) continue;
        const bool has_alpha = std::any_of(tok.begin(), tok.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
        const auto digits = std::count_if(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; });
        if (!has_alpha && digits < 5) continue;  // years, counts, dates
        if (tok.size() < 3) continue;
        if (std::any_of(facilities.begin(), facilities.end(),
                        [&](const std::string& f) { return f.find(tok) != std::string::npos; }))
            continue;
        static const std::regex iso_date(R"(^\d{4}-\d{2}-\d{2}$)");
        if (std::regex_match(tok, iso_date)) continue;
        q.asset_part = normalize_identifier(tok);
        break;
    }

    finalize_query(q);
    return q;
}

void FusionParams::validate() const {
    require(std::isfinite(lambda) && lambda >= 0.0 && lambda <= 1.0, ErrorCode::InvalidInput,
            "lambda must lie in [0,1]");
    require(std::isfinite(sigma_floor) && sigma_floor > 0.0, ErrorCode::InvalidInput,
            "sigma_floor must be positive");
}

void RerankParams::validate() const {
    for (double v : {alpha, beta, gamma, recency_weight, quality_weight}) {
        require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidInput,
                "rerank parameters must be finite and nonnegative");
    }
}

std::vector<double> znorm(std::span<const double> scores, double sigma_floor) {
    require(!scores.empty(), ErrorCode::InvalidInput, "znorm of an empty list");
    require(sigma_floor > 0.0, ErrorCode::InvalidInput, "sigma_floor must be positive");
    const double mu = mean_of(scores);
    double ss = 0.0;
    for (double s : scores) ss += (s - mu) * (s - mu);
    const double sigma = std::max(std::sqrt(ss / static_cast<double>(scores.size())), sigma_floor);
    std::vector<double> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - mu) / sigma;
    return out;
}

std::vector<double> fuse(std::span<const double> z_sparse, std::span<const double> z_dense, double lambda) {
    require(z_sparse.size() == z_dense.size(), ErrorCode::InvalidInput,
            "sparse and dense z-scores cover different candidate sets");
    std::vector<double> out(z_sparse.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = lambda * z_sparse[i] + (1.0 - lambda) * z_dense[i];
    return out;
}

json to_json(const Candidate& c) {
    return json{{"doc_id", c.doc_id},
                {"s_sparse", c.s_sparse},
                {"s_dense", c.s_dense},
                {"z_sparse", c.z_sparse},
                {"z_dense", c.z_dense},
                {"s_lambda", c.s_lambda},
                {"match_region", c.match_region},
                {"consistency_rev", c.consistency_rev},
                {"off_type", c.off_type},
                {"s_final", c.s_final},
                {"recency", c.recency},
                {"quality", c.quality}};
}

void apply_fusion(std::span<Candidate> cands, const FusionParams& params) {
    params.validate();
    if (cands.empty()) return;
    std::vector<double> sp;
    std::vector<double> de;
    for (const auto& c : cands) {
        sp.push_back(c.s_sparse);
        de.push_back(c.s_dense);
    }
    const auto zs = znorm(sp, params.sigma_floor);
    const auto zd = znorm(de, params.sigma_floor);
    const auto sl = fuse(zs, zd, params.lambda);
    for (std::size_t i = 0; i < cands.size(); ++i) {
        cands[i].z_sparse = zs[i];
        cands[i].z_dense = zd[i];
        cands[i].s_lambda = sl[i];
    }
}

int match_region(const index::DocEntry& doc, const QuerySpec& q) {
    bool governed = false;
    auto take = [&](Verdict v) {
        if (v == Verdict::NotGoverned) return true;
        governed = true;
        return v == Verdict::Satisfied;
    };
    if (q.facility && !take(check_facility(doc, *q.facility))) return 0;
    if (q.asset_part && !take(check_asset(doc, *q.asset_part))) return 0;
    for (const auto& c : q.constraints) {
        if (!take(check_constraint(doc, c))) return 0;
    }
    return governed ? 1 : 0;
}

double consistency_rev(const index::DocEntry& doc, const QuerySpec& q) {
    const auto* d = std::get_if<extraction::DrawingMetadata>(&doc.metadata);
    double out = 0.0;
    for (const auto& c : q.constraints) {
        if (c.kind != ConstraintKind::Revision || !d) continue;
        bool violated = false;
        if (c.polarity == Polarity::Require) {
            violated = c.value != "*" && d->revision && *d->revision != c.value;
        } else if (c.value == "*") {
            violated = d->revision.has_value();
        } else {
            violated = d->revision && *d->revision == c.value;
        }
        if (violated) out -= 1.0;
    }
    return out;
}

int off_type(const index::DocEntry& doc, const QuerySpec& q) {
    if (q.allowed_types.empty()) return 0;
    const auto t = doc.item_type();
    return std::find(q.allowed_types.begin(), q.allowed_types.end(), t) == q.allowed_types.end() ? 1 : 0;
}

void fill_tie_keys(std::span<Candidate> cands, std::span<const index::DocEntry* const> docs) {
    require(cands.size() == docs.size(), ErrorCode::InvalidInput, "candidates and documents misaligned");
    std::optional<long long> lo;
    std::optional<long long> hi;
    for (const auto* d : docs) {
        if (!d->date) continue;
        const auto s = d->date->serial();
        lo = lo ? std::min(*lo, s) : s;
        hi = hi ? std::max(*hi, s) : s;
    }
    for (std::size_t i = 0; i < cands.size(); ++i) {
        cands[i].quality = docs[i]->quality;
        if (!docs[i]->date) {
            cands[i].recency = -1.0;
        } else if (*hi == *lo) {
            cands[i].recency = 1.0;
        } else {
            cands[i].recency = static_cast<double>(docs[i]->date->serial() - *lo) / static_cast<double>(*hi - *lo);
        }
    }
}

bool ranks_before(const Candidate& a, const Candidate& b, const RerankParams& p) {
    if (a.s_final != b.s_final) return a.s_final > b.s_final;
    const double ra = p.recency_weight * a.recency;
    const double rb = p.recency_weight * b.recency;
    if (ra != rb) return ra > rb;
    const double qa = p.quality_weight * a.quality;
    const double qb = p.quality_weight * b.quality;
    if (qa != qb) return qa > qb;
    return a.doc_id < b.doc_id;
}

void score_and_sort(std::vector<Candidate>& cands, const RerankParams& params) {
    params.validate();
    for (auto& c : cands) {
        c.s_final = c.s_lambda + params.alpha * c.match_region + params.beta * c.consistency_rev -
                    params.gamma * c.off_type;
    }
    std::sort(cands.begin(), cands.end(),
              [&](const Candidate& a, const Candidate& b) { return ranks_before(a, b, params); });
}

void rerank(std::vector<Candidate>& cands, std::vector<const index::DocEntry*>& docs, const QuerySpec& q,
            const RerankParams& params) {
    require(cands.size() == docs.size(), ErrorCode::InvalidInput, "candidates and documents misaligned");
    for (std::size_t i = 0; i < cands.size(); ++i) {
        cands[i].match_region = match_region(*docs[i], q);
        cands[i].consistency_rev = consistency_rev(*docs[i], q);
        cands[i].off_type = off_type(*docs[i], q);
    }
    fill_tie_keys(cands, docs);
    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), 0);
    for (auto& c : cands) {
        c.s_final = c.s_lambda + params.alpha * c.match_region + params.beta * c.consistency_rev -
                    params.gamma * c.off_type;
    }
    params.validate();
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ranks_before(cands[a], cands[b], params); });
    std::vector<Candidate> c2;
    std::vector<const index::DocEntry*> d2;
    for (auto i : order) {
        c2.push_back(std::move(cands[i]));
        d2.push_back(docs[i]);
    }
    cands = std::move(c2);
    docs = std::move(d2);
}

}  // namespace archsearch::fusion
