#include "archsearch/synth.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "archsearch/error.hpp"
#include "archsearch/types.hpp"

namespace archsearch::synth {

using nlohmann::json;

namespace {

struct AssetName {
    const char* name;
    const char* prefix;
    const char* fixed_id;
};

constexpr AssetName kAssets[] = {
    {"feedwater pump", "FWP", "FWP-101"},     {"cooling tower fan", "CTF", "CTF-220"},
    {"motor control center", "MCC", "MCC-3"}, {"voltage monitor", "VMR", "VMR-12"},
    {"air compressor", "ACP", "ACP-407"},     {"heat exchanger", "HXR", "HXR-115"},
    {"transfer switch", "ATS", "ATS-62"},     {"boiler feed valve", "BFV", "BFV-318"},
    {"lube oil skid", "LOS", "LOS-77"},       {"chiller unit", "CHU", "CHU-540"},
    {"fire water pump", "FWA", "FWA-233"},    {"emergency generator", "EGN", "EGN-905"},
};
constexpr std::size_t kAssetCount = sizeof(kAssets) / sizeof(kAssets[0]);

constexpr const char* kNotes[] = {
    "ALL DIMENSIONS IN MILLIMETERS UNLESS OTHERWISE NOTED",
    "FIELD VERIFY CLEARANCES BEFORE INSTALLATION",
    "TORQUE ANCHOR BOLTS TO VENDOR VALUES",
    "PAINT SYSTEM PER SITE COATING STANDARD",
    "GROUNDING PER ELECTRICAL GENERAL NOTES",
    "HYDROSTATIC TEST AFTER FINAL ASSEMBLY",
    "MAINTAIN ACCESS AISLE OF 900 ON SERVICE SIDE",
    "LIFTING LUGS RATED FOR FULL OPERATING WEIGHT",
};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }
    bool chance(double p) { return uniform(0.0, 1.0) < p; }

private:
    std::mt19937_64 gen_;
};

std::string pad(std::size_t v, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*zu", width, v);
    return buf;
}

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::string date_from(Rng& rng) {
    // 2015-01-01 plus up to ~9 years.
    const auto base = std::chrono::sys_days{std::chrono::year{2015} / 1 / 1};
    const auto d = base + std::chrono::days{static_cast<int>(rng.below(9 * 365))};
    return Date{std::chrono::year_month_day{d}}.to_string();
}

std::vector<std::string> facilities(std::size_t n, std::uint64_t seed) {
    Rng rng(seed ^ 0xfac1u);
    std::vector<std::string> out;
    while (out.size() < n) {
        std::string tag;
        tag += static_cast<char>('A' + rng.below(26));
        tag += static_cast<char>('1' + rng.below(9));
        tag += static_cast<char>('A' + rng.below(26));
        tag += pad(rng.below(10000), 4);
        if (std::find(out.begin(), out.end(), tag) == out.end()) out.push_back(tag);
    }
    return out;
}

json drawing_features(Rng& rng) {
    const bool clear = rng.chance(0.9);
    const double p = clear ? rng.uniform(0.6, 0.99) : rng.uniform(0.25, 0.6);
    const double b = rng.uniform(0.5, 1.0);
    const double e = rng.uniform(0.4, 0.95);
    const double l = rng.uniform(0.45, 0.95);
    return json{{"p_draw", p}, {"h", (b + e + l) / 3.0}, {"cad_prior", rng.chance(0.6) ? 1 : 0},
                {"b", b},      {"edge", e},             {"lines", l}};
}

json document_features(Rng& rng) {
    const bool clear = rng.chance(0.9);
    const double p = clear ? rng.uniform(0.01, 0.4) : rng.uniform(0.4, 0.7);
    const double b = rng.uniform(0.0, 0.5);
    const double e = rng.uniform(0.05, 0.5);
    const double l = rng.uniform(0.0, 0.45);
    return json{{"p_draw", p}, {"h", (b + e + l) / 3.0}, {"cad_prior", rng.chance(0.05) ? 1 : 0},
                {"b", b},      {"edge", e},             {"lines", l}};
}

struct DrawingSpec {
    std::string kind_title;  // e.g. GENERAL ARRANGEMENT
    std::string facility;
    std::vector<std::string> revs;
    char size = 'D';
    int sheets = 1;
    bool parts = false;
    std::vector<std::string> extra;  // additional data-block lines
    std::size_t notes = 2;
};

struct Family {
    std::string name;
    std::string id;
    std::string f0, f1, f2;
    std::vector<std::string> drawing_numbers;
    std::vector<std::string> doc_ids;
};

class Builder {
public:
    Builder(Rng& rng, std::vector<json>& out) : rng_(rng), out_(out) {}

    std::string drawing(const Family& fam, std::size_t slot, const DrawingSpec& s) {
        const auto& number = fam.drawing_numbers[slot];
        const auto file_id = "F-" + number;
        std::string data = upper(fam.name) + " " + fam.id + " " + s.kind_title + "\n";
        data += "FACILITY " + s.facility + "\n";
        data += "SHEET 1 OF " + std::to_string(s.sheets) + "  SIZE " + std::string(1, s.size) + "\n";
        for (const auto& e : s.extra) data += e + "\n";
        for (std::size_t i = 0; i < s.notes; ++i) {
            data += "NOTE " + std::to_string(i + 1) + ": " + kNotes[(slot + i) % std::size(kNotes)] + "\n";
        }
        std::string revs;
        for (std::size_t i = 0; i < s.revs.size(); ++i) {
            revs += "REV " + s.revs[i] + "  " + (i == 0 ? "INITIAL ISSUE" : "REVISED PER FIELD MARKUP") + "\n";
        }
        json regions = json::array();
        regions.push_back({{"kind", "drawing_number"}, {"text", number}, {"confidence", rng_.uniform(0.85, 0.99)}});
        regions.push_back({{"kind", "data_block"}, {"text", data}, {"confidence", rng_.uniform(0.75, 0.98)}});
        regions.push_back({{"kind", "revisions_block"}, {"text", revs}, {"confidence", rng_.uniform(0.7, 0.97)}});
        std::string parts;
        if (s.parts) {
            const char* items[] = {"HOUSING", "SHAFT", "SEAL KIT", "BEARING", "COUPLING"};
            for (std::size_t i = 0; i < std::size(items); ++i) {
                parts += fam.id + "-P" + std::to_string(i + 1) + "  " + items[i] + "  " +
                         std::to_string(1 + (i % 3)) + "\n";
            }
            regions.push_back({{"kind", "parts_list"}, {"text", parts}, {"confidence", rng_.uniform(0.7, 0.95)}});
        }
        json rec{{"schema_version", 1},
                 {"file_id", file_id},
                 {"kind", "drawing"},
                 {"kind_features", drawing_features(rng_)},
                 {"regions", std::move(regions)},
                 {"full_text", number + "\n" + data + revs + parts},
                 {"date", date_from(rng_)},
                 {"quality", rng_.uniform(0.6, 1.0)},
                 {"thumbnail_ref", "thumbs/" + file_id + ".png"}};
        out_.push_back(std::move(rec));
        return file_id;
    }

    std::string document(const Family& fam, std::size_t slot, const std::string& cls, const std::string& title,
                         const std::string& facility, const std::vector<std::string>& lines, std::size_t filler) {
        const auto& doc_id = fam.doc_ids[slot];
        const auto file_id = "F-" + doc_id;
        std::string body = title + "\n" + "DOCUMENT " + doc_id + "\n";
        if (!facility.empty()) body += "FACILITY " + facility + "\n";
        for (const auto& l : lines) body += l + "\n";
        for (std::size_t i = 0; i < filler; ++i) {
            body += "Records of this activity are retained with the site maintenance files (item " +
                    std::to_string(i + 1) + ").\n";
        }
        json document{{"doc_id", doc_id}, {"title", title}};
        if (cls == "procedure") {
            document["steps"] = lines;
        } else if (cls == "policy") {
            document["section_headings"] = lines;
        }
        json rec{{"schema_version", 1},
                 {"file_id", file_id},
                 {"kind", "document"},
                 {"doc_class", cls},
                 {"kind_features", document_features(rng_)},
                 {"full_text", body},
                 {"document", std::move(document)},
                 {"date", date_from(rng_)},
                 {"quality", rng_.uniform(0.6, 1.0)}};
        out_.push_back(std::move(rec));
        return file_id;
    }

private:
    Rng& rng_;
    std::vector<json>& out_;
};

}  // namespace

Corpus generate(const SynthConfig& config) {
    require(config.families >= 1, ErrorCode::InvalidInput, "synthetic corpus needs at least one family");
    Rng rng(config.seed);
    const auto facs = facilities(std::max<std::size_t>(8, config.families * 3 / 4 + 3), config.seed);
    Corpus corpus;
    Builder b(rng, corpus.records);

    for (std::size_t f = 0; f < config.families; ++f) {
        const auto& a = kAssets[f % kAssetCount];
        Family fam;
        fam.name = a.name;
        fam.id = f < kAssetCount ? a.fixed_id : std::string(a.prefix) + "-" + std::to_string(1000 + f);
        fam.f0 = facs[(3 * f) % facs.size()];
        fam.f1 = facs[(3 * f + 1) % facs.size()];
        fam.f2 = facs[(3 * f + 2) % facs.size()];
        for (std::size_t i = 0; i < 13; ++i) fam.drawing_numbers.push_back("DWG-" + pad(40000 + 16 * f + i, 5));
        const char* doc_prefix[] = {"PROC", "PROC", "PROC", "POL", "POL", "LTR", "RPT"};
        for (std::size_t i = 0; i < 7; ++i) fam.doc_ids.push_back(std::string(doc_prefix[i]) + "-" + pad(1000 + 8 * f + i, 4));

        const std::string lockout = "LOCKOUT POINTS PER ISOLATION PROCEDURE";
        const std::string ga = "GENERAL ARRANGEMENT DRAWING";
        // Targets carry more notes than their distractors, so lexical scores alone
        // tend to favour the distractors.
        const auto d0 = b.drawing(fam, 0, {ga, fam.f0, {"A", "B", "C"}, 'D', 1, false, {lockout}, 6});
        const auto d1 = b.drawing(fam, 1, {ga, fam.f0, {"A", "B"}, 'D', 1, false, {lockout}, 1});
        b.drawing(fam, 2, {ga, fam.f1, {"A", "B", "C"}, 'D', 1, false, {lockout, "REFERENCE " + fam.f0 + " ARRANGEMENT"}, 0});
        b.drawing(fam, 3, {ga, fam.f2, {"A", "B", "C", "D"}, 'D', 1, false,
                           {lockout, "SUPERSEDES REV C", "REFERENCE " + fam.f0 + " ARRANGEMENT"}, 0});
        b.drawing(fam, 4, {"WIRING SCHEMATIC", fam.f0, {"A"}, 'B', 1, false, {}, 2});
        const auto d5 = b.drawing(fam, 5, {"WIRING SCHEMATIC", fam.f1, {"A", "B"}, 'B', 1, false, {}, 6});
        b.drawing(fam, 6, {"WIRING SCHEMATIC", fam.f2, {"A", "B", "C"}, 'B', 1, false,
                           {"REFERENCE " + fam.f1 + " SCHEMATIC REVISION B"}, 0});
        const auto d7 = b.drawing(fam, 7, {"ASSEMBLY DRAWING", fam.f0, {"1", "2"}, 'D', 2, true, {}, 6});
        b.drawing(fam, 8, {"ASSEMBLY DRAWING", fam.f2, {"1"}, 'D', 2, false, {"PARTS LIST SEE VENDOR DATA"}, 0});
        const auto d9 = b.drawing(fam, 9, {"ASSEMBLY DRAWING", fam.f1, {"1"}, 'C', 1, true, {}, 1});
        b.drawing(fam, 10, {"FOUNDATION PLAN", fam.f0, {"1", "2"}, 'E', 1, false, {}, 2});
        const auto d11 = b.drawing(fam, 11, {"PIPING AND INSTRUMENTATION DIAGRAM", fam.f0, {"1", "2", "3"}, 'D', 1, false, {}, 3});
        b.drawing(fam, 12, {"PIPING AND INSTRUMENTATION DIAGRAM", fam.f1, {"1"}, 'D', 1, false, {}, 2});

        const std::string nm = fam.name;
        const auto p0 = b.document(fam, 0, "procedure", "Lockout procedure for " + nm + " " + fam.id, fam.f0,
                                   {"Notify operations and obtain the isolation permit",
                                    "Open and lock the supply breaker for " + fam.id,
                                    "Verify zero energy at the local control station",
                                    "Apply personal locks and tags",
                                    "Restore in reverse order after work completion"},
                                   4);
        const auto p1 = b.document(fam, 1, "procedure", "Lockout procedure for " + nm + " " + fam.id, fam.f1,
                                   {"Isolate " + fam.id + " per the reference lockout procedure at " + fam.f0}, 0);
        b.document(fam, 2, "procedure", "Inspection procedure for " + nm + " " + fam.id, fam.f0,
                   {"Inspect couplings and guards", "Record vibration readings", "Report defects to maintenance"}, 2);
        const auto pol0 = b.document(fam, 3, "policy", "Maintenance policy for " + nm + " equipment", fam.f0,
                                     {"Scope", "Maintenance intervals for " + nm + " units", "Responsibilities",
                                      "Records"},
                                     3);
        const auto pol1 = b.document(fam, 4, "policy", "Site safety policy", fam.f1,
                                     {"Scope", "Hazard assessment", "Equipment covered including " + nm}, 2);
        b.document(fam, 5, "other", "Vendor correspondence on " + nm + " " + fam.id, "",
                   {"Vendor confirms spare parts availability for " + fam.id}, 1);
        b.document(fam, 6, "other", "Commissioning report " + fam.id, fam.f2,
                   {"Performance test results within tolerance"}, 1);

        auto add = [&](std::string text, eval::Bucket bucket, bool solvable, bool validation,
                       std::vector<std::string> keys, std::map<std::string, int> grades) {
            PlantedQuery q;
            q.query_id = (validation ? "V" : "Q") + pad(corpus.queries.size() + 1, 4);
            q.text = std::move(text);
            q.bucket = bucket;
            q.solvable = solvable;
            q.validation = validation;
            q.key_terms = std::move(keys);
            q.grades = std::move(grades);
            corpus.queries.push_back(std::move(q));
        };
        add(nm + " " + fam.id + " general arrangement drawing rev C at " + fam.f0, eval::Bucket::MultiModal, true,
            false, {fam.id, fam.f0, "general arrangement", "C"}, {{d0, 2}, {d1, 1}});
        add("lockout procedure for " + nm + " " + fam.id + " at " + fam.f0, eval::Bucket::NLP, true, false,
            {fam.id, fam.f0, "lockout"}, {{p0, 2}, {p1, 1}});
        switch (f % 4) {
            case 0:
                add(fam.id + " wiring schematic revision B at " + fam.f1, eval::Bucket::MultiModal, true, false,
                    {fam.id, fam.f1, "wiring schematic", "B"}, {{d5, 2}});
                break;
            case 1:
                add(fam.id + " assembly drawing with parts list size D", eval::Bucket::Vision, true, false,
                    {fam.id, "assembly", "D"}, {{d7, 2}, {d9, 1}});
                break;
            case 2:
                add(nm + " maintenance policy", eval::Bucket::NLP, false, false, {nm, "maintenance", "policy"},
                    {{pol0, 2}, {pol1, 1}});
                break;
            default:
                add(fam.drawing_numbers[11], eval::Bucket::Vision, true, false, {fam.drawing_numbers[11]},
                    {{d11, 2}});
                break;
        }
        add(fam.id + " general arrangement drawing rev B " + fam.f0, eval::Bucket::MultiModal, true, true,
            {fam.id, fam.f0, "general arrangement", "B"}, {{d1, 2}, {d0, 1}});
    }
    return corpus;
}

std::vector<json> router_samples(std::size_t n, std::uint64_t seed) {
    Rng rng(seed ^ 0x5a5au);
    std::vector<json> out;
    for (std::size_t i = 0; i < n; ++i) {
        const bool drawing = rng.chance(0.5);
        out.push_back(json{{"file_id", "R-" + pad(i + 1, 5)},
                           {"kind", drawing ? "drawing" : "document"},
                           {"kind_features", drawing ? drawing_features(rng) : document_features(rng)}});
    }
    return out;
}

json to_json(const PlantedQuery& q) {
    return json{{"query_id", q.query_id},     {"text", q.text},         {"bucket", std::string(to_string(q.bucket))},
                {"solvable", q.solvable},     {"validation", q.validation}, {"key_terms", q.key_terms}};
}

PlantedQuery planted_query_from_json(const json& j) {
    PlantedQuery q;
    try {
        q.query_id = j.at("query_id").get<std::string>();
        q.text = j.at("text").get<std::string>();
        if (auto b = eval::parse_bucket(j.value("bucket", std::string("multimodal")))) q.bucket = *b;
        q.solvable = j.value("solvable", false);
        q.validation = j.value("validation", false);
        q.key_terms = j.value("key_terms", std::vector<std::string>{});
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidInput, std::string("query line: ") + e.what());
    }
    return q;
}

std::vector<json> qrels(const std::vector<PlantedQuery>& queries, const std::string& judge_id) {
    std::vector<json> out;
    for (const auto& q : queries) {
        for (const auto& [doc, g] : q.grades) {
            out.push_back(json{{"query_id", q.query_id}, {"doc_id", doc}, {"judge_id", judge_id}, {"grade", g}});
        }
    }
    return out;
}

void write_corpus(const Corpus& corpus, const std::string& dir, std::size_t router_examples) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::vector<json>& lines) {
        std::ofstream out(std::filesystem::path(dir) / name);
        require(static_cast<bool>(out), ErrorCode::InvalidInput, "cannot write " + dir + "/" + name);
        for (const auto& l : lines) out << l.dump() << "\n";
    };
    write("records.jsonl", corpus.records);
    std::vector<json> qs;
    for (const auto& q : corpus.queries) qs.push_back(to_json(q));
    write("queries.jsonl", qs);
    write("qrels.jsonl", qrels(corpus.queries));
    write("router.jsonl", router_samples(router_examples, 99));
}

}  // namespace archsearch::synth
