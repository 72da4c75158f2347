#include "archsearch/shard_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "archsearch/error.hpp"
#include "archsearch/text.hpp"

namespace archsearch::index {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'A', 'S', 'H', 'D'};
constexpr std::size_t kHeaderSize = 40;

enum Section : std::uint32_t { kDocs = 1, kLengths = 2, kEmbeddings = 3, kPostings = 4 };

std::uint32_t crc_of(const std::string& bytes) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
    }
    void f64(double d) { u64(std::bit_cast<std::uint64_t>(d)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    void raw(const std::string& s) { buf_.append(s); }
    std::string& bytes() { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(const std::string& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() {
        const char* p = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
        return v;
    }
    std::uint64_t u64() {
        const char* p = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const auto n = u32();
        return std::string(take(n), n);
    }
    std::string raw(std::uint64_t n) {
        if (n > remaining()) corrupt("section runs past end of file");
        return std::string(take(static_cast<std::size_t>(n)), static_cast<std::size_t>(n));
    }
    std::size_t remaining() const { return buf_.size() - pos_; }
    std::size_t pos() const { return pos_; }

    [[noreturn]] void corrupt(const std::string& why) const {
        fail(ErrorCode::CorruptIndex, what_ + ": " + why);
    }

private:
    const char* take(std::size_t n) {
        if (n > remaining()) corrupt("truncated");
        const char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }

    const std::string& buf_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::string shard_file_name(std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof name, "shard-%04zu.bin", i);
    return name;
}

void write_atomically(const fs::path& target, const std::string& bytes) {
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(out), ErrorCode::InvalidInput, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        require(static_cast<bool>(out), ErrorCode::InvalidInput, "write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::string encode_shard(const Shard& s, std::size_t index, const ShardManifest& m) {
    std::vector<std::pair<std::uint32_t, std::string>> sections;
    {
        Writer w;
        w.u32(static_cast<std::uint32_t>(s.size()));
        for (const auto& d : s.docs) w.str(to_json(d, false).dump());
        sections.emplace_back(kDocs, std::move(w.bytes()));
    }
    {
        Writer w;
        for (const auto& lens : s.lengths)
            for (auto l : lens) w.u32(l);
        sections.emplace_back(kLengths, std::move(w.bytes()));
    }
    {
        Writer w;
        for (double v : s.embeddings) w.f64(v);
        sections.emplace_back(kEmbeddings, std::move(w.bytes()));
    }
    {
        Writer w;
        std::vector<const std::string*> terms;
        terms.reserve(s.postings.size());
        for (const auto& [t, _] : s.postings) terms.push_back(&t);
        std::sort(terms.begin(), terms.end(), [](const auto* a, const auto* b) { return *a < *b; });
        w.u32(static_cast<std::uint32_t>(terms.size()));
        for (const auto* t : terms) {
            const auto& list = s.postings.at(*t);
            w.str(*t);
            w.u32(s.df.at(*t));
            w.u32(static_cast<std::uint32_t>(list.size()));
            for (const auto& p : list) {
                w.u32(p.doc);
                w.u8(p.field);
                w.u32(p.tf);
            }
        }
        sections.emplace_back(kPostings, std::move(w.bytes()));
    }

    Writer out;
    out.raw(std::string(kMagic, 4));
    out.u32(kShardFormatVersion);
    out.u32(static_cast<std::uint32_t>(index));
    out.u32(static_cast<std::uint32_t>(m.shard_count));
    out.u32(static_cast<std::uint32_t>(m.embedding_dim));
    out.u32(static_cast<std::uint32_t>(m.tokenizer_version));
    out.u64(s.size());
    out.u32(static_cast<std::uint32_t>(sections.size()));
    out.u32(crc_of(out.bytes()));
    for (const auto& [tag, payload] : sections) {
        out.u32(tag);
        out.u64(payload.size());
        out.raw(payload);
        out.u32(crc_of(payload));
    }
    return std::move(out.bytes());
}

json weights_json(const FieldWeights& w) {
    json j = json::object();
    for (std::size_t i = 0; i < kFieldCount; ++i) j[std::string(to_string(static_cast<Field>(i)))] = w[i];
    return j;
}

}  // namespace

json to_json(const ShardManifest& m) {
    json shards = json::array();
    for (const auto& s : m.shards) {
        shards.push_back({{"index", s.index}, {"path", s.path}, {"doc_count", s.doc_count}, {"bytes", s.bytes}});
    }
    return json{{"schema_version", m.schema_version},
                {"format", "archsearch-shards"},
                {"tokenizer_version", m.tokenizer_version},
                {"shard_count", m.shard_count},
                {"assignment_rule", m.assignment_rule},
                {"embedding_dim", m.embedding_dim},
                {"bm25", {{"k1", m.bm25.k1}, {"b", m.bm25.b}, {"field_weights", weights_json(m.bm25.field_weights)}}},
                {"shards", std::move(shards)}};
}

ShardManifest manifest_from_json(const json& j) {
    ShardManifest m;
    try {
        m.schema_version = j.at("schema_version").get<int>();
        m.tokenizer_version = j.at("tokenizer_version").get<int>();
        m.shard_count = j.at("shard_count").get<std::size_t>();
        m.assignment_rule = j.at("assignment_rule").get<std::string>();
        m.embedding_dim = j.at("embedding_dim").get<std::size_t>();
        const auto& b = j.at("bm25");
        m.bm25.k1 = b.at("k1").get<double>();
        m.bm25.b = b.at("b").get<double>();
        const auto& w = b.at("field_weights");
        for (std::size_t i = 0; i < kFieldCount; ++i) {
            m.bm25.field_weights[i] = w.at(std::string(to_string(static_cast<Field>(i)))).get<double>();
        }
        for (const auto& s : j.at("shards")) {
            m.shards.push_back({s.at("index").get<std::size_t>(), s.at("path").get<std::string>(),
                                s.at("doc_count").get<std::size_t>(), s.value("bytes", std::uint64_t{0})});
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::CorruptIndex, std::string("manifest: ") + e.what());
    }
    require(m.schema_version == kManifestSchemaVersion, ErrorCode::CorruptIndex,
            "manifest: unsupported schema_version " + std::to_string(m.schema_version));
    require(m.tokenizer_version == kTokenizerVersion, ErrorCode::CorruptIndex,
            "manifest: tokenizer_version " + std::to_string(m.tokenizer_version) +
                " does not match this build (" + std::to_string(kTokenizerVersion) + "); rebuild the index");
    require(m.assignment_rule == kAssignmentRule, ErrorCode::CorruptIndex,
            "manifest: unsupported shard assignment rule '" + m.assignment_rule + "'");
    require(m.shard_count >= 1 && m.shards.size() == m.shard_count, ErrorCode::CorruptIndex,
            "manifest: shard list does not match shard_count");
    require(m.embedding_dim >= 1, ErrorCode::CorruptIndex, "manifest: embedding_dim must be >= 1");
    for (std::size_t i = 0; i < m.shards.size(); ++i) {
        require(m.shards[i].index == i, ErrorCode::CorruptIndex, "manifest: shards out of order");
    }
    return m;
}

ShardManifest save_shards(const HybridIndex& index, const fs::path& dir) {
    fs::create_directories(dir);
    ShardManifest m;
    m.tokenizer_version = kTokenizerVersion;
    m.shard_count = index.shard_count();
    m.embedding_dim = index.dim();
    m.bm25 = index.bm25_params();
    for (std::size_t i = 0; i < index.shard_count(); ++i) {
        const auto bytes = encode_shard(index.shard(i), i, m);
        const auto name = shard_file_name(i);
        write_atomically(dir / name, bytes);
        m.shards.push_back({i, name, index.shard(i).size(), bytes.size()});
    }
    write_atomically(dir / "manifest.json", to_json(m).dump(2) + "\n");
    return m;
}

Shard read_shard_file(const fs::path& file, const ShardManifest& m, std::size_t shard_index) {
    std::ifstream in(file, std::ios::binary);
    if (!in) fail(ErrorCode::CorruptIndex, file.string() + ": cannot open shard file");
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(buf, file.filename().string());

    if (buf.size() < kHeaderSize) r.corrupt("truncated header");
    if (std::memcmp(buf.data(), kMagic, 4) != 0) r.corrupt("bad magic");
    r.raw(4);
    const auto version = r.u32();
    const auto idx = r.u32();
    const auto count = r.u32();
    const auto dim = r.u32();
    const auto tok = r.u32();
    const auto docs = r.u64();
    const auto nsec = r.u32();
    const auto hcrc = r.u32();
    if (hcrc != crc_of(buf.substr(0, kHeaderSize - 4))) r.corrupt("header checksum mismatch");
    if (version != kShardFormatVersion) r.corrupt("unsupported shard format version " + std::to_string(version));
    if (idx != shard_index || count != m.shard_count) r.corrupt("shard index/count disagree with manifest");
    if (dim != m.embedding_dim) r.corrupt("embedding dimension disagrees with manifest");
    if (static_cast<int>(tok) != m.tokenizer_version) r.corrupt("tokenizer version disagrees with manifest");

    std::unordered_map<std::uint32_t, std::string> sections;
    for (std::uint32_t i = 0; i < nsec; ++i) {
        const auto tag = r.u32();
        const auto len = r.u64();
        auto payload = r.raw(len);
        if (r.u32() != crc_of(payload)) r.corrupt("checksum mismatch in section " + std::to_string(tag));
        sections[tag] = std::move(payload);
    }
    if (r.remaining() != 0) r.corrupt("trailing bytes after last section");
    for (auto tag : {kDocs, kLengths, kEmbeddings, kPostings}) {
        if (!sections.contains(tag)) r.corrupt("missing section " + std::to_string(tag));
    }

    Shard s;
    {
        Reader d(sections[kDocs], file.filename().string());
        const auto n = d.u32();
        if (n != docs) d.corrupt("document count disagrees with header");
        for (std::uint32_t i = 0; i < n; ++i) {
            DocEntry e;
            try {
                e = doc_entry_from_json(json::parse(d.str()));
            } catch (const std::exception& ex) {
                d.corrupt(std::string("bad document record: ") + ex.what());
            }
            if (HybridIndex::shard_of(e.doc_id, m.shard_count) != shard_index) {
                d.corrupt("document " + e.doc_id + " does not belong to this shard");
            }
            if (!s.by_id.emplace(e.doc_id, i).second) d.corrupt("duplicate doc_id " + e.doc_id);
            s.docs.push_back(std::move(e));
        }
    }
    {
        Reader d(sections[kLengths], file.filename().string());
        if (sections[kLengths].size() != docs * kFieldCount * 4) d.corrupt("length table size mismatch");
        s.lengths.resize(docs);
        for (auto& lens : s.lengths)
            for (std::size_t f = 0; f < kFieldCount; ++f) {
                lens[f] = d.u32();
                s.total_lengths[f] += lens[f];
            }
    }
    {
        Reader d(sections[kEmbeddings], file.filename().string());
        if (sections[kEmbeddings].size() != docs * dim * 8) d.corrupt("embedding block size mismatch");
        s.embeddings.resize(docs * dim);
        for (auto& v : s.embeddings) v = d.f64();
        for (std::size_t i = 0; i < docs; ++i) {
            s.docs[i].embedding.vector.assign(s.embeddings.begin() + static_cast<std::ptrdiff_t>(i * dim),
                                              s.embeddings.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim));
        }
    }
    {
        Reader d(sections[kPostings], file.filename().string());
        const auto nterms = d.u32();
        for (std::uint32_t t = 0; t < nterms; ++t) {
            auto term = d.str();
            const auto df = d.u32();
            const auto n = d.u32();
            std::vector<Posting> list(n);
            std::uint32_t distinct = 0;
            for (std::uint32_t i = 0; i < n; ++i) {
                list[i].doc = d.u32();
                list[i].field = d.u8();
                list[i].tf = d.u32();
                if (list[i].doc >= docs || list[i].field >= kFieldCount) d.corrupt("posting out of range");
                if (i > 0 && list[i].doc < list[i - 1].doc) d.corrupt("postings not sorted");
                if (i == 0 || list[i].doc != list[i - 1].doc) ++distinct;
            }
            if (distinct != df) d.corrupt("document frequency disagrees with postings for '" + term + "'");
            s.df.emplace(term, df);
            s.postings.emplace(std::move(term), std::move(list));
        }
    }
    return s;
}

LoadResult load_shards(const fs::path& dir, const LoadOptions& options) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) fail(ErrorCode::CorruptIndex, manifest_path.string() + ": cannot open manifest");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::CorruptIndex, std::string("manifest: ") + e.what());
    }
    LoadResult result;
    result.manifest = manifest_from_json(j);
    const auto& m = result.manifest;
    result.index = std::make_unique<HybridIndex>(m.shard_count, m.embedding_dim, m.bm25);
    for (std::size_t i = 0; i < m.shard_count; ++i) {
        try {
            result.index->replace_shard(i, read_shard_file(dir / m.shards[i].path, m, i));
        } catch (const Error& e) {
            if (!options.allow_partial || e.code() != ErrorCode::CorruptIndex) throw;
            result.failed.push_back({i, e.what()});
        }
    }
    return result;
}

}  // namespace archsearch::index
