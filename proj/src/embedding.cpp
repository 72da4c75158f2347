#include "archsearch/embedding.hpp"

#include <array>
#include <cmath>
#include <random>

#include "archsearch/error.hpp"
#include "archsearch/hash.hpp"
#include "archsearch/text.hpp"

namespace archsearch::embedding {

namespace {

Eigen::VectorXd as_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

DocEmbedding normalized(const Eigen::VectorXd& z) {
    require(z.allFinite(), ErrorCode::InvalidInput, "embedding has non-finite entries");
    const double n = z.norm();
    require(n > 0.0, ErrorCode::DegenerateEmbedding, "zero vector has no direction");
    DocEmbedding out;
    out.vector.resize(static_cast<std::size_t>(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) out.vector[static_cast<std::size_t>(i)] = z(i) / n;
    return out;
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd matrix_from(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    require(rows >= 0 && cols >= 0 && data.size() == static_cast<std::size_t>(rows * cols),
            ErrorCode::InvalidInput, "projection matrix data does not match its shape");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
    return m;
}

}  // namespace

RegionFeatureVector region_features(std::span<const extraction::RegionExtraction> regions) {
    RegionFeatureVector out;
    out.vector.assign(kRegionFeatureDim, 0.0);
    std::array<double, 4> conf_sum{};
    std::array<double, 4> count{};
    std::array<double, 4> length{};
    for (const auto& r : regions) {
        const auto k = index_of(r.kind);
        conf_sum[k] += r.confidence;
        count[k] += 1.0;
        length[k] += static_cast<double>(count_code_points(r.text));
    }
    for (std::size_t k = 0; k < 4; ++k) {
        out.vector[k] = count[k] > 0 ? 1.0 : 0.0;
        out.vector[4 + k] = count[k] > 0 ? conf_sum[k] / count[k] : 0.0;
        out.vector[8 + k] = std::log1p(length[k]);
    }
    return out;
}

ProjectionConfig ProjectionConfig::identity_block(std::size_t text_dim, std::size_t region_dim,
                                                  std::uint64_t seed, std::size_t m_t,
                                                  double region_scale) {
    require(text_dim > 0, ErrorCode::InvalidInput, "text dimension must be positive");
    if (m_t == 0) m_t = text_dim;
    const auto d = static_cast<Eigen::Index>(text_dim);
    const auto m = static_cast<Eigen::Index>(m_t);

    ProjectionConfig cfg;
    cfg.seed = seed;
    if (m <= d) {
        cfg.text_proj = Eigen::MatrixXd::Identity(m, d);
    } else {
        // Identity block on top, seeded Gaussian rows below, then re-orthonormalize
        // the columns so inner products between text embeddings are preserved.
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::MatrixXd a(m, d);
        a.topRows(d).setIdentity();
        for (Eigen::Index r = d; r < m; ++r)
            for (Eigen::Index c = 0; c < d; ++c) a(r, c) = gauss(rng);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
        Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(m, d);
        // Fix column signs so the identity block stays positive on the diagonal.
        for (Eigen::Index c = 0; c < d; ++c) {
            if (q(c, c) < 0) q.col(c) = -q.col(c);
        }
        cfg.text_proj = q;
    }
    const auto r = static_cast<Eigen::Index>(region_dim);
    cfg.region_proj = region_scale * Eigen::MatrixXd::Identity(r, r);
    cfg.query_proj = Eigen::MatrixXd::Zero(m + r, d);
    cfg.query_proj.topRows(m) = cfg.text_proj;
    return cfg;
}

void ProjectionConfig::validate() const {
    require(text_proj.allFinite() && region_proj.allFinite() && query_proj.allFinite(),
            ErrorCode::InvalidInput, "projection matrices must be finite");
    require(query_proj.rows() == text_proj.rows() + region_proj.rows(), ErrorCode::InvalidInput,
            "query projection must map into the document embedding dimension");
    require(query_proj.cols() == text_proj.cols(), ErrorCode::InvalidInput,
            "query projection must accept the text embedding dimension");
}

void to_json(nlohmann::json& j, const ProjectionConfig& cfg) {
    j = nlohmann::json{{"seed", cfg.seed},
                       {"text_proj", matrix_json(cfg.text_proj)},
                       {"region_proj", matrix_json(cfg.region_proj)},
                       {"query_proj", matrix_json(cfg.query_proj)}};
}

void from_json(const nlohmann::json& j, ProjectionConfig& cfg) {
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.text_proj = matrix_from(j.at("text_proj"));
    cfg.region_proj = matrix_from(j.at("region_proj"));
    cfg.query_proj = matrix_from(j.at("query_proj"));
    cfg.validate();
}

DocEmbedding embed_document(const TextEmbedding& t, const RegionFeatureVector& r,
                            const ProjectionConfig& cfg) {
    require(t.vector.size() == cfg.text_dim(), ErrorCode::InvalidInput,
            "text embedding dimension does not match W_t");
    require(r.vector.size() == cfg.region_dim(), ErrorCode::InvalidInput,
            "region feature dimension does not match W_r");
    Eigen::VectorXd z(static_cast<Eigen::Index>(cfg.output_dim()));
    z << cfg.text_proj * as_eigen(t.vector), cfg.region_proj * as_eigen(r.vector);
    return normalized(z);
}

DocEmbedding embed_query(const TextEmbedding& t_q, const ProjectionConfig& cfg) {
    require(t_q.vector.size() == static_cast<std::size_t>(cfg.query_proj.cols()),
            ErrorCode::InvalidInput, "query embedding dimension does not match W_q");
    return normalized(cfg.query_proj * as_eigen(t_q.vector));
}

double cosine(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorCode::InvalidInput, "cosine: dimension mismatch");
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

TextEmbedding stub_text_encoder(std::string_view text, std::size_t dim, std::uint64_t seed) {
    require(dim >= 8, ErrorCode::InvalidInput, "stub encoder dimension must be >= 8");
    TextEmbedding out;
    out.source = TextEmbedding::Source::DeterministicStub;
    out.vector.assign(dim, 0.0);
    const std::uint64_t basis = kFnvOffset ^ splitmix64(seed);
    const auto tokens = tokenize(text);

    auto add = [&](std::string_view feature, double weight) {
        const auto h = fnv1a64(feature, basis);
        const auto idx = static_cast<std::size_t>(h % dim);
        out.vector[idx] += (h >> 63) ? -weight : weight;
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        add("u:" + tokens[i], 1.0);
        if (i + 1 < tokens.size()) add("b:" + tokens[i] + " " + tokens[i + 1], 0.5);
    }
    double n = 0.0;
    for (double v : out.vector) n += v * v;
    if (n > 0.0) {
        n = std::sqrt(n);
        for (double& v : out.vector) v /= n;
    }
    return out;
}

}  // namespace archsearch::embedding
