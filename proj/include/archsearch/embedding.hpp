#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "archsearch/extraction.hpp"

namespace archsearch::embedding {

struct TextEmbedding {
    enum class Source { ExternalEncoder, DeterministicStub };
    std::vector<double> vector;
    Source source = Source::DeterministicStub;
};

/// Layout/region features r_d. Default layout (12 entries): presence flags,
/// mean confidences and log(1 + text length) for the four region kinds.
struct RegionFeatureVector {
    std::vector<double> vector;
};

inline constexpr std::size_t kRegionFeatureDim = 12;

RegionFeatureVector region_features(std::span<const extraction::RegionExtraction> regions);

/// Unit-norm embedding in the shared space.
struct DocEmbedding {
    std::vector<double> vector;
};

/// Projections into the shared space: documents use [W_t t ; W_r r], queries W_q t_q.
struct ProjectionConfig {
    Eigen::MatrixXd text_proj;    // m_t x d_t
    Eigen::MatrixXd region_proj;  // m_r x d_r
    Eigen::MatrixXd query_proj;   // (m_t + m_r) x d_t
    std::uint64_t seed = 0;

    std::size_t text_dim() const { return static_cast<std::size_t>(text_proj.cols()); }
    std::size_t region_dim() const { return static_cast<std::size_t>(region_proj.cols()); }
    std::size_t output_dim() const {
        return static_cast<std::size_t>(text_proj.rows() + region_proj.rows());
    }

    /// Default projections. W_t has orthonormal columns: an identity block, with
    /// seeded random orthonormal rows completing it when m_t > d_t. W_r is
    /// region_scale * I. W_q is W_t stacked over zeros, so queries live in the
    /// text block of the shared space.
    static ProjectionConfig identity_block(std::size_t text_dim, std::size_t region_dim,
                                           std::uint64_t seed, std::size_t m_t = 0,
                                           double region_scale = 0.05);

    /// Throws InvalidInput when shapes are inconsistent or entries non-finite.
    void validate() const;
};

void to_json(nlohmann::json& j, const ProjectionConfig& cfg);
void from_json(const nlohmann::json& j, ProjectionConfig& cfg);

/// norm(W_t t ++ W_r r). Throws DegenerateEmbedding on a zero pre-norm vector.
DocEmbedding embed_document(const TextEmbedding& t, const RegionFeatureVector& r,
                            const ProjectionConfig& cfg);

/// norm(W_q t_q).
DocEmbedding embed_query(const TextEmbedding& t_q, const ProjectionConfig& cfg);

double cosine(std::span<const double> a, std::span<const double> b);

/// Signed hashed bag of unigrams and adjacent-token bigrams over tokenize(text),
/// unit-normalized. Empty input yields the zero vector.
TextEmbedding stub_text_encoder(std::string_view text, std::size_t dim, std::uint64_t seed);

class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual TextEmbedding encode(const std::string& text) = 0;
    virtual std::size_t dim() const = 0;
};

class StubTextEncoder final : public TextEncoder {
public:
    StubTextEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

    TextEmbedding encode(const std::string& text) override {
        return stub_text_encoder(text, dim_, seed_);
    }
    std::size_t dim() const override { return dim_; }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

}  // namespace archsearch::embedding
