#pragma once

#include <string>

#include "archsearch/embedding.hpp"
#include "archsearch/extraction.hpp"

namespace archsearch::http {

/// "http://host:port/base" split into the scheme-host-port part and a path
/// prefix without trailing slash. Only plain http is supported.
struct Endpoint {
    std::string origin;
    std::string base_path;
};

Endpoint parse_endpoint(const std::string& url);

/// POST {endpoint}/v1/classify with {"text"}; expects {"class": "POLICY"|"PROCEDURE"|"OTHER"}.
class HttpDocumentClassifier final : public extraction::DocumentClassifier {
public:
    HttpDocumentClassifier(std::string endpoint, int timeout_ms);
    DocClass classify(const std::string& text) override;

private:
    Endpoint endpoint_;
    int timeout_ms_;
};

/// POST {endpoint}/v1/embed with {"text"}; expects {"embedding": [float, ...]} of length dim.
class HttpTextEncoder final : public embedding::TextEncoder {
public:
    HttpTextEncoder(std::string endpoint, std::size_t dim, int timeout_ms);
    embedding::TextEmbedding encode(const std::string& text) override;
    std::size_t dim() const override { return dim_; }

private:
    Endpoint endpoint_;
    std::size_t dim_;
    int timeout_ms_;
};

}  // namespace archsearch::http
