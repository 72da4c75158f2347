#include "archsearch/http_clients.hpp"

#include <cmath>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "archsearch/error.hpp"
#include "archsearch/judge.hpp"

namespace archsearch::http {

using nlohmann::json;

Endpoint parse_endpoint(const std::string& url) {
    const std::string scheme = "http://";
    require(url.rfind(scheme, 0) == 0, ErrorCode::InvalidInput, "endpoint must start with http://: " + url);
    const auto slash = url.find('/', scheme.size());
    Endpoint e;
    e.origin = url.substr(0, slash);
    require(e.origin.size() > scheme.size(), ErrorCode::InvalidInput, "endpoint has no host: " + url);
    if (slash != std::string::npos) e.base_path = url.substr(slash);
    while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
    return e;
}

namespace {

json post_json(const Endpoint& ep, const std::string& path, const json& body, int timeout_ms) {
    httplib::Client cli(ep.origin);
    const auto secs = timeout_ms / 1000;
    const auto usecs = (timeout_ms % 1000) * 1000;
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    const auto full = ep.base_path + path;
    auto res = cli.Post(full, body.dump(), "application/json");
    if (!res) {
        fail(ErrorCode::Transport, "POST " + ep.origin + full + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        fail(ErrorCode::Transport, "POST " + ep.origin + full + " returned HTTP " + std::to_string(res->status));
    }
    auto j = json::parse(res->body, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::Transport, "POST " + ep.origin + full + " returned non-JSON body");
    return j;
}

}  // namespace

HttpDocumentClassifier::HttpDocumentClassifier(std::string endpoint, int timeout_ms)
    : endpoint_(parse_endpoint(endpoint)), timeout_ms_(timeout_ms) {}

DocClass HttpDocumentClassifier::classify(const std::string& text) {
    const auto j = post_json(endpoint_, "/v1/classify", json{{"text", text}}, timeout_ms_);
    const auto it = j.find("class");
    if (it == j.end() || !it->is_string()) fail(ErrorCode::Transport, "classifier reply lacks 'class'");
    const auto cls = parse_doc_class(it->get<std::string>());
    if (!cls) fail(ErrorCode::Transport, "classifier returned unknown class " + it->get<std::string>());
    return *cls;
}

HttpTextEncoder::HttpTextEncoder(std::string endpoint, std::size_t dim, int timeout_ms)
    : endpoint_(parse_endpoint(endpoint)), dim_(dim), timeout_ms_(timeout_ms) {
    require(dim_ > 0, ErrorCode::InvalidInput, "encoder dimension must be positive");
}

embedding::TextEmbedding HttpTextEncoder::encode(const std::string& text) {
    const auto j = post_json(endpoint_, "/v1/embed", json{{"text", text}}, timeout_ms_);
    const auto it = j.find("embedding");
    if (it == j.end() || !it->is_array()) fail(ErrorCode::Transport, "encoder reply lacks 'embedding'");
    embedding::TextEmbedding out;
    out.source = embedding::TextEmbedding::Source::ExternalEncoder;
    for (const auto& v : *it) {
        if (!v.is_number()) fail(ErrorCode::Transport, "encoder returned a non-numeric component");
        out.vector.push_back(v.get<double>());
        if (!std::isfinite(out.vector.back())) fail(ErrorCode::Transport, "encoder returned a non-finite component");
    }
    require(out.vector.size() == dim_, ErrorCode::Transport,
            "encoder returned " + std::to_string(out.vector.size()) + " components, expected " + std::to_string(dim_));
    return out;
}

}  // namespace archsearch::http

namespace archsearch::judge {

using nlohmann::json;

HttpChatClient::HttpChatClient(std::string endpoint, std::string model, int timeout_ms)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), timeout_ms_(timeout_ms) {
    http::parse_endpoint(endpoint_);
}

std::string HttpChatClient::complete(const ChatRequest& request) {
    json body{{"model", request.model.empty() ? model_ : request.model},
              {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
              {"temperature", request.decoding.temperature},
              {"top_p", request.decoding.top_p},
              {"max_tokens", request.decoding.max_tokens}};
    const auto j = http::post_json(http::parse_endpoint(endpoint_), "/v1/chat/completions", body, timeout_ms_);
    try {
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        fail(ErrorCode::Transport, "chat reply lacks choices[0].message.content");
    }
}

}  // namespace archsearch::judge
