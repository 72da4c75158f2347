#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archsearch/engine.hpp"
#include "archsearch/error.hpp"
#include "archsearch/judge.hpp"
#include "archsearch/search.hpp"

namespace archsearch::service {

struct ServiceConfig {
    std::string listen = "127.0.0.1:8080";  // host:port
    std::string index_path;                 // directory with engine.json and shards
    std::string params_path;                // optional SearchParams file
    std::optional<std::size_t> shard_count;  // when set, must match the index
    std::optional<std::size_t> sparse_pool;
    std::optional<std::size_t> dense_pool;
    std::vector<judge::JudgeConfig> judges;
    std::vector<std::string> cors_allowlist;  // exact origins, or "*"
    std::size_t default_k = 10;
    std::size_t max_k = 100;
    bool allow_partial = false;  // serve from intact shards when some are damaged
    bool persist_ingest = false;  // write shards back after /v1/ingest

    /// Throws NotFound naming the missing path.
    void check_paths() const;
};

ServiceConfig service_config_from_json(const nlohmann::json& j);
/// Reads the file, then applies ARCHSEARCH_LISTEN when set.
ServiceConfig load_service_config(const std::string& path);
/// Config path from ARCHSEARCH_CONFIG when `cli_path` is empty.
std::string resolve_config_path(const std::string& cli_path);
void apply_env_overrides(ServiceConfig& config);

/// host and port from "host:port".
std::pair<std::string, int> split_listen(const std::string& listen);

struct Request {
    std::string method;
    std::string path;
    std::string body;
    std::map<std::string, std::string> headers;  // lower-case names
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
    std::map<std::string, std::string> headers;
};

int status_for(ErrorCode code);

/// Request handling without sockets. Thread-safe: searches share the index
/// read lock, ingestion takes the write lock per document.
class SearchService {
public:
    /// Loads the index named in the config; throws on missing paths or a corrupt index.
    explicit SearchService(ServiceConfig config);
    /// `engine` may be null, in which case search and ingest answer 503.
    SearchService(ServiceConfig config, std::unique_ptr<Engine> engine, search::SearchParams params = {});

    Response handle(const Request& request);

    const search::SearchParams& params() const { return params_; }
    const ServiceConfig& config() const { return config_; }
    bool loaded() const { return engine_ != nullptr; }

private:
    Response search(const Request& r);
    Response ingest(const Request& r);
    Response health() const;
    void apply_cors(const Request& r, Response& out) const;
    std::optional<std::string> allowed_origin(const Request& r) const;

    ServiceConfig config_;
    std::unique_ptr<Engine> engine_;
    search::SearchParams params_;
    std::mutex persist_mu_;
};

/// Binds a real socket and serves SearchService::handle.
class HttpServer {
public:
    explicit HttpServer(SearchService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds host:port (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace archsearch::service
