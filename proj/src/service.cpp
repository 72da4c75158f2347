#include "archsearch/service.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "archsearch/error.hpp"
#include "archsearch/text.hpp"

namespace archsearch::service {

using nlohmann::json;

namespace {

json error_body(const std::string& code, const std::string& message) {
    return json{{"error", {{"code", code}, {"message", message}}}};
}

Response error_response(int status, const std::string& code, const std::string& message) {
    Response r;
    r.status = status;
    r.body = error_body(code, message).dump();
    return r;
}

search::SearchParams load_params(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::NotFound, "params_path does not exist: " + path);
    const auto j = json::parse(in, nullptr, false);
    require(!j.is_discarded(), ErrorCode::InvalidInput, "params file is not valid JSON: " + path);
    return search::params_from_json(j);
}

}  // namespace

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidInput:
        case ErrorCode::SchemaValidation:
        case ErrorCode::InvalidRun:
        case ErrorCode::DegenerateEmbedding:
            return 400;
        case ErrorCode::NotFound: return 404;
        case ErrorCode::Conflict: return 409;
        case ErrorCode::Transport:
        case ErrorCode::ClassificationUnavailable:
        case ErrorCode::JudgeFormat:
            return 502;
        default: return 500;
    }
}

void ServiceConfig::check_paths() const {
    namespace fs = std::filesystem;
    require(!index_path.empty(), ErrorCode::NotFound, "index_path is not set");
    require(fs::is_directory(index_path), ErrorCode::NotFound, "index_path does not exist: " + index_path);
    require(fs::exists(fs::path(index_path) / "manifest.json"), ErrorCode::NotFound,
            "index_path has no manifest.json: " + index_path);
    if (!params_path.empty()) {
        require(fs::is_regular_file(params_path), ErrorCode::NotFound, "params_path does not exist: " + params_path);
    }
}

ServiceConfig service_config_from_json(const json& j) {
    static const std::set<std::string> known{"listen",    "index_path",     "params_path", "shard_count",
                                             "sparse_pool", "dense_pool",   "judges",      "cors_allowlist",
                                             "default_k", "max_k",          "allow_partial", "persist_ingest"};
    require(j.is_object(), ErrorCode::InvalidInput, "service config must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        require(known.contains(k), ErrorCode::InvalidInput, "unknown service config key: " + k);
    }
    ServiceConfig c;
    try {
        c.listen = j.value("listen", c.listen);
        c.index_path = j.value("index_path", c.index_path);
        c.params_path = j.value("params_path", c.params_path);
        if (j.contains("shard_count")) c.shard_count = j.at("shard_count").get<std::size_t>();
        if (j.contains("sparse_pool")) c.sparse_pool = j.at("sparse_pool").get<std::size_t>();
        if (j.contains("dense_pool")) c.dense_pool = j.at("dense_pool").get<std::size_t>();
        if (auto it = j.find("judges"); it != j.end()) {
            for (const auto& jc : *it) c.judges.push_back(judge::judge_config_from_json(jc));
        }
        c.cors_allowlist = j.value("cors_allowlist", c.cors_allowlist);
        c.default_k = j.value("default_k", c.default_k);
        c.max_k = j.value("max_k", c.max_k);
        c.allow_partial = j.value("allow_partial", c.allow_partial);
        c.persist_ingest = j.value("persist_ingest", c.persist_ingest);
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidInput, std::string("service config: ") + e.what());
    }
    require(c.default_k >= 1 && c.default_k <= c.max_k, ErrorCode::InvalidInput, "need 1 <= default_k <= max_k");
    split_listen(c.listen);
    return c;
}

void apply_env_overrides(ServiceConfig& config) {
    if (const char* v = std::getenv("ARCHSEARCH_LISTEN"); v != nullptr && *v != '\0') {
        split_listen(v);
        config.listen = v;
    }
}

std::string resolve_config_path(const std::string& cli_path) {
    if (!cli_path.empty()) return cli_path;
    if (const char* v = std::getenv("ARCHSEARCH_CONFIG"); v != nullptr) return v;
    return {};
}

ServiceConfig load_service_config(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::NotFound, "service config does not exist: " + path);
    const auto j = json::parse(in, nullptr, false);
    require(!j.is_discarded(), ErrorCode::InvalidInput, "service config is not valid JSON: " + path);
    auto c = service_config_from_json(j);
    apply_env_overrides(c);
    return c;
}

std::pair<std::string, int> split_listen(const std::string& listen) {
    const auto colon = listen.rfind(':');
    require(colon != std::string::npos && colon > 0, ErrorCode::InvalidInput, "listen must be host:port: " + listen);
    int port = -1;
    try {
        std::size_t used = 0;
        port = std::stoi(listen.substr(colon + 1), &used);
        if (used != listen.size() - colon - 1) port = -1;
    } catch (const std::exception&) {
        port = -1;
    }
    require(port >= 0 && port <= 65535, ErrorCode::InvalidInput, "listen port out of range: " + listen);
    return {listen.substr(0, colon), port};
}

SearchService::SearchService(ServiceConfig config) : config_(std::move(config)) {
    config_.check_paths();
    if (!config_.params_path.empty()) params_ = load_params(config_.params_path);
    index::LoadOptions opts;
    opts.allow_partial = config_.allow_partial;
    engine_ = Engine::open(config_.index_path, opts);
    if (config_.shard_count) {
        require(*config_.shard_count == engine_->config().shard_count, ErrorCode::InvalidInput,
                "shard_count in the service config disagrees with the index");
    }
    if (config_.sparse_pool) params_.sparse_pool = *config_.sparse_pool;
    if (config_.dense_pool) params_.dense_pool = *config_.dense_pool;
    params_.validate();
}

SearchService::SearchService(ServiceConfig config, std::unique_ptr<Engine> engine, search::SearchParams params)
    : config_(std::move(config)), engine_(std::move(engine)), params_(params) {
    if (config_.sparse_pool) params_.sparse_pool = *config_.sparse_pool;
    if (config_.dense_pool) params_.dense_pool = *config_.dense_pool;
    params_.validate();
}

std::optional<std::string> SearchService::allowed_origin(const Request& r) const {
    const auto it = r.headers.find("origin");
    if (it == r.headers.end()) return std::nullopt;
    for (const auto& o : config_.cors_allowlist) {
        if (o == "*" || o == it->second) return it->second;
    }
    return std::nullopt;
}

void SearchService::apply_cors(const Request& r, Response& out) const {
    if (auto o = allowed_origin(r)) {
        out.headers["Access-Control-Allow-Origin"] = *o;
        out.headers["Vary"] = "Origin";
    }
}

Response SearchService::handle(const Request& r) {
    Response out;
    if (r.method == "OPTIONS") {
        if (allowed_origin(r)) {
            out.status = 204;
            out.headers["Access-Control-Allow-Methods"] = "GET, POST, OPTIONS";
            out.headers["Access-Control-Allow-Headers"] = "Content-Type";
            out.headers["Access-Control-Max-Age"] = "600";
        } else {
            out = error_response(403, "cors", "origin not allowed");
        }
    } else if (r.path == "/v1/search") {
        out = r.method == "POST" ? search(r) : error_response(405, "method", "use POST");
    } else if (r.path == "/v1/ingest") {
        out = r.method == "POST" ? ingest(r) : error_response(405, "method", "use POST");
    } else if (r.path == "/v1/health") {
        out = r.method == "GET" ? health() : error_response(405, "method", "use GET");
    } else {
        out = error_response(404, "not_found", "no route " + r.path);
    }
    apply_cors(r, out);
    return out;
}

Response SearchService::search(const Request& r) {
    if (!engine_) return error_response(503, "index_unavailable", "no index loaded");
    const auto body = json::parse(r.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return error_response(400, "malformed", "body must be a JSON object");
    static const std::set<std::string> known{"query", "k", "allowed_types", "params_override", "timings"};
    for (const auto& [k, v] : body.items()) {
        if (!known.contains(k)) return error_response(400, "malformed", "unknown field '" + k + "'");
    }
    const auto q = body.find("query");
    if (q == body.end() || !q->is_string()) return error_response(400, "malformed", "'query' must be a string");
    const auto text = q->get<std::string>();
    if (trim(text).empty()) return error_response(400, "empty_query", "query is empty");
    std::size_t k = config_.default_k;
    if (auto it = body.find("k"); it != body.end()) {
        if (!it->is_number_integer() || it->get<long long>() < 1 ||
            it->get<long long>() > static_cast<long long>(config_.max_k)) {
            return error_response(400, "malformed", "k must be an integer in [1, " + std::to_string(config_.max_k) + "]");
        }
        k = it->get<std::size_t>();
    }
    std::optional<std::vector<ItemType>> allowed;
    if (auto it = body.find("allowed_types"); it != body.end() && !it->is_null()) {
        if (!it->is_array()) return error_response(400, "malformed", "allowed_types must be an array");
        allowed.emplace();
        for (const auto& t : *it) {
            const auto parsed = t.is_string() ? parse_item_type(t.get<std::string>()) : std::nullopt;
            if (!parsed) return error_response(400, "malformed", "unknown item type " + t.dump());
            allowed->push_back(*parsed);
        }
    }
    bool with_timings = true;
    if (auto it = body.find("timings"); it != body.end()) {
        if (!it->is_boolean()) return error_response(400, "malformed", "timings must be a boolean");
        with_timings = it->get<bool>();
    }
    try {
        auto params = params_;
        if (auto it = body.find("params_override"); it != body.end() && !it->is_null()) {
            if (it->contains("field_weights")) {
                return error_response(400, "malformed", "field_weights are fixed when the index is built");
            }
            params = search::params_from_json(*it, params_);
        }
        const auto resp = engine_->searcher().search(text, k, params, allowed);
        Response out;
        out.body = search::to_json(resp, with_timings).dump();
        return out;
    } catch (const Error& e) {
        return error_response(status_for(e.code()), to_string(e.code()), e.what());
    }
}

Response SearchService::ingest(const Request& r) {
    if (!engine_) return error_response(503, "index_unavailable", "no index loaded");
    std::string lines = r.body;
    const auto t = trim(r.body);
    if (!t.empty() && t.front() == '{') {
        const auto j = json::parse(t, nullptr, false);
        if (!j.is_discarded() && j.is_object() && j.contains("records")) {
            if (!j["records"].is_array()) return error_response(400, "malformed", "records must be an array");
            std::ostringstream o;
            for (const auto& rec : j["records"]) o << rec.dump() << "\n";
            lines = o.str();
        }
    }
    std::istringstream in(lines);
    const auto stats = engine_->ingestor().ingest_jsonl(in, engine_->index());
    if (config_.persist_ingest && stats.ingested > 0 && !config_.index_path.empty()) {
        std::lock_guard lock(persist_mu_);
        try {
            engine_->save(config_.index_path);
        } catch (const Error& e) {
            return error_response(500, to_string(e.code()), e.what());
        } catch (const std::filesystem::filesystem_error& e) {
            return error_response(500, "io", e.what());
        }
    }
    Response out;
    if (stats.failed > 0 && stats.ingested == 0) {
        out.status = stats.service_failures > 0 ? 502 : 400;
    }
    out.body = json{{"lines", stats.lines},
                    {"ingested", stats.ingested},
                    {"failed", stats.failed},
                    {"pending_classification", stats.pending_classification},
                    {"errors", stats.errors},
                    {"ms_per_doc", stats.ms_per_doc()},
                    {"documents", engine_->index().size()}}
                   .dump();
    return out;
}

Response SearchService::health() const {
    json j{{"status", engine_ ? "ok" : "no_index"}, {"index_loaded", engine_ != nullptr}};
    if (engine_) {
        j["documents"] = engine_->index().size();
        j["shards"] = engine_->config().shard_count;
        json failed = json::array();
        for (const auto& f : engine_->load_failures()) failed.push_back(f.index);
        j["failed_shards"] = std::move(failed);
    }
    json judges = json::array();
    for (const auto& jc : config_.judges) judges.push_back(jc.judge_id);
    j["judges"] = std::move(judges);
    Response out;
    out.status = engine_ ? 200 : 503;
    out.body = j.dump();
    return out;
}

struct HttpServer::Impl {
    SearchService& service;
    httplib::Server server;
    explicit Impl(SearchService& s) : service(s) {}
};

HttpServer::HttpServer(SearchService& service) : impl_(std::make_unique<Impl>(service)) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
        Request r;
        r.method = req.method;
        r.path = req.path;
        r.body = req.body;
        for (const auto& [k, v] : req.headers) {
            std::string lk = k;
            for (auto& c : lk) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            r.headers[lk] = v;
        }
        const auto out = impl_->service.handle(r);
        res.status = out.status;
        for (const auto& [k, v] : out.headers) res.set_header(k, v);
        if (!out.body.empty()) res.set_content(out.body, out.content_type);
    };
    impl_->server.Get(R"(/.*)", handler);
    impl_->server.Post(R"(/.*)", handler);
    impl_->server.Options(R"(/.*)", handler);
    impl_->server.set_payload_max_length(256u << 20);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    require(bound > 0, ErrorCode::Transport, "cannot bind " + host + ":" + std::to_string(port));
    return bound;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace archsearch::service
