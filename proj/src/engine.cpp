#include "archsearch/engine.hpp"

#include <fstream>
#include <set>

#include "archsearch/error.hpp"
#include "archsearch/http_clients.hpp"

namespace archsearch {

using nlohmann::json;

void EngineConfig::validate() const {
    require(shard_count >= 1, ErrorCode::InvalidInput, "shard_count must be >= 1");
    require(text_dim >= 1, ErrorCode::InvalidInput, "text_dim must be >= 1");
    require(region_scale > 0.0, ErrorCode::InvalidInput, "region_scale must be positive");
    require(service_timeout_ms > 0, ErrorCode::InvalidInput, "service_timeout_ms must be positive");
    require(bm25.k1 > 0.0 && bm25.b >= 0.0 && bm25.b <= 1.0, ErrorCode::InvalidInput, "bm25 needs k1 > 0, b in [0,1]");
    if (router) router->validate();
}

json to_json(const EngineConfig& c) {
    json weights = json::object();
    for (std::size_t i = 0; i < index::kFieldCount; ++i) {
        weights[std::string(index::to_string(static_cast<index::Field>(i)))] = c.bm25.field_weights[i];
    }
    json j{{"shard_count", c.shard_count},
           {"text_dim", c.text_dim},
           {"encoder_seed", c.encoder_seed},
           {"projection_seed", c.projection_seed},
           {"region_scale", c.region_scale},
           {"encoder_endpoint", c.encoder_endpoint},
           {"classifier_endpoint", c.classifier_endpoint},
           {"service_timeout_ms", c.service_timeout_ms},
           {"facility_patterns", c.facility_patterns},
           {"bm25", {{"k1", c.bm25.k1}, {"b", c.bm25.b}, {"field_weights", weights}}},
           {"classify_limits", {{"max_pages", c.classify_limits.max_pages}, {"max_chars", c.classify_limits.max_chars}}}};
    if (c.router) {
        json r;
        routing::to_json(r, *c.router);
        j["router"] = r;
    } else {
        j["router"] = nullptr;
    }
    return j;
}

EngineConfig engine_config_from_json(const json& j) {
    static const std::set<std::string> known{"shard_count",      "text_dim",          "encoder_seed",
                                             "projection_seed",  "region_scale",      "encoder_endpoint",
                                             "classifier_endpoint", "service_timeout_ms", "facility_patterns",
                                             "bm25",             "router",            "classify_limits"};
    require(j.is_object(), ErrorCode::InvalidInput, "engine config must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        require(known.contains(k), ErrorCode::InvalidInput, "unknown engine config key: " + k);
    }
    EngineConfig c;
    try {
        c.shard_count = j.value("shard_count", c.shard_count);
        c.text_dim = j.value("text_dim", c.text_dim);
        c.encoder_seed = j.value("encoder_seed", c.encoder_seed);
        c.projection_seed = j.value("projection_seed", c.projection_seed);
        c.region_scale = j.value("region_scale", c.region_scale);
        c.encoder_endpoint = j.value("encoder_endpoint", c.encoder_endpoint);
        c.classifier_endpoint = j.value("classifier_endpoint", c.classifier_endpoint);
        c.service_timeout_ms = j.value("service_timeout_ms", c.service_timeout_ms);
        c.facility_patterns = j.value("facility_patterns", c.facility_patterns);
        if (auto it = j.find("bm25"); it != j.end()) {
            c.bm25.k1 = it->value("k1", c.bm25.k1);
            c.bm25.b = it->value("b", c.bm25.b);
            if (auto w = it->find("field_weights"); w != it->end()) {
                for (const auto& [name, value] : w->items()) {
                    const auto f = index::parse_field(name);
                    require(f.has_value(), ErrorCode::InvalidInput, "unknown field weight: " + name);
                    c.bm25.field_weights[static_cast<std::size_t>(*f)] = value.get<double>();
                }
            }
        }
        if (auto it = j.find("router"); it != j.end() && !it->is_null()) {
            routing::RouterModel m;
            routing::from_json(*it, m);
            c.router = m;
        }
        if (auto it = j.find("classify_limits"); it != j.end()) {
            c.classify_limits.max_pages = it->value("max_pages", c.classify_limits.max_pages);
            c.classify_limits.max_chars = it->value("max_chars", c.classify_limits.max_chars);
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidInput, std::string("engine config: ") + e.what());
    }
    c.validate();
    return c;
}

EngineConfig load_engine_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::NotFound, "cannot open engine config " + path.string());
    const auto j = json::parse(in, nullptr, false);
    require(!j.is_discarded(), ErrorCode::InvalidInput, "engine config is not valid JSON: " + path.string());
    return engine_config_from_json(j);
}

Engine::Engine(EngineConfig config) : config_(std::move(config)) {
    config_.validate();
    init_components();
    index_ = std::make_unique<index::HybridIndex>(config_.shard_count, projection_.output_dim(), config_.bm25);
}

Engine::Engine(EngineConfig config, std::unique_ptr<index::HybridIndex> idx)
    : config_(std::move(config)), index_(std::move(idx)) {
    config_.validate();
    init_components();
}

void Engine::init_components() {
    if (config_.encoder_endpoint.empty()) {
        encoder_ = std::make_unique<embedding::StubTextEncoder>(config_.text_dim, config_.encoder_seed);
    } else {
        encoder_ = std::make_unique<http::HttpTextEncoder>(config_.encoder_endpoint, config_.text_dim,
                                                           config_.service_timeout_ms);
    }
    if (!config_.classifier_endpoint.empty()) {
        classifier_ = std::make_unique<http::HttpDocumentClassifier>(config_.classifier_endpoint,
                                                                     config_.service_timeout_ms);
    }
    parser_ = std::make_unique<extraction::FieldParser>(
        config_.facility_patterns.empty() ? extraction::default_facility_patterns() : config_.facility_patterns);
    projection_ = embedding::ProjectionConfig::identity_block(config_.text_dim, embedding::kRegionFeatureDim,
                                                              config_.projection_seed, 0, config_.region_scale);
}

std::unique_ptr<Engine> Engine::open(const std::filesystem::path& dir, const index::LoadOptions& options) {
    auto config = load_engine_config(dir / kEngineFile);
    auto loaded = index::load_shards(dir, options);
    require(loaded.manifest.shard_count == config.shard_count, ErrorCode::CorruptIndex,
            "engine.json shard_count disagrees with the manifest");
    config.bm25 = loaded.manifest.bm25;
    std::unique_ptr<Engine> e(new Engine(std::move(config), std::move(loaded.index)));
    require(e->index_->dim() == e->projection_.output_dim(), ErrorCode::CorruptIndex,
            "index embedding dimension disagrees with engine.json");
    e->failures_ = std::move(loaded.failed);
    return e;
}

void Engine::save(const std::filesystem::path& dir) const {
    index::save_shards(*index_, dir);
    const auto tmp = dir / (std::string(kEngineFile) + ".tmp");
    {
        std::ofstream out(tmp);
        require(static_cast<bool>(out), ErrorCode::InvalidInput, "cannot write " + tmp.string());
        out << to_json(config_).dump(2) << "\n";
    }
    std::filesystem::rename(tmp, dir / kEngineFile);
}

ingest::Ingestor Engine::ingestor() const {
    ingest::IngestConfig ic;
    ic.router = config_.router;
    ic.classify_limits = config_.classify_limits;
    return ingest::Ingestor(*encoder_, projection_, *parser_, classifier_.get(), ic);
}

fusion::SlotParser Engine::slot_parser() const {
    return fusion::SlotParser(config_.facility_patterns.empty() ? extraction::default_facility_patterns()
                                                                : config_.facility_patterns);
}

search::Searcher Engine::searcher() const {
    return search::Searcher(*index_, *encoder_, projection_, slot_parser());
}

}  // namespace archsearch
