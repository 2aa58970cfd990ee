#include "shellkg/service.hpp"

#include "shellkg/hash.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace shellkg::service {

namespace {

using nlohmann::json;

HttpResponse reply(int status, const json& body) {
    return HttpResponse{status, body.dump()};
}

HttpResponse error(int status, const std::string& message) {
    return reply(status, json{{"error", message}});
}

json components_json(const recommender::Components& c) {
    return json{{"sim", c.sim}, {"user", c.user}, {"ip", c.ip}, {"freq", c.freq}};
}

// Required string field; throws std::invalid_argument naming the field.
std::string field(const json& body, const char* name) {
    if (!body.contains(name) || !body.at(name).is_string()) {
        throw std::invalid_argument(std::string("missing or non-string field '") + name + "'");
    }
    return body.at(name).get<std::string>();
}

std::size_t top_n(const json& body, std::size_t fallback) {
    if (!body.contains("n")) {
        return fallback;
    }
    const auto& n = body.at("n");
    if (!n.is_number_integer() || n.get<std::int64_t>() < 1) {
        throw std::invalid_argument("'n' must be a positive integer");
    }
    return n.get<std::size_t>();
}

json parse_object(const std::string& text) {
    auto body = json::parse(text, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
        throw std::invalid_argument("body must be a JSON object");
    }
    return body;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open service config " + path.string());
    }
    const auto    j = json::parse(in);
    ServiceConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "host") {
            cfg.host = value.get<std::string>();
        } else if (key == "port") {
            cfg.port = value.get<int>();
        } else if (key == "snapshot") {
            cfg.snapshot = value.get<std::string>();
        } else if (key == "weights") {
            cfg.weights = value.get<std::string>();
        } else if (key == "top_n") {
            cfg.top_n = value.get<std::size_t>();
        } else if (key == "cache_capacity") {
            cfg.cache_capacity = value.get<std::size_t>();
        } else {
            throw std::runtime_error("service config: unknown key '" + key + "'");
        }
    }
    // Relative paths are taken from the config file's directory.
    const auto base = path.parent_path();
    if (!cfg.snapshot.empty() && cfg.snapshot.is_relative()) {
        cfg.snapshot = base / cfg.snapshot;
    }
    if (!cfg.weights.empty() && cfg.weights.is_relative()) {
        cfg.weights = base / cfg.weights;
    }
    return cfg;
}

void ServiceConfig::apply_env() {
    if (const char* port_env = std::getenv("SHELLKG_PORT")) {
        port = std::stoi(port_env);
    }
    if (const char* snap = std::getenv("SHELLKG_SNAPSHOT")) {
        snapshot = snap;
    }
}

Service::Service(ServiceConfig cfg)
  : cfg_(std::move(cfg)),
    weights_(cfg_.weights.empty() ? recommender::Weights{} : recommender::load_weights(cfg_.weights)),
    cache_(cfg_.cache_capacity) {
    if (cfg_.top_n == 0) {
        throw std::invalid_argument("top_n must be positive");
    }
}

Service::~Service() = default;

void Service::swap_in(std::shared_ptr<const graph::KnowledgeGraph> graph) {
    {
        const std::lock_guard lock(snapshot_mutex_);
        graph_ = std::move(graph);
        ++generation_;
    }
    cache_.clear();
}

void Service::load_snapshot() {
    if (cfg_.snapshot.empty()) {
        throw graph::SnapshotError("no snapshot path configured");
    }
    swap_in(std::make_shared<const graph::KnowledgeGraph>(graph::snapshot_load(cfg_.snapshot)));
}

void Service::install(graph::KnowledgeGraph graph) {
    swap_in(std::make_shared<const graph::KnowledgeGraph>(std::move(graph)));
}

std::shared_ptr<const graph::KnowledgeGraph> Service::snapshot() const {
    const std::lock_guard lock(snapshot_mutex_);
    return graph_;
}

std::uint64_t Service::generation() const {
    const std::lock_guard lock(snapshot_mutex_);
    return generation_;
}

HttpResponse Service::recommend_command(const std::string& body_text) {
    const auto               start = std::chrono::steady_clock::now();
    recommender::CommandRequest req;
    try {
        const auto body = parse_object(body_text);
        req.partial     = field(body, "partial");
        req.user        = field(body, "user");
        req.ip          = field(body, "ip");
        req.scope       = field(body, "scope");
        req.top_n       = top_n(body, cfg_.top_n);
        req.validate();
    } catch (const std::exception& e) {
        return error(400, e.what());
    }
    std::shared_ptr<const graph::KnowledgeGraph> graph;
    std::uint64_t                                generation = 0;
    {
        const std::lock_guard lock(snapshot_mutex_);
        graph      = graph_;
        generation = generation_;
    }
    if (!graph) {
        return error(503, "no snapshot loaded");
    }
    const auto result = recommender::recommend_commands(req, *graph, weights_, &cache_, generation);
    json       candidates = json::array();
    for (const auto& c : result.candidates) {
        candidates.push_back(json{{"command", c.command}, {"score", c.score}, {"components", components_json(c.components)}});
    }
    json out{{"candidates", candidates}, {"cached", result.cached}, {"elapsed_ms", elapsed_ms(start)}};
    if (result.unknown_scope) {
        out["unknown_scope"] = true;
        return reply(404, out);
    }
    return reply(200, out);
}

HttpResponse Service::recommend_sequence(const std::string& body_text) {
    const auto                   start = std::chrono::steady_clock::now();
    recommender::SequenceRequest req;
    try {
        const auto body = parse_object(body_text);
        req.command     = field(body, "command");
        req.user        = field(body, "user");
        req.ip          = field(body, "ip");
        req.scope       = field(body, "scope");
        req.top_n       = top_n(body, cfg_.top_n);
        if (body.contains("cwd")) {
            req.cwd = field(body, "cwd");
        }
        req.validate();
    } catch (const std::exception& e) {
        return error(400, e.what());
    }
    const auto graph = snapshot();
    if (!graph) {
        return error(503, "no snapshot loaded");
    }
    const auto result     = recommender::recommend_sequences(req, *graph, weights_);
    json       candidates = json::array();
    for (const auto& c : result.candidates) {
        candidates.push_back(json{{"suffix", c.suffix}, {"score", c.score}, {"components", components_json(c.components)}});
    }
    json out{{"candidates", candidates}, {"elapsed_ms", elapsed_ms(start)}};
    if (result.unknown_scope) {
        out["unknown_scope"] = true;
        return reply(404, out);
    }
    return reply(200, out);
}

HttpResponse Service::reload() {
    const std::lock_guard lock(reload_mutex_);
    try {
        load_snapshot();
    } catch (const std::exception& e) {
        return error(500, std::string("reload failed, previous snapshot kept: ") + e.what());
    }
    auto out = json::parse(health().body);
    return reply(200, out);
}

HttpResponse Service::health() const {
    std::shared_ptr<const graph::KnowledgeGraph> graph;
    std::uint64_t                                generation = 0;
    {
        const std::lock_guard lock(snapshot_mutex_);
        graph      = graph_;
        generation = generation_;
    }
    if (!graph) {
        return reply(503, json{{"status", "no_snapshot"}});
    }
    const auto& m = graph->metadata();
    return reply(200, json{{"status", "ok"},
                           {"generation", generation},
                           {"corpus_hash", to_hex(m.corpus_hash)},
                           {"config_hash", to_hex(m.config_hash)},
                           {"build_timestamp", m.build_timestamp},
                           {"vertices", graph->vertices().size()},
                           {"edges", graph->edges().size()}});
}

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) {
    try {
        if (method == "POST" && path == "/v1/recommend/command") {
            return recommend_command(body);
        }
        if (method == "POST" && path == "/v1/recommend/sequence") {
            return recommend_sequence(body);
        }
        if (method == "POST" && path == "/v1/admin/reload") {
            return reload();
        }
        if (method == "GET" && path == "/v1/health") {
            return health();
        }
        return error(404, "no route for " + method + " " + path);
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

void Service::setup_routes() {
    server_ = std::make_unique<httplib::Server>();
    const auto bridge = [this](const httplib::Request& req, httplib::Response& res) {
        const auto out = handle(req.method, req.path, req.body);
        res.status     = out.status;
        res.set_content(out.body, "application/json");
    };
    server_->Post("/v1/recommend/command", bridge);
    server_->Post("/v1/recommend/sequence", bridge);
    server_->Post("/v1/admin/reload", bridge);
    server_->Get("/v1/health", bridge);
    server_->Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server_->set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    });
    server_->set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.body.empty()) {
            res.set_content(json{{"error", "no route for " + req.method + " " + req.path}}.dump(), "application/json");
        }
    });
    server_->set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(json{{"error", message}}.dump(), "application/json");
    });
}

bool Service::listen() {
    setup_routes();
    return server_->listen(cfg_.host, cfg_.port);
}

int Service::bind_any_port() {
    setup_routes();
    return server_->bind_to_any_port(cfg_.host);
}

bool Service::listen_after_bind() {
    return server_ && server_->listen_after_bind();
}

void Service::stop() {
    if (server_) {
        server_->stop();
    }
}

}  // namespace shellkg::service
