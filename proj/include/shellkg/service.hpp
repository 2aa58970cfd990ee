#pragma once

#include "shellkg/graph.hpp"
#include "shellkg/recommender.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace shellkg::service {

struct ServiceConfig {
    std::string           host = "127.0.0.1";
    int                   port = 8080;
    std::filesystem::path snapshot;
    std::filesystem::path weights;  // empty or missing file: default weights
    std::size_t           top_n          = 5;
    std::size_t           cache_capacity = 1024;

    /// JSON object with any of the fields above; unknown keys are rejected.
    static ServiceConfig load(const std::filesystem::path& path);

    /// SHELLKG_PORT and SHELLKG_SNAPSHOT override the port and snapshot path.
    void apply_env();
};

struct HttpResponse {
    int         status = 200;
    std::string body;
};

/// Request handling over an atomically swappable graph snapshot. Transport
/// independent so it can be exercised without sockets.
class Service {
  public:
    explicit Service(ServiceConfig cfg);
    ~Service();

    /// Loads the configured snapshot; throws graph::SnapshotError on failure.
    void load_snapshot();
    /// Installs a graph directly (tests, embedding).
    void install(graph::KnowledgeGraph graph);

    std::shared_ptr<const graph::KnowledgeGraph> snapshot() const;
    std::uint64_t                                generation() const;

    HttpResponse recommend_command(const std::string& body);
    HttpResponse recommend_sequence(const std::string& body);
    HttpResponse reload();
    HttpResponse health() const;

    /// Dispatches by method and path; unknown routes give 404.
    HttpResponse handle(const std::string& method, const std::string& path, const std::string& body);

    /// Binds and serves until stop(). Returns false when the port cannot be bound.
    bool listen();
    /// Binds to an ephemeral port and returns it; serve with listen_after_bind().
    int  bind_any_port();
    bool listen_after_bind();
    void stop();

  private:
    void swap_in(std::shared_ptr<const graph::KnowledgeGraph> graph);
    void setup_routes();

    ServiceConfig                                cfg_;
    recommender::Weights                         weights_;
    recommender::CommandCache                    cache_;
    mutable std::mutex                           snapshot_mutex_;
    std::shared_ptr<const graph::KnowledgeGraph> graph_;
    std::uint64_t                                generation_ = 0;
    std::mutex                                   reload_mutex_;
    std::unique_ptr<httplib::Server>             server_;
};

}  // namespace shellkg::service
