#pragma once

#include "shellkg/aggregator.hpp"
#include "shellkg/intents.hpp"
#include "shellkg/miner.hpp"
#include "shellkg/parser.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace shellkg::graph {

enum class Tag : std::uint8_t { scope, user, ip, path, file, cmd, seq, intent };

std::string_view tag_name(Tag tag);

enum class EdgeType : std::uint8_t {
    scope_cmd,
    scope_seq,
    scope_path,
    scope_user,
    scope_ip,
    user_cmd,    // user_cmd_n
    ip_cmd,      // IP_cmd_n
    user_seq,    // user_seq_n
    ip_seq,      // IP_seq_n
    cmd_file,
    cmd_path,
    path_file,
    seq_cmd,     // seq_cmd_ex
    cmd_intent,
    seq_intent,
};

inline constexpr std::size_t kEdgeTypeCount = 15;

std::string_view edge_type_name(EdgeType type);

/// Name of the property carried by the edge type, empty for plain edges.
std::string_view edge_property_name(EdgeType type);

using PropValue = std::variant<std::string, std::int64_t, std::vector<std::string>>;
using Props     = std::map<std::string, PropValue>;

struct Vertex {
    Tag                      tag = Tag::scope;
    std::string              id;
    std::string              scope;       // owning scope (empty for user and IP vertices)
    std::string              value;       // cmd.value is the command type
    std::string              full_value;  // cmd only
    std::vector<std::string> sequence;    // seq.value
    std::int64_t             n = 0;       // cmd.n, seq.n

    bool operator==(const Vertex&) const = default;

    /// Schema view of the vertex properties.
    [[nodiscard]] Props props() const;
};

struct Edge {
    EdgeType      type = EdgeType::scope_cmd;
    std::uint32_t from = 0;
    std::uint32_t to   = 0;
    std::int64_t  value = 0;  // count or execution order, 0 for plain edges

    bool operator==(const Edge&) const = default;
};

struct BuildMetadata {
    std::uint64_t corpus_hash     = 0;
    std::uint64_t config_hash     = 0;
    std::int64_t  build_timestamp = 0;

    bool operator==(const BuildMetadata&) const = default;
};

/// Vertex ids. Scope, user and IP ids embed the raw value; the others are a
/// stable 64-bit content hash of the tag and the identifying parts.
std::string vertex_id(Tag tag, std::span<const std::string_view> parts);
std::string scope_id(std::string_view scope);
std::string user_id(std::string_view user);
std::string ip_id(std::string_view ip);
std::string path_id(std::string_view scope, std::string_view path);
std::string file_id(std::string_view scope, std::string_view path, std::string_view file);
std::string cmd_id(std::string_view scope, std::string_view full_text);
std::string seq_id(std::string_view scope, const std::vector<std::string>& commands);
std::string intent_id(std::string_view scope, std::string_view intent);

struct CommandHit {
    std::uint32_t cmd    = 0;
    std::int64_t  user_n = 0;  // user_cmd_n for the requesting user, 0 when absent
    std::int64_t  ip_n   = 0;  // IP_cmd_n for the requesting IP, 0 when absent
};

struct SequenceHit {
    std::uint32_t seq      = 0;
    std::uint32_t entry    = 0;  // cmd vertex the sequence was reached from
    std::int64_t  position = 0;  // seq_cmd_ex of `entry`, 1-based
    std::int64_t  user_n   = 0;
    std::int64_t  ip_n     = 0;
};

class BuildError : public std::runtime_error {
  public:
    explicit BuildError(std::vector<std::string> diagnostics);
    const std::vector<std::string>& diagnostics() const { return diagnostics_; }

  private:
    std::vector<std::string> diagnostics_;
};

class SnapshotError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Immutable after construction; concurrent readers need no coordination.
class KnowledgeGraph {
  public:
    KnowledgeGraph() = default;
    KnowledgeGraph(std::vector<Vertex> vertices, std::vector<Edge> edges, BuildMetadata metadata);
    KnowledgeGraph(const KnowledgeGraph& other);
    KnowledgeGraph(KnowledgeGraph&& other) noexcept;
    KnowledgeGraph& operator=(KnowledgeGraph other) noexcept;

    const std::vector<Vertex>& vertices() const { return vertices_; }
    const std::vector<Edge>&   edges() const { return edges_; }
    const BuildMetadata&       metadata() const { return metadata_; }
    const Vertex&              vertex(std::uint32_t index) const { return vertices_[index]; }
    std::optional<std::uint32_t> find(std::string_view id) const;
    std::span<const std::uint32_t> incident_edges(std::uint32_t vertex) const;
    Props edge_props(const Edge& edge) const;

    std::size_t count(Tag tag) const;
    bool        has_scope(std::string_view scope) const;

    /// Sorted distinct cmd.value strings under a scope.
    const std::vector<std::string>& command_values(std::string_view scope) const;

    std::vector<CommandHit> query_commands_by_prefix(std::string_view scope,
                                                     std::string_view value_prefix,
                                                     std::string_view user = {},
                                                     std::string_view ip   = {}) const;
    /// cmd vertices whose value equals `value` exactly.
    std::vector<CommandHit> query_commands_by_value(std::string_view scope,
                                                    std::string_view value,
                                                    std::string_view user = {},
                                                    std::string_view ip   = {}) const;
    std::vector<CommandHit> query_commands_execute(std::string_view scope, std::string_view user = {}, std::string_view ip = {}) const;

    /// One row per seq_cmd edge of every cmd with the given value.
    std::vector<SequenceHit> query_sequences_by_cmd_value(std::string_view scope,
                                                          std::string_view value,
                                                          std::string_view user = {},
                                                          std::string_view ip   = {}) const;
    /// One row per seq_cmd edge of the given cmd vertex.
    std::vector<SequenceHit> query_sequences_by_cmd(std::uint32_t cmd, std::string_view user = {}, std::string_view ip = {}) const;

    /// cmd vertices connected to the file vertex (scope, path, file).
    std::vector<std::uint32_t> query_commands_by_file(std::string_view scope, std::string_view path, std::string_view file) const;
    /// Same set reached from the path vertex: cmd--path edges filtered by a
    /// cmd--file edge to a file with the requested name.
    std::vector<std::uint32_t> query_commands_by_file_via_path(std::string_view scope,
                                                               std::string_view path,
                                                               std::string_view file) const;

    /// Number of query_* calls served, for cache instrumentation.
    std::uint64_t query_count() const { return query_count_.load(std::memory_order_relaxed); }

    /// Vertex and edge sets are equal (metadata ignored).
    bool structurally_equal(const KnowledgeGraph& other) const;

    /// Throws BuildError listing violated schema invariants.
    void check_invariants() const;

  private:
    struct ScopeIndex {
        std::vector<std::uint32_t> commands;  // cmd vertices sorted by (value, full_value)
        std::vector<std::string>   values;
    };

    void reindex();
    std::int64_t edge_value(std::uint32_t vertex, EdgeType type, std::optional<std::uint32_t> other) const;
    std::optional<std::uint32_t> find_tagged(Tag tag, std::string_view raw) const;
    void count_query() const { query_count_.fetch_add(1, std::memory_order_relaxed); }

    std::vector<Vertex>                           vertices_;
    std::vector<Edge>                             edges_;
    BuildMetadata                                 metadata_;
    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<std::uint32_t>                    adjacency_offsets_;
    std::vector<std::uint32_t>                    adjacency_;
    std::unordered_map<std::string, ScopeIndex>   scopes_;
    mutable std::atomic<std::uint64_t>            query_count_{0};
};

struct LabeledCommand {
    std::string          scope;
    std::string          full_text;
    intents::IntentLabel label;
};

/// Classifies every distinct (scope, command) of the sessions.
std::vector<LabeledCommand> label_commands(const std::vector<parser::Session>& sessions, const std::vector<intents::IntentRule>& rules);

struct BuildInputs {
    std::span<const parser::Session>         sessions;
    std::span<const miner::SequencePattern>  patterns;
    std::span<const aggregator::Macro>       macros;
    std::span<const LabeledCommand>          labels;
    std::size_t                              max_gap = 5;  // gap used to count sequence occurrences
    std::optional<std::int64_t>              build_timestamp;  // default: latest session end
};

/// Throws BuildError on dangling references.
KnowledgeGraph build(const BuildInputs& inputs);

/// Adds the counts of `delta` to `base`; equals a build over both corpora
/// when the same patterns, macros and labels are supplied.
KnowledgeGraph apply_update(const KnowledgeGraph& base, const BuildInputs& delta);

void           snapshot_save(const KnowledgeGraph& graph, const std::filesystem::path& path);
KnowledgeGraph snapshot_load(const std::filesystem::path& path);
std::string    snapshot_serialize(const KnowledgeGraph& graph);
KnowledgeGraph snapshot_deserialize(std::string_view bytes);

}  // namespace shellkg::graph
