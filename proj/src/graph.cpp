#include "shellkg/graph.hpp"

#include "shellkg/hash.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace shellkg::graph {

namespace {

constexpr std::array<std::string_view, 8> kTagNames = {"scope", "user", "IP", "path", "file", "cmd", "seq", "intent"};

constexpr std::array<std::string_view, kEdgeTypeCount> kEdgeNames = {
    "scope_cmd", "scope_seq", "scope_path", "scope_user", "scope_IP", "user_cmd", "IP_cmd", "user_seq",
    "IP_seq",    "cmd_file",  "cmd_path",   "path_file",  "seq_cmd",  "cmd_intent", "seq_intent",
};

constexpr std::array<std::string_view, kEdgeTypeCount> kEdgeProps = {
    "", "", "", "", "", "user_cmd_n", "IP_cmd_n", "user_seq_n", "IP_seq_n", "", "", "", "seq_cmd_ex", "", "",
};

// Endpoint tags per edge type, in stored orientation.
constexpr std::array<std::pair<Tag, Tag>, kEdgeTypeCount> kEndpoints = {{
    {Tag::scope, Tag::cmd},
    {Tag::scope, Tag::seq},
    {Tag::scope, Tag::path},
    {Tag::scope, Tag::user},
    {Tag::scope, Tag::ip},
    {Tag::user, Tag::cmd},
    {Tag::ip, Tag::cmd},
    {Tag::user, Tag::seq},
    {Tag::ip, Tag::seq},
    {Tag::cmd, Tag::file},
    {Tag::cmd, Tag::path},
    {Tag::path, Tag::file},
    {Tag::seq, Tag::cmd},
    {Tag::cmd, Tag::intent},
    {Tag::seq, Tag::intent},
}};

bool is_counted(EdgeType t) {
    return t == EdgeType::user_cmd || t == EdgeType::ip_cmd || t == EdgeType::user_seq || t == EdgeType::ip_seq;
}

std::size_t idx(EdgeType t) {
    return static_cast<std::size_t>(t);
}

std::string hashed_id(Tag tag, std::span<const std::string_view> parts) {
    StableHasher h;
    h.add(kTagNames[static_cast<std::size_t>(tag)]);
    for (const auto p : parts) {
        h.add(p);
    }
    return std::string(kTagNames[static_cast<std::size_t>(tag)]) + ":" + to_hex(h.value());
}

struct EdgeKey {
    EdgeType      type;
    std::uint32_t from;
    std::uint32_t to;
    std::int64_t  order;

    bool operator==(const EdgeKey&) const = default;
};

struct EdgeKeyHash {
    std::size_t operator()(const EdgeKey& k) const {
        std::uint64_t h = static_cast<std::uint64_t>(k.type);
        h               = h * 0x9E3779B97F4A7C15ULL ^ k.from;
        h               = h * 0x9E3779B97F4A7C15ULL ^ k.to;
        h               = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(k.order);
        return static_cast<std::size_t>(h ^ (h >> 29));
    }
};

EdgeKey key_of(const Edge& e) {
    return EdgeKey{e.type, e.from, e.to, e.type == EdgeType::seq_cmd ? e.value : 0};
}

std::uint64_t hash_sessions(std::span<const parser::Session> sessions) {
    StableHasher h;
    h.add_u64(sessions.size());
    for (const auto& s : sessions) {
        h.add(s.session_id).add(s.ip).add(s.scope).add(s.user);
        h.add_u64(s.events.size());
        for (const auto& e : s.events) {
            h.add(e.full_text).add_u64(static_cast<std::uint64_t>(e.ts));
        }
    }
    return h.value();
}

std::uint64_t hash_knowledge(const BuildInputs& in) {
    StableHasher h;
    h.add_u64(in.max_gap);
    h.add_u64(in.patterns.size());
    for (const auto& p : in.patterns) {
        h.add_u64(p.commands.size());
        for (const auto& c : p.commands) {
            h.add(c);
        }
    }
    h.add_u64(in.macros.size());
    for (const auto& m : in.macros) {
        h.add(m.scope).add(m.intent).add_u64(m.commands.size());
        for (const auto& c : m.commands) {
            h.add(c);
        }
    }
    h.add_u64(in.labels.size());
    for (const auto& l : in.labels) {
        h.add(l.scope).add(l.full_text).add(l.label.to_string());
    }
    return h.value();
}

class GraphBuilder {
  public:
    explicit GraphBuilder(const KnowledgeGraph* base) {
        if (base == nullptr) {
            return;
        }
        vertices_ = base->vertices();
        edges_    = base->edges();
        metadata_ = base->metadata();
        for (std::uint32_t i = 0; i < vertices_.size(); ++i) {
            index_.emplace(vertices_[i].id, i);
        }
        for (std::uint32_t i = 0; i < edges_.size(); ++i) {
            edge_index_.emplace(key_of(edges_[i]), i);
        }
    }

    void populate(const BuildInputs& in) {
        add_sessions(in.sessions);
        add_sequences(in);
        add_macro_intents(in.macros);
        add_labels(in.labels);

        metadata_.corpus_hash = StableHasher{}.add_u64(metadata_.corpus_hash).add_u64(hash_sessions(in.sessions)).value();
        metadata_.config_hash = StableHasher{}.add_u64(metadata_.config_hash).add_u64(hash_knowledge(in)).value();
        if (in.build_timestamp) {
            metadata_.build_timestamp = *in.build_timestamp;
        } else {
            for (const auto& s : in.sessions) {
                metadata_.build_timestamp = std::max(metadata_.build_timestamp, s.end_ts);
            }
        }
    }

    KnowledgeGraph finish() {
        if (!diagnostics_.empty()) {
            throw BuildError(std::move(diagnostics_));
        }
        // Canonical order: vertices by id, edges by (type, from, to, value).
        std::vector<std::uint32_t> order(vertices_.size());
        std::iota(order.begin(), order.end(), 0U);
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return vertices_[a].id < vertices_[b].id; });
        std::vector<std::uint32_t> remap(vertices_.size());
        std::vector<Vertex>        sorted;
        sorted.reserve(vertices_.size());
        for (std::uint32_t r = 0; r < order.size(); ++r) {
            remap[order[r]] = r;
            sorted.push_back(std::move(vertices_[order[r]]));
        }
        for (auto& e : edges_) {
            e.from = remap[e.from];
            e.to   = remap[e.to];
        }
        std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
            return std::tie(a.type, a.from, a.to, a.value) < std::tie(b.type, b.from, b.to, b.value);
        });
        KnowledgeGraph graph(std::move(sorted), std::move(edges_), metadata_);
        graph.check_invariants();
        return graph;
    }

  private:
    template <typename Init>
    std::uint32_t vertex(const std::string& id, Init&& init) {
        const auto [it, inserted] = index_.try_emplace(id, static_cast<std::uint32_t>(vertices_.size()));
        if (inserted) {
            Vertex v;
            v.id = id;
            init(v);
            vertices_.push_back(std::move(v));
        }
        return it->second;
    }

    std::optional<std::uint32_t> lookup(const std::string& id) const {
        const auto it = index_.find(id);
        if (it == index_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    void edge(EdgeType type, std::uint32_t from, std::uint32_t to, std::int64_t value = 0) {
        const EdgeKey key{type, from, to, type == EdgeType::seq_cmd ? value : 0};
        const auto [it, inserted] = edge_index_.try_emplace(key, static_cast<std::uint32_t>(edges_.size()));
        if (inserted) {
            edges_.push_back(Edge{type, from, to, is_counted(type) || type == EdgeType::seq_cmd ? value : 0});
        } else if (is_counted(type)) {
            edges_[it->second].value += value;
        }
    }

    std::uint32_t scope_vertex(const std::string& scope) {
        return vertex(scope_id(scope), [&](Vertex& v) {
            v.tag   = Tag::scope;
            v.scope = scope;
            v.value = scope;
        });
    }

    void add_sessions(std::span<const parser::Session> sessions) {
        for (const auto& s : sessions) {
            const auto sv = scope_vertex(s.scope);
            const auto uv = vertex(user_id(s.user), [&](Vertex& v) {
                v.tag   = Tag::user;
                v.value = s.user;
            });
            const auto iv = vertex(ip_id(s.ip), [&](Vertex& v) {
                v.tag   = Tag::ip;
                v.value = s.ip;
            });
            edge(EdgeType::scope_user, sv, uv);
            edge(EdgeType::scope_ip, sv, iv);
            for (const auto& e : s.events) {
                const auto cv = vertex(cmd_id(s.scope, e.full_text), [&](Vertex& v) {
                    v.tag        = Tag::cmd;
                    v.scope      = s.scope;
                    v.value      = e.cmd_type;
                    v.full_value = e.full_text;
                });
                vertices_[cv].n += 1;
                edge(EdgeType::scope_cmd, sv, cv);
                edge(EdgeType::user_cmd, uv, cv, 1);
                edge(EdgeType::ip_cmd, iv, cv, 1);
                if (!e.path) {
                    continue;
                }
                const auto pv = vertex(path_id(s.scope, *e.path), [&](Vertex& v) {
                    v.tag   = Tag::path;
                    v.scope = s.scope;
                    v.value = *e.path;
                });
                edge(EdgeType::scope_path, sv, pv);
                edge(EdgeType::cmd_path, cv, pv);
                if (e.file) {
                    const auto fv = vertex(file_id(s.scope, *e.path, *e.file), [&](Vertex& v) {
                        v.tag   = Tag::file;
                        v.scope = s.scope;
                        v.value = *e.file;
                    });
                    edge(EdgeType::cmd_file, cv, fv);
                    edge(EdgeType::path_file, pv, fv);
                }
            }
        }
    }

    struct SequenceJob {
        bool                  mined = false;
        std::set<std::string> macro_scopes;
    };

    struct ScopeCounts {
        std::int64_t                          n = 0;
        std::map<std::string, std::int64_t>   users;
        std::map<std::string, std::int64_t>   ips;
    };

    void add_sequences(const BuildInputs& in) {
        std::map<miner::Sequence, SequenceJob> jobs;
        for (const auto& p : in.patterns) {
            jobs[p.commands].mined = true;
        }
        for (const auto& m : in.macros) {
            jobs[m.commands].macro_scopes.insert(m.scope);
        }

        // Inverted index: command text -> sessions containing it.
        std::vector<std::vector<std::string_view>>                           texts(in.sessions.size());
        std::unordered_map<std::string_view, std::vector<std::uint32_t>>     postings;
        for (std::uint32_t s = 0; s < in.sessions.size(); ++s) {
            for (const auto& e : in.sessions[s].events) {
                texts[s].push_back(e.full_text);
                auto& list = postings[e.full_text];
                if (list.empty() || list.back() != s) {
                    list.push_back(s);
                }
            }
        }
        static const std::vector<std::uint32_t> kNone;

        for (const auto& [sequence, job] : jobs) {
            if (sequence.empty()) {
                diagnostics_.push_back("empty sequence in build inputs");
                continue;
            }
            const std::vector<std::uint32_t>* candidates = nullptr;
            for (const auto& c : sequence) {
                const auto  it   = postings.find(c);
                const auto* list = it == postings.end() ? &kNone : &it->second;
                if (candidates == nullptr || list->size() < candidates->size()) {
                    candidates = list;
                }
            }
            std::map<std::string, ScopeCounts> per_scope;
            for (const auto s : *candidates) {
                const auto& session = in.sessions[s];
                if (!job.mined && !job.macro_scopes.contains(session.scope)) {
                    continue;
                }
                if (miner::is_subsequence_with_gap(sequence, texts[s], in.max_gap)) {
                    auto& counts = per_scope[session.scope];
                    ++counts.n;
                    ++counts.users[session.user];
                    ++counts.ips[session.ip];
                }
            }
            for (const auto& scope : job.macro_scopes) {
                per_scope.try_emplace(scope);
            }
            for (const auto& [scope, counts] : per_scope) {
                materialize_sequence(scope, sequence, counts);
            }
        }
    }

    void materialize_sequence(const std::string& scope, const miner::Sequence& sequence, const ScopeCounts& counts) {
        std::vector<std::uint32_t> cmds;
        for (const auto& c : sequence) {
            const auto cv = lookup(cmd_id(scope, c));
            if (!cv) {
                diagnostics_.push_back("sequence in scope '" + scope + "' references unknown command '" + c + "'");
                return;
            }
            cmds.push_back(*cv);
        }
        const auto sv = *lookup(scope_id(scope));  // exists: its commands exist
        const auto qv = vertex(seq_id(scope, sequence), [&](Vertex& v) {
            v.tag      = Tag::seq;
            v.scope    = scope;
            v.sequence = sequence;
        });
        vertices_[qv].n += counts.n;
        edge(EdgeType::scope_seq, sv, qv);
        for (const auto& [user, n] : counts.users) {
            edge(EdgeType::user_seq, *lookup(user_id(user)), qv, n);
        }
        for (const auto& [ip, n] : counts.ips) {
            edge(EdgeType::ip_seq, *lookup(ip_id(ip)), qv, n);
        }
        for (std::size_t i = 0; i < cmds.size(); ++i) {
            edge(EdgeType::seq_cmd, qv, cmds[i], static_cast<std::int64_t>(i + 1));
        }
    }

    std::uint32_t intent_vertex(const std::string& scope, const std::string& intent) {
        return vertex(intent_id(scope, intent), [&](Vertex& v) {
            v.tag   = Tag::intent;
            v.scope = scope;
            v.value = intent;
        });
    }

    void add_macro_intents(std::span<const aggregator::Macro> macros) {
        for (const auto& m : macros) {
            if (m.commands.empty()) {
                continue;  // reported by add_sequences
            }
            const auto qv = lookup(seq_id(m.scope, m.commands));
            if (!qv) {
                continue;  // unknown commands, already diagnosed
            }
            edge(EdgeType::seq_intent, *qv, intent_vertex(m.scope, m.intent));
        }
    }

    void add_labels(std::span<const LabeledCommand> labels) {
        for (const auto& l : labels) {
            const auto cv = lookup(cmd_id(l.scope, l.full_text));
            if (!cv) {
                diagnostics_.push_back("intent label for unknown command '" + l.full_text + "' in scope '" + l.scope + "'");
                continue;
            }
            edge(EdgeType::cmd_intent, *cv, intent_vertex(l.scope, l.label.to_string()));
        }
    }

    std::vector<Vertex>                                   vertices_;
    std::vector<Edge>                                     edges_;
    BuildMetadata                                         metadata_;
    std::unordered_map<std::string, std::uint32_t>        index_;
    std::unordered_map<EdgeKey, std::uint32_t, EdgeKeyHash> edge_index_;
    std::vector<std::string>                              diagnostics_;
};

// Little-endian binary encoding.
class Writer {
  public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        out_.append(s);
    }
    void raw(std::string_view s) { out_.append(s); }
    std::string& bytes() { return out_; }

  private:
    std::string out_;
};

class Reader {
  public:
    explicit Reader(std::string_view in) : in_(in) {}
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(in_[pos_++]);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        }
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        }
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    std::string  str() {
        const auto n = u32();
        need(n);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view raw(std::size_t n) {
        need(n);
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return in_.size() - pos_; }

  private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) {
            throw SnapshotError("snapshot truncated");
        }
    }
    std::string_view in_;
    std::size_t      pos_ = 0;
};

constexpr std::string_view kMagic   = "SHKGSNAP";
constexpr std::uint32_t    kVersion = 1;

}  // namespace

std::string_view tag_name(Tag tag) {
    return kTagNames[static_cast<std::size_t>(tag)];
}

std::string_view edge_type_name(EdgeType type) {
    return kEdgeNames[idx(type)];
}

std::string_view edge_property_name(EdgeType type) {
    return kEdgeProps[idx(type)];
}

Props Vertex::props() const {
    Props p;
    switch (tag) {
    case Tag::cmd:
        p["value"]      = value;
        p["full_value"] = full_value;
        p["n"]          = n;
        break;
    case Tag::seq:
        p["value"] = sequence;
        p["n"]     = n;
        break;
    default:
        p["value"] = value;
        break;
    }
    return p;
}

std::string vertex_id(Tag tag, std::span<const std::string_view> parts) {
    switch (tag) {
    case Tag::scope:
    case Tag::user:
    case Tag::ip:
        if (parts.size() != 1) {
            throw std::invalid_argument("vertex_id: expected one part");
        }
        return std::string(tag_name(tag)) + ":" + std::string(parts[0]);
    default:
        return hashed_id(tag, parts);
    }
}

std::string scope_id(std::string_view scope) {
    const std::array parts{scope};
    return vertex_id(Tag::scope, parts);
}

std::string user_id(std::string_view user) {
    const std::array parts{user};
    return vertex_id(Tag::user, parts);
}

std::string ip_id(std::string_view ip) {
    const std::array parts{ip};
    return vertex_id(Tag::ip, parts);
}

std::string path_id(std::string_view scope, std::string_view path) {
    const std::array parts{scope, path};
    return vertex_id(Tag::path, parts);
}

std::string file_id(std::string_view scope, std::string_view path, std::string_view file) {
    const std::array parts{scope, path, file};
    return vertex_id(Tag::file, parts);
}

std::string cmd_id(std::string_view scope, std::string_view full_text) {
    const std::array parts{scope, full_text};
    return vertex_id(Tag::cmd, parts);
}

std::string seq_id(std::string_view scope, const std::vector<std::string>& commands) {
    std::vector<std::string_view> parts{scope};
    parts.insert(parts.end(), commands.begin(), commands.end());
    return vertex_id(Tag::seq, parts);
}

std::string intent_id(std::string_view scope, std::string_view intent) {
    const std::array parts{scope, intent};
    return vertex_id(Tag::intent, parts);
}

BuildError::BuildError(std::vector<std::string> diagnostics)
  : std::runtime_error([&] {
        std::string message = "graph build failed:";
        for (const auto& d : diagnostics) {
            message += "\n  " + d;
        }
        return message;
    }()),
    diagnostics_(std::move(diagnostics)) {}

KnowledgeGraph::KnowledgeGraph(std::vector<Vertex> vertices, std::vector<Edge> edges, BuildMetadata metadata)
  : vertices_(std::move(vertices)), edges_(std::move(edges)), metadata_(metadata) {
    reindex();
}

KnowledgeGraph::KnowledgeGraph(const KnowledgeGraph& other)
  : vertices_(other.vertices_), edges_(other.edges_), metadata_(other.metadata_) {
    reindex();
}

KnowledgeGraph::KnowledgeGraph(KnowledgeGraph&& other) noexcept
  : vertices_(std::move(other.vertices_)), edges_(std::move(other.edges_)), metadata_(other.metadata_),
    index_(std::move(other.index_)), adjacency_offsets_(std::move(other.adjacency_offsets_)),
    adjacency_(std::move(other.adjacency_)), scopes_(std::move(other.scopes_)), query_count_(other.query_count()) {}

KnowledgeGraph& KnowledgeGraph::operator=(KnowledgeGraph other) noexcept {
    vertices_          = std::move(other.vertices_);
    edges_             = std::move(other.edges_);
    metadata_          = other.metadata_;
    index_             = std::move(other.index_);
    adjacency_offsets_ = std::move(other.adjacency_offsets_);
    adjacency_         = std::move(other.adjacency_);
    scopes_            = std::move(other.scopes_);
    query_count_.store(other.query_count());
    return *this;
}

void KnowledgeGraph::reindex() {
    index_.clear();
    index_.reserve(vertices_.size());
    for (std::uint32_t i = 0; i < vertices_.size(); ++i) {
        index_.emplace(vertices_[i].id, i);
    }

    adjacency_offsets_.assign(vertices_.size() + 1, 0);
    for (const auto& e : edges_) {
        ++adjacency_offsets_[e.from + 1];
        ++adjacency_offsets_[e.to + 1];
    }
    std::partial_sum(adjacency_offsets_.begin(), adjacency_offsets_.end(), adjacency_offsets_.begin());
    adjacency_.assign(adjacency_offsets_.back(), 0);
    std::vector<std::uint32_t> fill(adjacency_offsets_.begin(), adjacency_offsets_.end() - 1);
    for (std::uint32_t i = 0; i < edges_.size(); ++i) {
        adjacency_[fill[edges_[i].from]++] = i;
        adjacency_[fill[edges_[i].to]++]   = i;
    }

    scopes_.clear();
    for (std::uint32_t i = 0; i < vertices_.size(); ++i) {
        if (vertices_[i].tag == Tag::scope) {
            scopes_.try_emplace(vertices_[i].value);
        } else if (vertices_[i].tag == Tag::cmd) {
            scopes_[vertices_[i].scope].commands.push_back(i);
        }
    }
    for (auto& [scope, index] : scopes_) {
        std::sort(index.commands.begin(), index.commands.end(), [&](std::uint32_t a, std::uint32_t b) {
            return std::tie(vertices_[a].value, vertices_[a].full_value) < std::tie(vertices_[b].value, vertices_[b].full_value);
        });
        for (const auto c : index.commands) {
            if (index.values.empty() || index.values.back() != vertices_[c].value) {
                index.values.push_back(vertices_[c].value);
            }
        }
    }
}

std::optional<std::uint32_t> KnowledgeGraph::find(std::string_view id) const {
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::span<const std::uint32_t> KnowledgeGraph::incident_edges(std::uint32_t vertex) const {
    const auto begin = adjacency_offsets_[vertex];
    const auto end   = adjacency_offsets_[vertex + 1];
    return {adjacency_.data() + begin, end - begin};
}

Props KnowledgeGraph::edge_props(const Edge& edge) const {
    Props p;
    const auto name = edge_property_name(edge.type);
    if (!name.empty()) {
        p[std::string(name)] = edge.value;
    }
    return p;
}

std::size_t KnowledgeGraph::count(Tag tag) const {
    return static_cast<std::size_t>(std::count_if(vertices_.begin(), vertices_.end(), [&](const Vertex& v) { return v.tag == tag; }));
}

bool KnowledgeGraph::has_scope(std::string_view scope) const {
    return scopes_.contains(std::string(scope));
}

const std::vector<std::string>& KnowledgeGraph::command_values(std::string_view scope) const {
    static const std::vector<std::string> kEmpty;
    const auto                            it = scopes_.find(std::string(scope));
    return it == scopes_.end() ? kEmpty : it->second.values;
}

std::optional<std::uint32_t> KnowledgeGraph::find_tagged(Tag tag, std::string_view raw) const {
    if (raw.empty()) {
        return std::nullopt;
    }
    const std::array parts{raw};
    return find(vertex_id(tag, parts));
}

std::int64_t KnowledgeGraph::edge_value(std::uint32_t vertex, EdgeType type, std::optional<std::uint32_t> other) const {
    if (!other) {
        return 0;
    }
    for (const auto e : incident_edges(vertex)) {
        const auto& edge = edges_[e];
        if (edge.type == type && (edge.from == *other || edge.to == *other)) {
            return edge.value;
        }
    }
    return 0;
}

std::vector<CommandHit> KnowledgeGraph::query_commands_by_prefix(std::string_view scope,
                                                                 std::string_view value_prefix,
                                                                 std::string_view user,
                                                                 std::string_view ip) const {
    count_query();
    std::vector<CommandHit> hits;
    const auto              it = scopes_.find(std::string(scope));
    if (it == scopes_.end()) {
        return hits;
    }
    const auto& cmds  = it->second.commands;
    auto        first = std::lower_bound(cmds.begin(), cmds.end(), value_prefix, [&](std::uint32_t c, std::string_view p) {
        return vertices_[c].value < p;
    });
    const auto uv = find_tagged(Tag::user, user);
    const auto iv = find_tagged(Tag::ip, ip);
    for (; first != cmds.end() && vertices_[*first].value.starts_with(value_prefix); ++first) {
        hits.push_back(CommandHit{*first, edge_value(*first, EdgeType::user_cmd, uv), edge_value(*first, EdgeType::ip_cmd, iv)});
    }
    return hits;
}

std::vector<CommandHit> KnowledgeGraph::query_commands_by_value(std::string_view scope,
                                                                std::string_view value,
                                                                std::string_view user,
                                                                std::string_view ip) const {
    count_query();
    std::vector<CommandHit> hits;
    const auto              it = scopes_.find(std::string(scope));
    if (it == scopes_.end()) {
        return hits;
    }
    const auto& cmds  = it->second.commands;
    auto        first = std::lower_bound(cmds.begin(), cmds.end(), value, [&](std::uint32_t c, std::string_view v) {
        return vertices_[c].value < v;
    });
    const auto uv = find_tagged(Tag::user, user);
    const auto iv = find_tagged(Tag::ip, ip);
    for (; first != cmds.end() && vertices_[*first].value == value; ++first) {
        hits.push_back(CommandHit{*first, edge_value(*first, EdgeType::user_cmd, uv), edge_value(*first, EdgeType::ip_cmd, iv)});
    }
    return hits;
}

std::vector<CommandHit> KnowledgeGraph::query_commands_execute(std::string_view scope, std::string_view user, std::string_view ip) const {
    return query_commands_by_value(scope, parser::kExecute, user, ip);
}

std::vector<SequenceHit> KnowledgeGraph::query_sequences_by_cmd(std::uint32_t cmd, std::string_view user, std::string_view ip) const {
    count_query();
    std::vector<SequenceHit> rows;
    const auto               uv = find_tagged(Tag::user, user);
    const auto               iv = find_tagged(Tag::ip, ip);
    for (const auto e : incident_edges(cmd)) {
        const auto& edge = edges_[e];
        if (edge.type != EdgeType::seq_cmd || edge.to != cmd) {
            continue;
        }
        rows.push_back(SequenceHit{edge.from, cmd, edge.value, edge_value(edge.from, EdgeType::user_seq, uv),
                                   edge_value(edge.from, EdgeType::ip_seq, iv)});
    }
    return rows;
}

std::vector<SequenceHit> KnowledgeGraph::query_sequences_by_cmd_value(std::string_view scope,
                                                                      std::string_view value,
                                                                      std::string_view user,
                                                                      std::string_view ip) const {
    std::vector<SequenceHit> rows;
    for (const auto& hit : query_commands_by_value(scope, value)) {
        auto more = query_sequences_by_cmd(hit.cmd, user, ip);
        rows.insert(rows.end(), more.begin(), more.end());
    }
    return rows;
}

std::vector<std::uint32_t> KnowledgeGraph::query_commands_by_file(std::string_view scope,
                                                                  std::string_view path,
                                                                  std::string_view file) const {
    count_query();
    std::vector<std::uint32_t> out;
    const auto                 fv = find(file_id(scope, path, file));
    if (!fv) {
        return out;
    }
    for (const auto e : incident_edges(*fv)) {
        if (edges_[e].type == EdgeType::cmd_file) {
            out.push_back(edges_[e].from);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::uint32_t> KnowledgeGraph::query_commands_by_file_via_path(std::string_view scope,
                                                                           std::string_view path,
                                                                           std::string_view file) const {
    count_query();
    std::vector<std::uint32_t> out;
    const auto                 pv = find(path_id(scope, path));
    if (!pv) {
        return out;
    }
    for (const auto e : incident_edges(*pv)) {
        if (edges_[e].type != EdgeType::cmd_path) {
            continue;
        }
        const auto cmd = edges_[e].from;
        for (const auto f : incident_edges(cmd)) {
            const auto& fe = edges_[f];
            if (fe.type == EdgeType::cmd_file && vertices_[fe.to].value == file) {
                out.push_back(cmd);
            }
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool KnowledgeGraph::structurally_equal(const KnowledgeGraph& other) const {
    return vertices_ == other.vertices_ && edges_ == other.edges_;
}

void KnowledgeGraph::check_invariants() const {
    std::vector<std::string> problems;
    const auto               nv = vertices_.size();

    std::vector<std::int64_t> user_sum(nv, 0), ip_sum(nv, 0);
    std::vector<std::vector<std::int64_t>> positions(nv);
    std::vector<char>                      has_intent(nv, 0);
    for (const auto& e : edges_) {
        if (e.from >= nv || e.to >= nv) {
            problems.push_back("edge " + std::string(edge_type_name(e.type)) + " has a dangling endpoint");
            continue;
        }
        const auto [from_tag, to_tag] = kEndpoints[idx(e.type)];
        if (vertices_[e.from].tag != from_tag || vertices_[e.to].tag != to_tag) {
            problems.push_back("edge " + std::string(edge_type_name(e.type)) + " connects " + vertices_[e.from].id + " and " +
                               vertices_[e.to].id + " with wrong tags");
            continue;
        }
        if (is_counted(e.type) && e.value < 1) {
            problems.push_back("counted edge " + std::string(edge_type_name(e.type)) + " with value < 1");
        }
        switch (e.type) {
        case EdgeType::user_cmd:
        case EdgeType::user_seq:
            user_sum[e.to] += e.value;
            break;
        case EdgeType::ip_cmd:
        case EdgeType::ip_seq:
            ip_sum[e.to] += e.value;
            break;
        case EdgeType::seq_cmd: {
            const auto& seq = vertices_[e.from];
            if (e.value < 1 || static_cast<std::size_t>(e.value) > seq.sequence.size() ||
                seq.sequence[static_cast<std::size_t>(e.value - 1)] != vertices_[e.to].full_value) {
                problems.push_back("seq_cmd edge of " + seq.id + " has inconsistent position " + std::to_string(e.value));
            } else {
                positions[e.from].push_back(e.value);
            }
            break;
        }
        case EdgeType::seq_intent:
            has_intent[e.from] = 1;
            break;
        default:
            break;
        }
    }
    for (std::size_t i = 0; i < nv; ++i) {
        const auto& v = vertices_[i];
        if (v.tag == Tag::cmd) {
            if (v.n < 1) {
                problems.push_back("cmd " + v.id + " has n < 1");
            }
            if (v.n != user_sum[i] || v.n != ip_sum[i]) {
                problems.push_back("cmd " + v.id + ": n=" + std::to_string(v.n) + " but user sum " + std::to_string(user_sum[i]) +
                                   ", IP sum " + std::to_string(ip_sum[i]));
            }
        } else if (v.tag == Tag::seq) {
            if (v.n < 1 && !has_intent[i]) {
                problems.push_back("mined seq " + v.id + " has n < 1");
            }
            if (v.n != user_sum[i] || v.n != ip_sum[i]) {
                problems.push_back("seq " + v.id + ": n=" + std::to_string(v.n) + " but user sum " + std::to_string(user_sum[i]) +
                                   ", IP sum " + std::to_string(ip_sum[i]));
            }
            auto covered = positions[i];
            std::sort(covered.begin(), covered.end());
            covered.erase(std::unique(covered.begin(), covered.end()), covered.end());
            if (covered.size() != v.sequence.size()) {
                problems.push_back("seq " + v.id + " does not cover all of its positions");
            }
        }
    }
    if (!problems.empty()) {
        throw BuildError(std::move(problems));
    }
}

std::vector<LabeledCommand> label_commands(const std::vector<parser::Session>& sessions, const std::vector<intents::IntentRule>& rules) {
    std::map<std::pair<std::string, std::string>, const parser::ParsedCommand*> distinct;
    for (const auto& s : sessions) {
        for (const auto& e : s.events) {
            distinct.try_emplace({s.scope, e.full_text}, &e);
        }
    }
    std::vector<LabeledCommand> out;
    for (const auto& [key, cmd] : distinct) {
        if (auto label = intents::classify(*cmd, rules)) {
            out.push_back(LabeledCommand{key.first, key.second, std::move(*label)});
        }
    }
    return out;
}

KnowledgeGraph build(const BuildInputs& inputs) {
    GraphBuilder builder(nullptr);
    builder.populate(inputs);
    return builder.finish();
}

KnowledgeGraph apply_update(const KnowledgeGraph& base, const BuildInputs& delta) {
    GraphBuilder builder(&base);
    builder.populate(delta);
    return builder.finish();
}

std::string snapshot_serialize(const KnowledgeGraph& graph) {
    Writer w;
    w.raw(kMagic);
    w.u32(kVersion);
    w.u64(graph.metadata().corpus_hash);
    w.u64(graph.metadata().config_hash);
    w.i64(graph.metadata().build_timestamp);
    w.u64(graph.vertices().size());
    for (const auto& v : graph.vertices()) {
        w.u8(static_cast<std::uint8_t>(v.tag));
        w.str(v.id);
        w.str(v.scope);
        w.str(v.value);
        w.str(v.full_value);
        w.i64(v.n);
        w.u32(static_cast<std::uint32_t>(v.sequence.size()));
        for (const auto& c : v.sequence) {
            w.str(c);
        }
    }
    w.u64(graph.edges().size());
    for (const auto& e : graph.edges()) {
        w.u8(static_cast<std::uint8_t>(e.type));
        w.u32(e.from);
        w.u32(e.to);
        w.i64(e.value);
    }
    const auto checksum = StableHasher{}.add_raw(w.bytes()).value();
    w.u64(checksum);
    return std::move(w.bytes());
}

KnowledgeGraph snapshot_deserialize(std::string_view bytes) {
    if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
        throw SnapshotError("not a graph snapshot (bad magic)");
    }
    const auto body = bytes.substr(0, bytes.size() - 8);
    Reader     tail(bytes.substr(bytes.size() - 8));
    if (tail.u64() != StableHasher{}.add_raw(body).value()) {
        throw SnapshotError("snapshot checksum mismatch");
    }
    Reader r(body);
    r.raw(kMagic.size());
    if (const auto version = r.u32(); version != kVersion) {
        throw SnapshotError("unsupported snapshot version " + std::to_string(version));
    }
    BuildMetadata meta;
    meta.corpus_hash     = r.u64();
    meta.config_hash     = r.u64();
    meta.build_timestamp = r.i64();

    const auto nv = r.u64();
    if (nv > r.remaining()) {
        throw SnapshotError("vertex count exceeds snapshot size");
    }
    std::vector<Vertex> vertices(nv);
    for (auto& v : vertices) {
        const auto tag = r.u8();
        if (tag >= kTagNames.size()) {
            throw SnapshotError("invalid vertex tag");
        }
        v.tag        = static_cast<Tag>(tag);
        v.id         = r.str();
        v.scope      = r.str();
        v.value      = r.str();
        v.full_value = r.str();
        v.n          = r.i64();
        const auto k = r.u32();
        if (k > r.remaining()) {
            throw SnapshotError("sequence length exceeds snapshot size");
        }
        v.sequence.resize(k);
        for (auto& c : v.sequence) {
            c = r.str();
        }
    }
    const auto ne = r.u64();
    if (ne > r.remaining()) {
        throw SnapshotError("edge count exceeds snapshot size");
    }
    std::vector<Edge> edges(ne);
    for (auto& e : edges) {
        const auto type = r.u8();
        if (type >= kEdgeTypeCount) {
            throw SnapshotError("invalid edge type");
        }
        e.type  = static_cast<EdgeType>(type);
        e.from  = r.u32();
        e.to    = r.u32();
        e.value = r.i64();
        if (e.from >= nv || e.to >= nv) {
            throw SnapshotError("edge references a missing vertex");
        }
    }
    if (r.remaining() != 0) {
        throw SnapshotError("trailing bytes in snapshot");
    }
    return KnowledgeGraph(std::move(vertices), std::move(edges), meta);
}

void snapshot_save(const KnowledgeGraph& graph, const std::filesystem::path& path) {
    const auto bytes = snapshot_serialize(graph);
    auto       tmp   = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw SnapshotError("cannot write snapshot " + tmp.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw SnapshotError("failed writing snapshot " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

KnowledgeGraph snapshot_load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SnapshotError("cannot open snapshot " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return snapshot_deserialize(buffer.str());
}

}  // namespace shellkg::graph
