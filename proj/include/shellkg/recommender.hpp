#pragma once

#include "shellkg/graph.hpp"
#include "shellkg/parser.hpp"

#include <cstdint>
#include <filesystem>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace shellkg::recommender {

/// Weights of the similarity, user, IP and overall frequency terms.
struct WeightQuad {
    double sim  = 0.25;
    double user = 0.25;
    double ip   = 0.25;
    double freq = 0.25;

    bool operator==(const WeightQuad&) const = default;

    /// Throws std::invalid_argument unless every weight is in [0, 1] and the
    /// four sum to 1 within 1e-9.
    void validate() const;
};

struct Weights {
    WeightQuad command;
    WeightQuad sequence;

    bool operator==(const Weights&) const = default;
    void validate() const;
};

/// JSON {"command": {sim, user, ip, freq}, "sequence": {...}}; omitted
/// sections keep the defaults. A missing file yields the defaults.
Weights load_weights(const std::filesystem::path& path);
Weights parse_weights(std::string_view json_text);

struct Components {
    double sim  = 0.0;
    double user = 0.0;
    double ip   = 0.0;
    double freq = 0.0;

    bool operator==(const Components&) const = default;
};

double combine(const WeightQuad& w, const Components& c);

/// Bigram multiset Dice coefficient over raw characters. Strings shorter than
/// two characters score 1 when equal and 0 otherwise.
double dice_similarity(std::string_view a, std::string_view b);

/// |A ∩ B| / |A ∪ B| over tokenize() sets; two empty sets score 1.
double jaccard_similarity_cmd(std::string_view a, std::string_view b);

std::size_t levenshtein(std::string_view a, std::string_view b);

/// Known value closest to `token` by edit distance; ties go to the smaller
/// length difference, then lexicographic order. nullopt for an empty set.
std::optional<std::string> correct_typo(std::string_view token, const std::vector<std::string>& known_values);

/// Command value the first token of a partial command resolves to: the token
/// itself when it equals or prefixes a known value, otherwise its correction.
std::optional<std::string> resolve_value(std::string_view first_token, const std::vector<std::string>& sorted_known_values);

struct CommandRequest {
    std::string partial;
    std::string user;
    std::string ip;
    std::string scope;
    std::size_t top_n = 5;

    /// Throws std::invalid_argument on an empty partial or top_n == 0.
    void validate() const;
};

struct SequenceRequest {
    std::string                command;
    std::string                user;
    std::string                ip;
    std::string                scope;
    std::size_t                top_n = 5;
    std::optional<std::string> cwd;  // resolves relative files; default /home/<user>

    void validate() const;
};

/// Raw retrieval row for one candidate command.
struct CommandCandidate {
    std::string  full_value;
    std::int64_t user_n = 0;
    std::int64_t ip_n   = 0;
    std::int64_t n      = 0;
};

struct ScoredCommand {
    std::string  command;
    Components   components;
    double       score = 0.0;
    std::int64_t n     = 0;

    bool operator==(const ScoredCommand&) const = default;
};

struct ScoredSequence {
    std::vector<std::string> suffix;
    Components               components;
    double                   score = 0.0;
    std::int64_t             n     = 0;

    bool operator==(const ScoredSequence&) const = default;
};

/// Max-normalizes the four terms, scores and sorts by (score desc, n desc,
/// command), truncated to top_n.
std::vector<ScoredCommand> rank_commands(std::string_view                     partial,
                                         const std::vector<CommandCandidate>& candidates,
                                         const WeightQuad&                    weights,
                                         std::size_t                          top_n);

/// Per-(user, IP, scope) LRU of retrieval results. Entries carry the snapshot
/// generation they were computed on, so stale entries never hit.
class CommandCache {
  public:
    explicit CommandCache(std::size_t capacity = 1024) : capacity_(capacity) {}

    struct Entry {
        std::uint64_t                 generation = 0;
        std::string                   resolved_value;
        std::vector<CommandCandidate> candidates;
    };

    std::optional<Entry> lookup(const CommandRequest& req, std::string_view resolved_value, std::uint64_t generation);
    void                 store(const CommandRequest& req, Entry entry);
    void                 clear();
    std::size_t          size() const;

  private:
    using Key = std::string;
    static Key key_of(const CommandRequest& req);

    std::size_t                                                                     capacity_;
    mutable std::mutex                                                              mutex_;
    std::list<std::pair<Key, Entry>>                                                lru_;  // front = most recent
    std::unordered_map<Key, std::list<std::pair<Key, Entry>>::iterator>             slots_;
};

struct CommandResponse {
    std::vector<ScoredCommand> candidates;
    std::string                resolved_value;  // empty when nothing resolved
    bool                       cached        = false;
    bool                       unknown_scope = false;
};

struct SequenceResponse {
    std::vector<ScoredSequence> candidates;
    bool                        unknown_scope = false;
};

CommandResponse recommend_commands(const CommandRequest&        req,
                                   const graph::KnowledgeGraph& graph,
                                   const Weights&               weights,
                                   CommandCache*                cache      = nullptr,
                                   std::uint64_t                generation = 0);

SequenceResponse recommend_sequences(const SequenceRequest&       req,
                                     const graph::KnowledgeGraph& graph,
                                     const Weights&               weights,
                                     const parser::ParseConfig&   cfg = parser::default_parse_config());

}  // namespace shellkg::recommender
