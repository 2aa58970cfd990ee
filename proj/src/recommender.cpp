#include "shellkg/recommender.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace shellkg::recommender {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string_view first_token(std::string_view s) {
    s = trim(s);
    return s.substr(0, s.find_first_of(" \t"));
}

std::vector<std::uint16_t> bigrams(std::string_view s) {
    std::vector<std::uint16_t> out;
    if (s.size() < 2) {
        return out;
    }
    out.reserve(s.size() - 1);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        out.push_back(static_cast<std::uint16_t>(static_cast<unsigned char>(s[i]) << 8 | static_cast<unsigned char>(s[i + 1])));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Dice over pre-sorted bigram multisets.
double dice_sorted(std::string_view a, const std::vector<std::uint16_t>& ba, std::string_view b, const std::vector<std::uint16_t>& bb) {
    if (a.size() < 2 || b.size() < 2) {
        return a == b ? 1.0 : 0.0;
    }
    std::size_t shared = 0;
    auto        i      = ba.begin();
    auto        j      = bb.begin();
    while (i != ba.end() && j != bb.end()) {
        if (*i < *j) {
            ++i;
        } else if (*j < *i) {
            ++j;
        } else {
            ++shared;
            ++i;
            ++j;
        }
    }
    return 2.0 * static_cast<double>(shared) / static_cast<double>(ba.size() + bb.size());
}

void read_quad(const nlohmann::json& j, WeightQuad& q) {
    q.sim  = j.value("sim", q.sim);
    q.user = j.value("user", q.user);
    q.ip   = j.value("ip", q.ip);
    q.freq = j.value("freq", q.freq);
}

// Divides each value by the pool maximum; an all-zero pool stays zero.
std::vector<double> normalize(const std::vector<double>& raw) {
    double max = 0.0;
    for (const double v : raw) {
        max = std::max(max, v);
    }
    std::vector<double> out(raw.size(), 0.0);
    if (max > 0.0) {
        for (std::size_t i = 0; i < raw.size(); ++i) {
            out[i] = raw[i] / max;
        }
    }
    return out;
}

}  // namespace

void WeightQuad::validate() const {
    for (const double w : {sim, user, ip, freq}) {
        if (!(w >= 0.0 && w <= 1.0)) {
            throw std::invalid_argument("weights must lie in [0, 1]");
        }
    }
    if (std::abs(sim + user + ip + freq - 1.0) > 1e-9) {
        throw std::invalid_argument("weights must sum to 1");
    }
}

void Weights::validate() const {
    command.validate();
    sequence.validate();
}

Weights parse_weights(std::string_view json_text) {
    const auto j = nlohmann::json::parse(json_text);
    Weights    w;
    if (j.contains("command")) {
        read_quad(j.at("command"), w.command);
    }
    if (j.contains("sequence")) {
        read_quad(j.at("sequence"), w.sequence);
    }
    w.validate();
    return w;
}

Weights load_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        return Weights{};
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_weights(buffer.str());
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("weights file " + path.string() + ": " + e.what());
    }
}

double combine(const WeightQuad& w, const Components& c) {
    return w.sim * c.sim + w.user * c.user + w.ip * c.ip + w.freq * c.freq;
}

double dice_similarity(std::string_view a, std::string_view b) {
    return dice_sorted(a, bigrams(a), b, bigrams(b));
}

double jaccard_similarity_cmd(std::string_view a, std::string_view b) {
    const auto ta = parser::tokenize(a);
    const auto tb = parser::tokenize(b);
    const std::set<std::string> sa(ta.begin(), ta.end());
    const std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) {
        return 1.0;
    }
    std::size_t common = 0;
    for (const auto& t : sa) {
        common += sb.count(t);
    }
    return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        prev[j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j]                = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        prev.swap(cur);
    }
    return prev[b.size()];
}

std::optional<std::string> correct_typo(std::string_view token, const std::vector<std::string>& known_values) {
    const std::string* best = nullptr;
    std::size_t        best_dist = 0;
    std::size_t        best_len  = 0;
    for (const auto& v : known_values) {
        const auto dist = levenshtein(token, v);
        const auto len  = v.size() > token.size() ? v.size() - token.size() : token.size() - v.size();
        if (best == nullptr || std::tie(dist, len, v) < std::tie(best_dist, best_len, *best)) {
            best      = &v;
            best_dist = dist;
            best_len  = len;
        }
    }
    if (best == nullptr) {
        return std::nullopt;
    }
    return *best;
}

std::optional<std::string> resolve_value(std::string_view token, const std::vector<std::string>& sorted_known_values) {
    const auto it = std::lower_bound(sorted_known_values.begin(), sorted_known_values.end(), token);
    if (it != sorted_known_values.end() && std::string_view(*it).starts_with(token)) {
        return std::string(token);
    }
    return correct_typo(token, sorted_known_values);
}

void CommandRequest::validate() const {
    if (trim(partial).empty()) {
        throw std::invalid_argument("partial must not be empty");
    }
    if (top_n == 0) {
        throw std::invalid_argument("n must be positive");
    }
}

void SequenceRequest::validate() const {
    if (trim(command).empty()) {
        throw std::invalid_argument("command must not be empty");
    }
    if (top_n == 0) {
        throw std::invalid_argument("n must be positive");
    }
}

std::vector<ScoredCommand> rank_commands(std::string_view                     partial,
                                         const std::vector<CommandCandidate>& candidates,
                                         const WeightQuad&                    weights,
                                         std::size_t                          top_n) {
    const auto          pb = bigrams(partial);
    std::vector<double> sim, user, ip, freq;
    sim.reserve(candidates.size());
    for (const auto& c : candidates) {
        sim.push_back(dice_sorted(partial, pb, c.full_value, bigrams(c.full_value)));
        user.push_back(static_cast<double>(c.user_n));
        ip.push_back(static_cast<double>(c.ip_n));
        freq.push_back(static_cast<double>(c.n));
    }
    sim  = normalize(sim);
    user = normalize(user);
    ip   = normalize(ip);
    freq = normalize(freq);

    std::vector<ScoredCommand> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        ScoredCommand s;
        s.command    = candidates[i].full_value;
        s.components = Components{sim[i], user[i], ip[i], freq[i]};
        s.score      = combine(weights, s.components);
        s.n          = candidates[i].n;
        out.push_back(std::move(s));
    }
    const auto better = [](const ScoredCommand& a, const ScoredCommand& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.n != b.n) {
            return a.n > b.n;
        }
        return a.command < b.command;
    };
    if (out.size() > top_n) {
        std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(top_n), out.end(), better);
        out.resize(top_n);
    } else {
        std::sort(out.begin(), out.end(), better);
    }
    return out;
}

CommandCache::Key CommandCache::key_of(const CommandRequest& req) {
    std::string key;
    for (const auto* part : {&req.user, &req.ip, &req.scope}) {
        key += std::to_string(part->size());
        key += ':';
        key += *part;
    }
    return key;
}

std::optional<CommandCache::Entry> CommandCache::lookup(const CommandRequest& req, std::string_view resolved_value, std::uint64_t generation) {
    const auto            key = key_of(req);
    const std::lock_guard lock(mutex_);
    const auto            it = slots_.find(key);
    if (it == slots_.end()) {
        return std::nullopt;
    }
    const auto& entry = it->second->second;
    if (entry.generation != generation || entry.resolved_value != resolved_value) {
        return std::nullopt;
    }
    lru_.splice(lru_.begin(), lru_, it->second);
    return entry;
}

void CommandCache::store(const CommandRequest& req, Entry entry) {
    if (capacity_ == 0) {
        return;
    }
    auto                  key = key_of(req);
    const std::lock_guard lock(mutex_);
    if (const auto it = slots_.find(key); it != slots_.end()) {
        it->second->second = std::move(entry);
        lru_.splice(lru_.begin(), lru_, it->second);
        return;
    }
    lru_.emplace_front(key, std::move(entry));
    slots_.emplace(std::move(key), lru_.begin());
    while (lru_.size() > capacity_) {
        slots_.erase(lru_.back().first);
        lru_.pop_back();
    }
}

void CommandCache::clear() {
    const std::lock_guard lock(mutex_);
    lru_.clear();
    slots_.clear();
}

std::size_t CommandCache::size() const {
    const std::lock_guard lock(mutex_);
    return lru_.size();
}

CommandResponse recommend_commands(const CommandRequest&        req,
                                   const graph::KnowledgeGraph& graph,
                                   const Weights&               weights,
                                   CommandCache*                cache,
                                   std::uint64_t                generation) {
    req.validate();
    CommandResponse response;
    if (!graph.has_scope(req.scope)) {
        response.unknown_scope = true;
        return response;
    }
    const auto partial = trim(req.partial);
    const auto token   = first_token(partial);

    std::optional<std::string> resolved;
    if (parser::is_path_prefixed(token)) {
        resolved = std::string(parser::kExecute);
    } else {
        resolved = resolve_value(token, graph.command_values(req.scope));
    }
    if (!resolved) {
        return response;
    }
    response.resolved_value = *resolved;

    std::vector<CommandCandidate> candidates;
    if (cache != nullptr) {
        if (auto hit = cache->lookup(req, *resolved, generation)) {
            response.cached = true;
            candidates      = std::move(hit->candidates);
        }
    }
    if (!response.cached) {
        const auto hits = *resolved == parser::kExecute && parser::is_path_prefixed(token)
                              ? graph.query_commands_execute(req.scope, req.user, req.ip)
                              : graph.query_commands_by_prefix(req.scope, *resolved, req.user, req.ip);
        candidates.reserve(hits.size());
        for (const auto& h : hits) {
            const auto& v = graph.vertex(h.cmd);
            candidates.push_back(CommandCandidate{v.full_value, h.user_n, h.ip_n, v.n});
        }
        if (cache != nullptr) {
            cache->store(req, CommandCache::Entry{generation, *resolved, candidates});
        }
    }
    response.candidates = rank_commands(partial, candidates, weights.command, req.top_n);
    return response;
}

SequenceResponse recommend_sequences(const SequenceRequest&       req,
                                     const graph::KnowledgeGraph& graph,
                                     const Weights&               weights,
                                     const parser::ParseConfig&   cfg) {
    req.validate();
    SequenceResponse response;
    if (!graph.has_scope(req.scope)) {
        response.unknown_scope = true;
        return response;
    }
    const auto        text = trim(req.command);
    const std::string cwd  = req.cwd.value_or("/home/" + req.user);

    std::string                cmd_type(first_token(text));
    std::string                normalized(text);
    std::optional<std::string> path;
    std::optional<std::string> file;
    const auto result = parser::normalize_command(text, cwd, cfg, req.user);
    if (const auto* parsed = std::get_if<parser::ParsedCommand>(&result)) {
        cmd_type   = parsed->cmd_type;
        normalized = parsed->full_text;
        path       = parsed->path;
        file       = parsed->file;
    }

    // Rows keyed by (seq, position); the file strategy may reach the same row twice.
    std::map<std::pair<std::uint32_t, std::int64_t>, graph::SequenceHit> rows;
    for (const auto& row : graph.query_sequences_by_cmd_value(req.scope, cmd_type, req.user, req.ip)) {
        rows.try_emplace({row.seq, row.position}, row);
    }
    if (path && file) {
        for (const auto cmd : graph.query_commands_by_file(req.scope, *path, *file)) {
            for (const auto& row : graph.query_sequences_by_cmd(cmd, req.user, req.ip)) {
                rows.try_emplace({row.seq, row.position}, row);
            }
        }
    }

    std::vector<const graph::SequenceHit*> kept;
    std::vector<double>                    sim, user, ip, freq;
    for (const auto& [key, row] : rows) {
        const auto& seq = graph.vertex(row.seq);
        if (static_cast<std::size_t>(row.position) >= seq.sequence.size()) {
            continue;  // entry is the last command: nothing to continue with
        }
        kept.push_back(&row);
        sim.push_back(jaccard_similarity_cmd(normalized, graph.vertex(row.entry).full_value));
        user.push_back(static_cast<double>(row.user_n));
        ip.push_back(static_cast<double>(row.ip_n));
        freq.push_back(static_cast<double>(seq.n));
    }
    sim  = normalize(sim);
    user = normalize(user);
    ip   = normalize(ip);
    freq = normalize(freq);

    std::map<std::vector<std::string>, ScoredSequence> best;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto&    seq = graph.vertex(kept[i]->seq);
        ScoredSequence s;
        s.suffix.assign(seq.sequence.begin() + kept[i]->position, seq.sequence.end());
        s.components = Components{sim[i], user[i], ip[i], freq[i]};
        s.score      = combine(weights.sequence, s.components);
        s.n          = seq.n;
        auto [it, inserted] = best.try_emplace(s.suffix, s);
        if (!inserted && std::tie(s.score, s.n) > std::tie(it->second.score, it->second.n)) {
            it->second = std::move(s);
        }
    }
    for (auto& [suffix, s] : best) {
        response.candidates.push_back(std::move(s));
    }
    std::sort(response.candidates.begin(), response.candidates.end(), [](const ScoredSequence& a, const ScoredSequence& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.n != b.n) {
            return a.n > b.n;
        }
        return a.suffix < b.suffix;
    });
    if (response.candidates.size() > req.top_n) {
        response.candidates.resize(req.top_n);
    }
    return response;
}

}  // namespace shellkg::recommender
