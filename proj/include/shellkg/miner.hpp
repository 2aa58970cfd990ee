#pragma once

#include "shellkg/parser.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace shellkg::miner {

using Sequence = std::vector<std::string>;

struct MiningConfig {
    double      theta            = 1.0;  // minimum frequency, (0, 1]
    std::size_t max_gap          = 5;
    std::size_t min_size         = 2;
    std::size_t max_size         = 20;
    std::size_t min_users        = 1;
    std::size_t min_days         = 1;
    double      redundancy_r     = 0.8;
    bool        collapse_repeats = true;
    std::size_t threads          = 0;  // 0 = hardware concurrency

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

/// Defaults of the reference run: sequences seen in at least two sessions,
/// sizes 2..20, maximum gap 5.
MiningConfig default_mining_config(std::size_t dataset_size);

struct SequencePattern {
    Sequence    commands;
    std::size_t support    = 0;
    double      frequency  = 0.0;
    std::size_t user_count = 0;
    std::size_t day_count  = 0;

    bool operator==(const SequencePattern&) const = default;
};

/// True iff `a` embeds into `b` at strictly increasing positions whose
/// consecutive distance never exceeds `g`.
template <typename A, typename B>
bool is_subsequence_with_gap(const A& a, const B& b, std::size_t g) {
    const std::size_t k = a.size();
    const std::size_t n = b.size();
    if (k == 0) {
        return true;
    }
    if (k > n) {
        return false;
    }
    std::vector<char> reach(n, 0);
    std::vector<char> next(n, 0);
    bool              any = false;
    for (std::size_t r = 0; r < n; ++r) {
        reach[r] = b[r] == a[0];
        any      = any || reach[r];
    }
    for (std::size_t j = 1; j < k && any; ++j) {
        any                 = false;
        std::ptrdiff_t last = -1;  // last reachable position before r
        for (std::size_t r = 0; r < n; ++r) {
            next[r] = last >= 0 && static_cast<std::size_t>(static_cast<std::ptrdiff_t>(r) - last) <= g && b[r] == a[j];
            any     = any || next[r];
            if (reach[r]) {
                last = static_cast<std::ptrdiff_t>(r);
            }
        }
        reach.swap(next);
    }
    return any;
}

/// Command texts of a session, in execution order.
std::vector<std::string> commands_of(const parser::Session& session);

/// Number of sessions (not occurrences) containing `s` w.r.t. gap `g`.
std::size_t support(const std::vector<parser::Session>& dataset, const Sequence& s, std::size_t g);

/// Smallest session count whose frequency reaches `theta`.
std::size_t min_support_count(double theta, std::size_t dataset_size);

/// All sequences with frequency >= theta and size in [min_size, max_size],
/// with exact supports and user/day counts. Sorted by sort_patterns order.
std::vector<SequencePattern> mine(const std::vector<parser::Session>& dataset, const MiningConfig& cfg);

/// User/day thresholds, consecutive-repeat collapse and the redundancy filter.
std::vector<SequencePattern> post_filter(std::vector<SequencePattern>        patterns,
                                         const std::vector<parser::Session>& dataset,
                                         const MiningConfig&                 cfg);

/// Support descending, length descending, then lexicographic.
void sort_patterns(std::vector<SequencePattern>& patterns);

}  // namespace shellkg::miner
