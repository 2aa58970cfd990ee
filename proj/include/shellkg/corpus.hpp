#pragma once

#include "shellkg/miner.hpp"
#include "shellkg/parser.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace shellkg::corpus {

/// Synthetic labeled shell corpus with planted operations of known support.
struct CorpusConfig {
    std::uint64_t seed            = 42;
    std::size_t   scopes          = 3;
    std::size_t   users           = 8;
    std::size_t   ips             = 12;
    std::size_t   sessions        = 300;
    std::size_t   min_session_len = 3;
    std::size_t   max_session_len = 12;
    std::size_t   planted         = 5;
    std::size_t   plant_min_support = 10;
    std::size_t   plant_max_support = 25;
    std::size_t   plant_min_len   = 2;
    std::size_t   plant_max_len   = 5;
    double        cd_rate         = 0.12;  // chance a noise slot is a relative cd
    double        error_rate      = 0.05;  // chance of a mistyped or malformed command
    double        rare_rate       = 0.03;  // chance of a one-off command
    bool          demo_scope      = true;  // adds OnlineServiceRLX with its restart operation
    std::int64_t  start_ts        = 1'700'000'000'000;

    void validate() const;
};

struct PlantedSequence {
    std::string              scope;
    std::vector<std::string> commands;  // normalized full texts
    std::size_t              support = 0;  // sessions the operation was planted in
};

struct Corpus {
    std::vector<parser::RawEvent>      events;
    std::vector<PlantedSequence>       planted;
    /// Intended intent of every generated template command, by normalized text.
    std::map<std::string, std::string> intents;
};

/// Deterministic for a given config.
Corpus generate(const CorpusConfig& cfg);

inline constexpr std::string_view kDemoScope = "OnlineServiceRLX";

/// Normalized texts of the demo restart operation and its stop-check variant.
std::vector<std::string> demo_restart_sequence();
std::vector<std::string> demo_check_stop_sequence();

/// Processed sessions plus sequences for load testing, built without mining.
struct ScaleCorpus {
    std::vector<parser::Session>         sessions;
    std::vector<miner::SequencePattern>  patterns;
};

ScaleCorpus generate_scale(std::uint64_t seed, std::size_t min_commands, std::size_t min_sequences, std::size_t scopes = 2);

}  // namespace shellkg::corpus
