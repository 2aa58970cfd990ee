#pragma once

#include "shellkg/parser.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace shellkg::intents {

inline constexpr std::array<std::string_view, 8> kIntentNames = {
    "log_analysis",     "config_analysis",  "process_analysis", "crontab_analysis",
    "storage_analysis", "network_analysis", "execute_script",   "code_analysis",
};

enum class ParameterKind {
    none,          // storage_analysis, network_analysis
    file_name,     // required: the accessed file
    process_name,  // optional: bound when the command names a process
};

/// Parameter declared by an intent's template, e.g. "log_analysis fileName".
ParameterKind parameter_kind(std::string_view intent_name);

bool is_intent_name(std::string_view name);

struct IntentRule {
    std::string              intent_name;
    std::set<std::string>    command_set;         // empty = any cmd_type
    std::vector<std::string> extension_patterns;  // e.g. ".log"
    std::vector<std::string> path_patterns;       // substrings of "<path>/", e.g. "/logdir/"

    /// Throws std::invalid_argument for an unknown intent name.
    void validate() const;
};

struct IntentLabel {
    std::string                intent_name;
    std::optional<std::string> parameter;

    bool operator==(const IntentLabel&) const = default;

    /// "log_analysis run.log", or the bare name without a parameter.
    [[nodiscard]] std::string to_string() const;
};

/// Whether `rule` fires for `cmd`, ignoring priority.
bool rule_matches(const IntentRule& rule, const parser::ParsedCommand& cmd);

/// First matching rule in list order wins; nullopt means Unclear.
std::optional<IntentLabel> classify(const parser::ParsedCommand& cmd, const std::vector<IntentRule>& rules);

struct DistributionReport {
    std::size_t                        total = 0;
    std::map<std::string, std::size_t> counts;      // intent name -> commands
    std::size_t                        unclear = 0;
    std::map<std::string, double>      percentages;  // includes "unclear"
};

DistributionReport classify_corpus(const std::vector<parser::ParsedCommand>& commands, const std::vector<IntentRule>& rules);

/// Shipped defaults in priority order: execute_script, crontab, process,
/// network, storage, log, config, code.
std::vector<IntentRule> default_rules();

/// Newline-delimited {intent, commands: [...], extensions: [...], paths: [...]}.
std::vector<IntentRule> load_rules(const std::filesystem::path& path);
std::vector<IntentRule> parse_rules(std::string_view text);
std::string             dump_rules(const std::vector<IntentRule>& rules);

}  // namespace shellkg::intents
