#pragma once

#include "shellkg/aggregator.hpp"
#include "shellkg/graph.hpp"
#include "shellkg/miner.hpp"
#include "shellkg/parser.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace shellkg::parser {
void to_json(nlohmann::json& j, const RawEvent& e);
void from_json(const nlohmann::json& j, RawEvent& e);
void to_json(nlohmann::json& j, const ParsedCommand& c);
void from_json(const nlohmann::json& j, ParsedCommand& c);
void to_json(nlohmann::json& j, const Session& s);
void from_json(const nlohmann::json& j, Session& s);
}  // namespace shellkg::parser

namespace shellkg::miner {
void to_json(nlohmann::json& j, const SequencePattern& p);
void from_json(const nlohmann::json& j, SequencePattern& p);
}  // namespace shellkg::miner

namespace shellkg::graph {
void to_json(nlohmann::json& j, const LabeledCommand& l);
void from_json(const nlohmann::json& j, LabeledCommand& l);
}  // namespace shellkg::graph

namespace shellkg::io {

/// One JSON value per line; blank lines are skipped. Parse errors name the line.
template <typename T>
std::vector<T> read_ndjson(const std::filesystem::path& path);

template <typename T>
void write_ndjson(const std::filesystem::path& path, const std::vector<T>& items);

std::vector<nlohmann::json> read_ndjson_values(const std::filesystem::path& path);
void                        write_ndjson_values(const std::filesystem::path& path, const std::vector<nlohmann::json>& values);

template <typename T>
std::vector<T> read_ndjson(const std::filesystem::path& path) {
    std::vector<T> out;
    std::size_t    line = 0;
    for (const auto& value : read_ndjson_values(path)) {
        ++line;
        try {
            out.push_back(value.get<T>());
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path.string() + ": record " + std::to_string(line) + ": " + e.what());
        }
    }
    return out;
}

template <typename T>
void write_ndjson(const std::filesystem::path& path, const std::vector<T>& items) {
    std::vector<nlohmann::json> values;
    values.reserve(items.size());
    for (const auto& item : items) {
        values.emplace_back(item);
    }
    write_ndjson_values(path, values);
}

}  // namespace shellkg::io
