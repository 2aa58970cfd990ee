#include "shellkg/io.hpp"

#include <fstream>
#include <stdexcept>

namespace shellkg::parser {

void to_json(nlohmann::json& j, const RawEvent& e) {
    j = nlohmann::json{{"command", e.command}, {"scope", e.scope}, {"user", e.user}, {"ts", e.ts}};
}

void from_json(const nlohmann::json& j, RawEvent& e) {
    j.at("command").get_to(e.command);
    j.at("scope").get_to(e.scope);
    j.at("user").get_to(e.user);
    j.at("ts").get_to(e.ts);
}

void to_json(nlohmann::json& j, const ParsedCommand& c) {
    j = nlohmann::json{{"cmd_type", c.cmd_type}, {"full_text", c.full_text}, {"ts", c.ts}};
    if (c.path) {
        j["path"] = *c.path;
    }
    if (c.file) {
        j["file"] = *c.file;
    }
}

void from_json(const nlohmann::json& j, ParsedCommand& c) {
    j.at("cmd_type").get_to(c.cmd_type);
    j.at("full_text").get_to(c.full_text);
    j.at("ts").get_to(c.ts);
    c.path.reset();
    c.file.reset();
    if (j.contains("path")) {
        c.path = j.at("path").get<std::string>();
    }
    if (j.contains("file")) {
        c.file = j.at("file").get<std::string>();
    }
    c.day = utc_day(c.ts);
}

void to_json(nlohmann::json& j, const Session& s) {
    j = nlohmann::json{{"session_id", s.session_id}, {"ip", s.ip},         {"scope", s.scope},
                       {"user", s.user},             {"start_ts", s.start_ts}, {"end_ts", s.end_ts},
                       {"commands", s.events}};
}

void from_json(const nlohmann::json& j, Session& s) {
    j.at("session_id").get_to(s.session_id);
    j.at("ip").get_to(s.ip);
    j.at("scope").get_to(s.scope);
    j.at("user").get_to(s.user);
    j.at("start_ts").get_to(s.start_ts);
    j.at("end_ts").get_to(s.end_ts);
    j.at("commands").get_to(s.events);
}

}  // namespace shellkg::parser

namespace shellkg::miner {

void to_json(nlohmann::json& j, const SequencePattern& p) {
    j = nlohmann::json{{"commands", p.commands},     {"support", p.support}, {"frequency", p.frequency},
                       {"users", p.user_count}, {"days", p.day_count}};
}

void from_json(const nlohmann::json& j, SequencePattern& p) {
    j.at("commands").get_to(p.commands);
    j.at("support").get_to(p.support);
    p.frequency  = j.value("frequency", 0.0);
    p.user_count = j.value("users", std::size_t{0});
    p.day_count  = j.value("days", std::size_t{0});
}

}  // namespace shellkg::miner

namespace shellkg::graph {

void to_json(nlohmann::json& j, const LabeledCommand& l) {
    j = nlohmann::json{{"scope", l.scope}, {"full_text", l.full_text}, {"intent", l.label.intent_name}};
    if (l.label.parameter) {
        j["parameter"] = *l.label.parameter;
    }
}

void from_json(const nlohmann::json& j, LabeledCommand& l) {
    j.at("scope").get_to(l.scope);
    j.at("full_text").get_to(l.full_text);
    j.at("intent").get_to(l.label.intent_name);
    l.label.parameter.reset();
    if (j.contains("parameter")) {
        l.label.parameter = j.at("parameter").get<std::string>();
    }
}

}  // namespace shellkg::graph

namespace shellkg::io {

std::vector<nlohmann::json> read_ndjson_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::vector<nlohmann::json> out;
    std::string                 line;
    std::size_t                 line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void write_ndjson_values(const std::filesystem::path& path, const std::vector<nlohmann::json>& values) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    for (const auto& v : values) {
        out << v.dump() << '\n';
    }
    if (!out) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

}  // namespace shellkg::io
