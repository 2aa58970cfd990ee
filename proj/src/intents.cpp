#include "shellkg/intents.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace shellkg::intents {

namespace {

bool extension_matches(std::string_view file, std::string_view pattern) {
    if (pattern.empty()) {
        return false;
    }
    if (file.ends_with(pattern)) {
        return true;
    }
    // rotated files: run.log.1, app.log.2024-01-01
    const std::string rotated = std::string(pattern) + ".";
    return file.find(rotated) != std::string_view::npos;
}

std::vector<std::string> words_of(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream       in{std::string(text)};
    std::string              w;
    while (in >> w) {
        out.push_back(w);
    }
    return out;
}

std::string unquote(std::string w) {
    if (w.size() >= 2 && (w.front() == '\'' || w.front() == '"') && w.back() == w.front()) {
        return w.substr(1, w.size() - 2);
    }
    return w;
}

// Process named by a command: "ps -ef | grep java" -> java, "pkill nginx" -> nginx.
std::optional<std::string> process_name(const parser::ParsedCommand& cmd) {
    const auto words = words_of(cmd.full_text);
    if (words.empty()) {
        return std::nullopt;
    }
    static const std::set<std::string> named_by_arg = {"pkill", "killall", "pgrep", "pidof"};
    if (named_by_arg.contains(words.front())) {
        for (auto it = words.rbegin(); it != words.rend(); ++it) {
            if (!it->starts_with('-') && *it != words.front()) {
                return unquote(*it);
            }
        }
        return std::nullopt;
    }
    for (std::size_t i = 0; i + 1 < words.size(); ++i) {
        if (words[i] == "|" && (words[i + 1] == "grep" || words[i + 1] == "egrep")) {
            for (std::size_t j = i + 2; j < words.size() && words[j] != "|"; ++j) {
                if (!words[j].starts_with('-')) {
                    return unquote(words[j]);
                }
            }
        }
    }
    return std::nullopt;
}

IntentRule make_rule(std::string name,
                     std::set<std::string> commands,
                     std::vector<std::string> extensions = {},
                     std::vector<std::string> paths = {}) {
    return IntentRule{std::move(name), std::move(commands), std::move(extensions), std::move(paths)};
}

}  // namespace

ParameterKind parameter_kind(std::string_view intent_name) {
    if (intent_name == "log_analysis" || intent_name == "config_analysis" || intent_name == "execute_script" ||
        intent_name == "code_analysis") {
        return ParameterKind::file_name;
    }
    if (intent_name == "process_analysis" || intent_name == "crontab_analysis") {
        return ParameterKind::process_name;
    }
    return ParameterKind::none;
}

bool is_intent_name(std::string_view name) {
    return std::find(kIntentNames.begin(), kIntentNames.end(), name) != kIntentNames.end();
}

void IntentRule::validate() const {
    if (!is_intent_name(intent_name)) {
        throw std::invalid_argument("unknown intent '" + intent_name + "'");
    }
}

std::string IntentLabel::to_string() const {
    return parameter ? intent_name + " " + *parameter : intent_name;
}

bool rule_matches(const IntentRule& rule, const parser::ParsedCommand& cmd) {
    if (!rule.command_set.empty() && !rule.command_set.contains(cmd.cmd_type)) {
        return false;
    }
    const auto kind = parameter_kind(rule.intent_name);
    if (kind == ParameterKind::file_name && !cmd.file) {
        return false;
    }
    if (rule.extension_patterns.empty() && rule.path_patterns.empty()) {
        return true;
    }
    if (cmd.file) {
        for (const auto& ext : rule.extension_patterns) {
            if (extension_matches(*cmd.file, ext)) {
                return true;
            }
        }
    }
    if (cmd.path) {
        const std::string dir = *cmd.path == "/" ? std::string("/") : *cmd.path + "/";
        for (const auto& p : rule.path_patterns) {
            if (dir.find(p) != std::string::npos) {
                return true;
            }
        }
    }
    return false;
}

std::optional<IntentLabel> classify(const parser::ParsedCommand& cmd, const std::vector<IntentRule>& rules) {
    for (const auto& rule : rules) {
        if (!rule_matches(rule, cmd)) {
            continue;
        }
        IntentLabel label{rule.intent_name, std::nullopt};
        switch (parameter_kind(rule.intent_name)) {
        case ParameterKind::file_name:
            label.parameter = cmd.file;
            break;
        case ParameterKind::process_name:
            label.parameter = process_name(cmd);
            break;
        case ParameterKind::none:
            break;
        }
        return label;
    }
    return std::nullopt;
}

DistributionReport classify_corpus(const std::vector<parser::ParsedCommand>& commands, const std::vector<IntentRule>& rules) {
    DistributionReport report;
    report.total = commands.size();
    for (const auto& cmd : commands) {
        if (const auto label = classify(cmd, rules)) {
            ++report.counts[label->intent_name];
        } else {
            ++report.unclear;
        }
    }
    if (report.total == 0) {
        return report;
    }
    const auto total = static_cast<double>(report.total);
    for (const auto& [name, count] : report.counts) {
        report.percentages[name] = 100.0 * static_cast<double>(count) / total;
    }
    report.percentages["unclear"] = 100.0 * static_cast<double>(report.unclear) / total;
    return report;
}

std::vector<IntentRule> default_rules() {
    const std::set<std::string> readers = {"cat", "vi", "vim", "view", "tail", "head", "less", "more", "grep", "egrep", "zcat", "zgrep"};
    std::set<std::string>       config_readers = readers;
    config_readers.insert("cp");

    return {
        make_rule("execute_script", {std::string(parser::kExecute), "sh", "bash", "ksh", "zsh", "source"}),
        make_rule("crontab_analysis", {"crontab"}),
        make_rule("crontab_analysis", readers, {}, {"/cron", "/etc/crontab"}),
        make_rule("process_analysis",
                  {"ps", "top", "htop", "kill", "pkill", "killall", "pgrep", "pidof", "jps", "jstack", "jmap", "jstat", "jcmd", "pstree", "lsof"}),
        make_rule("network_analysis",
                  {"netstat", "ss", "ping", "curl", "wget", "telnet", "ifconfig", "ip", "traceroute", "nslookup", "dig", "host", "tcpdump", "nc",
                   "iptables", "route", "arp"}),
        make_rule("storage_analysis", {"df", "du", "lsblk", "mount", "fdisk", "iostat"}),
        make_rule("log_analysis", readers, {".log", ".dat", ".out", ".err", ".trace"}, {"/logdir/", "/interface_logs/", "/logs/", "/log/"}),
        make_rule("config_analysis",
                  config_readers,
                  {".properties", ".conf", ".cfg", ".ini", ".xml", ".yaml", ".yml", ".json", ".toml", ".env"},
                  {"/conf/", "/config/", "/etc/"}),
        make_rule("code_analysis",
                  readers,
                  {".java", ".py", ".c", ".cc", ".cpp", ".h", ".hpp", ".js", ".ts", ".go", ".rb", ".pl", ".sh", ".sql", ".scala"},
                  {"/src/"}),
    };
}

std::vector<IntentRule> parse_rules(std::string_view text) {
    std::vector<IntentRule> rules;
    std::istringstream      in{std::string(text)};
    std::string             line;
    std::size_t             line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            IntentRule rule;
            rule.intent_name = j.at("intent").get<std::string>();
            if (j.contains("commands")) {
                const auto cmds  = j.at("commands").get<std::vector<std::string>>();
                rule.command_set = {cmds.begin(), cmds.end()};
            }
            rule.extension_patterns = j.value("extensions", std::vector<std::string>{});
            rule.path_patterns      = j.value("paths", std::vector<std::string>{});
            rule.validate();
            rules.push_back(std::move(rule));
        } catch (const std::exception& e) {
            throw std::runtime_error("rules line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rules;
}

std::vector<IntentRule> load_rules(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open rules file " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_rules(buffer.str());
}

std::string dump_rules(const std::vector<IntentRule>& rules) {
    std::string out;
    for (const auto& r : rules) {
        nlohmann::ordered_json j;
        j["intent"]     = r.intent_name;
        j["commands"]   = std::vector<std::string>(r.command_set.begin(), r.command_set.end());
        j["extensions"] = r.extension_patterns;
        j["paths"]      = r.path_patterns;
        out += j.dump() + "\n";
    }
    return out;
}

}  // namespace shellkg::intents
