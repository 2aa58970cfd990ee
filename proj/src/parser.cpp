#include "shellkg/parser.hpp"

#include "shellkg/hash.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

namespace shellkg::parser {

namespace {

bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

std::string_view trim(std::string_view text) {
    while (!text.empty() && is_space(text.front())) {
        text.remove_prefix(1);
    }
    while (!text.empty() && is_space(text.back())) {
        text.remove_suffix(1);
    }
    return text;
}

std::string_view first_word(std::string_view text) {
    text      = trim(text);
    auto stop = std::find_if(text.begin(), text.end(), is_space);
    return text.substr(0, static_cast<std::size_t>(stop - text.begin()));
}

// A shell word: `raw` keeps quoting as typed, `value` is the unquoted text.
struct Word {
    std::string raw;
    std::string value;
    bool        op = false;
};

bool is_stage_separator(const Word& w) {
    return w.op && (w.raw == "|" || w.raw == "||" || w.raw == "&&" || w.raw == ";" || w.raw == "&");
}

bool is_redirect(const Word& w) {
    return w.op && (w.raw.find('>') != std::string::npos || w.raw.find('<') != std::string::npos);
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::optional<std::vector<Word>> lex(std::string_view text) {
    std::vector<Word> words;
    Word              current;
    bool              in_word = false;
    enum class Quote { none, single, dbl } quote = Quote::none;

    auto flush = [&] {
        if (in_word) {
            words.push_back(std::move(current));
            current = {};
            in_word = false;
        }
    };

    const std::size_t n = text.size();
    for (std::size_t i = 0; i < n; ++i) {
        const char c = text[i];
        if (quote == Quote::single) {
            current.raw += c;
            if (c == '\'') {
                quote = Quote::none;
            } else {
                current.value += c;
            }
            continue;
        }
        if (quote == Quote::dbl) {
            current.raw += c;
            if (c == '\\' && i + 1 < n) {
                current.raw += text[++i];
                current.value += text[i];
            } else if (c == '"') {
                quote = Quote::none;
            } else {
                current.value += c;
            }
            continue;
        }
        if (is_space(c)) {
            flush();
            continue;
        }
        if (c == '\\') {
            in_word = true;
            current.raw += c;
            if (i + 1 < n) {
                current.raw += text[++i];
                current.value += text[i];
            }
            continue;
        }
        if (c == '\'' || c == '"') {
            in_word = true;
            quote   = c == '\'' ? Quote::single : Quote::dbl;
            current.raw += c;
            continue;
        }
        if (c == '|' || c == '&' || c == ';' || c == '>' || c == '<') {
            std::string op(1, c);
            if ((c == '>' || c == '<') && in_word && all_digits(current.raw)) {
                op      = current.raw + op;
                current = {};
                in_word = false;
            }
            flush();
            if (i + 1 < n && text[i + 1] == c && c != ';') {
                op += c;
                ++i;
            } else if (c == '>' && i + 1 < n && text[i + 1] == '&') {
                op += '&';
                ++i;
            }
            words.push_back(Word{op, op, true});
            continue;
        }
        in_word = true;
        current.raw += c;
        current.value += c;
    }
    if (quote != Quote::none) {
        return std::nullopt;
    }
    flush();
    return words;
}

bool is_verbatim_construct(std::string_view text) {
    return text.find("$(") != std::string_view::npos || text.find('`') != std::string_view::npos ||
           text.find("<<") != std::string_view::npos;
}

std::string quote_if_needed(const std::string& value) {
    if (std::none_of(value.begin(), value.end(), is_space)) {
        return value;
    }
    return "'" + value + "'";
}

std::string join_raw(const std::vector<Word>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) {
            out += ' ';
        }
        out += w.raw;
    }
    return out;
}

void split_path(const std::string& resolved, bool directory_only, ParsedCommand& out) {
    if (directory_only || resolved == "/") {
        out.path = resolved;
        return;
    }
    const auto slash = resolved.rfind('/');
    out.file         = resolved.substr(slash + 1);
    out.path         = slash == 0 ? std::string("/") : resolved.substr(0, slash);
}

bool names_directory(std::string_view arg) {
    return arg.ends_with('/') || arg == "." || arg == ".." || arg == "~" || arg.ends_with("/.") ||
           arg.ends_with("/..");
}

}  // namespace

std::string utc_day(std::int64_t ts_ms) {
    using namespace std::chrono;
    const auto tp  = sys_time<milliseconds>(milliseconds(ts_ms));
    const auto ymd = year_month_day(floor<days>(tp));
    char       buf[16];
    std::snprintf(buf,
                  sizeof(buf),
                  "%04d-%02u-%02u",
                  static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string Session::day() const {
    return utc_day(start_ts);
}

ParseConfig default_parse_config() {
    ParseConfig cfg;
    cfg.min_supp         = 2;
    cfg.file_command_set = {"cat", "vi", "vim", "tail", "head", "less", "more", "grep", "sh", "rm", "touch", "cp", "mv"};
    cfg.strip_option_set = {
        {"*", {"--color", "--color=auto", "--color=always", "--color=never"}},
        {"cat", {"-n"}},
        {"less", {"-N", "-R", "-S"}},
        {"more", {"-d"}},
        {"ls", {"--color", "-G"}},
    };
    cfg.pattern_first_commands = {"grep", "egrep", "fgrep", "zgrep"};
    cfg.known_commands         = {
        "alias",    "awk",      "bash",    "bzip2",      "cat",      "cd",      "chgrp",    "chmod",   "chown",
        "clear",    "cp",       "crontab", "curl",       "cut",      "date",    "df",       "diff",    "dig",
        "dmesg",    "du",       "echo",    "egrep",      "env",      "exit",    "export",   "fdisk",   "fgrep",
        "file",     "find",     "free",    "grep",       "gunzip",   "gzip",    "head",     "history", "host",
        "hostname", "htop",     "id",      "ifconfig",   "iostat",   "ip",      "iptables", "java",    "jcmd",
        "jmap",     "jps",      "jstack",  "jstat",      "kill",     "killall", "less",     "ln",      "logout",
        "ls",       "lsblk",    "lsof",    "md5sum",     "mkdir",    "more",    "mount",    "mv",      "nc",
        "netstat",  "nohup",    "nslookup", "ping",      "pgrep",    "pidof",   "pkill",    "ps",      "pstree",
        "pwd",      "python",   "python3", "route",      "rm",       "rmdir",   "rsync",    "scp",     "sed",
        "service",  "sh",       "sort",    "source",     "ss",       "stat",    "su",       "sudo",    "systemctl",
        "tail",     "tar",      "tcpdump", "telnet",     "top",      "touch",   "traceroute", "tree",  "uname",
        "uniq",     "unzip",    "uptime",  "vi",         "view",     "vim",     "vmstat",   "wc",      "wget",
        "whoami",   "which",    "xargs",   "zcat",       "zgrep",    "zip",     "arp",      "ssh",     "less",
    };
    return cfg;
}

bool is_path_prefixed(std::string_view word) {
    return word.starts_with('/') || word.starts_with("./") || word.starts_with("../") || word.starts_with('~');
}

std::string normalize_path(std::string_view absolute) {
    std::vector<std::string_view> parts;
    std::size_t                   pos = 0;
    while (pos <= absolute.size()) {
        auto next = absolute.find('/', pos);
        if (next == std::string_view::npos) {
            next = absolute.size();
        }
        const auto part = absolute.substr(pos, next - pos);
        if (part == "..") {
            if (!parts.empty()) {
                parts.pop_back();
            }
        } else if (!part.empty() && part != ".") {
            parts.push_back(part);
        }
        pos = next + 1;
    }
    std::string out;
    for (const auto part : parts) {
        out += '/';
        out += part;
    }
    return out.empty() ? std::string("/") : out;
}

std::string resolve_path(std::string_view arg, std::string_view cwd, std::string_view user) {
    if (arg.starts_with('~')) {
        const auto slash = arg.find('/');
        const auto name  = arg.substr(1, slash == std::string_view::npos ? arg.size() - 1 : slash - 1);
        std::string home = "/home/" + std::string(name.empty() ? user : name);
        if (slash != std::string_view::npos) {
            home += arg.substr(slash);
        }
        return normalize_path(home);
    }
    if (arg.starts_with('/')) {
        return normalize_path(arg);
    }
    std::string joined(cwd);
    joined += '/';
    joined += arg;
    return normalize_path(joined);
}

std::optional<std::string> parse_ssh_ip(std::string_view command) {
    const auto words = lex(command);
    if (!words || words->empty() || (*words)[0].value != "ssh") {
        return std::nullopt;
    }
    for (std::size_t i = 1; i < words->size(); ++i) {
        std::string_view candidate = (*words)[i].value;
        if (const auto at = candidate.rfind('@'); at != std::string_view::npos) {
            candidate = candidate.substr(at + 1);
        }
        if (const auto colon = candidate.find(':'); colon != std::string_view::npos) {
            candidate = candidate.substr(0, colon);
        }
        int         octets = 0;
        bool        valid  = true;
        std::size_t pos    = 0;
        while (valid && pos <= candidate.size()) {
            auto end = candidate.find('.', pos);
            if (end == std::string_view::npos) {
                end = candidate.size();
            }
            const auto part = candidate.substr(pos, end - pos);
            if (!all_digits(part) || part.size() > 3 || std::stoi(std::string(part)) > 255) {
                valid = false;
            }
            ++octets;
            pos = end + 1;
        }
        if (valid && octets == 4) {
            return std::string(candidate);
        }
    }
    return std::nullopt;
}

NormalizeResult normalize_command(std::string_view   text,
                                  std::string_view   cwd,
                                  const ParseConfig& cfg,
                                  std::string_view   user) {
    text = trim(text);
    if (text.empty()) {
        return Rejected{RejectReason::empty, "empty command"};
    }

    const auto lead       = first_word(text);
    const bool is_execute = is_path_prefixed(lead);
    if (!is_execute && !cfg.known_commands.empty() && !cfg.known_commands.contains(std::string(lead))) {
        return Rejected{RejectReason::unknown_command, "unknown command '" + std::string(lead) + "'"};
    }

    if (is_verbatim_construct(text)) {
        ParsedCommand out;
        out.cmd_type  = is_execute ? std::string(kExecute) : std::string(lead);
        out.full_text = std::string(text);
        return out;
    }

    auto lexed = lex(text);
    if (!lexed) {
        return Rejected{RejectReason::syntax_error, "unbalanced quotes"};
    }
    auto& words = *lexed;
    if (words.empty() || words.front().op) {
        return Rejected{RejectReason::syntax_error, "command does not start with a word"};
    }
    if (words.back().op && words.back().raw != ";" && words.back().raw != "&") {
        return Rejected{RejectReason::syntax_error, "dangling operator '" + words.back().raw + "'"};
    }

    // Option stripping, stage by stage.
    std::vector<Word> kept;
    kept.reserve(words.size());
    std::string stage_cmd;
    bool        stage_start = true;
    for (auto& w : words) {
        if (is_stage_separator(w)) {
            stage_start = true;
            kept.push_back(std::move(w));
            continue;
        }
        if (stage_start && !w.op) {
            stage_cmd   = w.value;
            stage_start = false;
            kept.push_back(std::move(w));
            continue;
        }
        if (!w.op && w.value.starts_with('-')) {
            const auto global = cfg.strip_option_set.find("*");
            const auto local  = cfg.strip_option_set.find(stage_cmd);
            const bool strip  = (global != cfg.strip_option_set.end() && global->second.contains(w.value)) ||
                               (local != cfg.strip_option_set.end() && local->second.contains(w.value));
            if (strip) {
                continue;
            }
        }
        kept.push_back(std::move(w));
    }

    ParsedCommand out;
    out.cmd_type = is_execute ? std::string(kExecute) : kept.front().value;

    // Entity extraction from the first pipeline stage.
    std::size_t stage_end = 0;
    while (stage_end < kept.size() && !is_stage_separator(kept[stage_end])) {
        ++stage_end;
    }
    std::optional<std::size_t> target;
    if (is_execute) {
        target = 0;
    } else if (cfg.file_command_set.contains(out.cmd_type)) {
        bool skip_pattern = cfg.pattern_first_commands.contains(out.cmd_type);
        for (std::size_t i = 1; i < stage_end; ++i) {
            if (kept[i].op) {
                if (is_redirect(kept[i])) {
                    ++i;  // redirect target is not an operand
                }
                continue;
            }
            if (kept[i].value.starts_with('-') || kept[i].value.empty()) {
                continue;
            }
            if (skip_pattern) {
                skip_pattern = false;
                continue;
            }
            target = i;
        }
    }
    if (target) {
        Word&       w        = kept[*target];
        const auto  resolved = resolve_path(w.value, cwd, user);
        const bool  dir_only = names_directory(w.value);
        split_path(resolved, dir_only, out);
        std::string rewritten = resolved;
        if (dir_only && resolved != "/") {
            rewritten += '/';
        }
        w.raw   = quote_if_needed(rewritten);
        w.value = rewritten;
    }

    out.full_text = join_raw(kept);
    return out;
}

LogParse parse_log(std::vector<RawEvent> events) {
    std::map<std::pair<std::string, std::string>, std::vector<RawEvent>> groups;
    for (auto& e : events) {
        auto key = std::make_pair(e.user, e.scope);
        groups[std::move(key)].push_back(std::move(e));
    }

    LogParse result;
    for (auto& [key, group] : groups) {
        std::stable_sort(group.begin(), group.end(), [](const RawEvent& a, const RawEvent& b) { return a.ts < b.ts; });
        std::optional<Session> open;
        std::size_t            ordinal = 0;
        auto                   close   = [&] {
            if (open) {
                open->session_id = "s" + to_hex(StableHasher{}
                                                    .add(open->user)
                                                    .add(open->scope)
                                                    .add_u64(static_cast<std::uint64_t>(open->start_ts))
                                                    .add_u64(ordinal++)
                                                    .value());
                result.sessions.push_back(std::move(*open));
                open.reset();
            }
        };
        for (const auto& e : group) {
            const auto text = trim(e.command);
            if (text.empty()) {
                continue;
            }
            if (first_word(text) == "ssh") {
                close();
                open.emplace();
                open->user     = e.user;
                open->scope    = e.scope;
                open->start_ts = e.ts;
                open->end_ts   = e.ts;
                if (auto ip = parse_ssh_ip(text)) {
                    open->ip = std::move(*ip);
                } else {
                    open->ip = "0.0.0.0";
                    ++result.malformed_ssh;
                }
                continue;
            }
            if (!open) {
                open.emplace();
                open->user     = e.user;
                open->scope    = e.scope;
                open->ip       = "0.0.0.0";
                open->start_ts = e.ts;
                ++result.orphan_events;
            }
            ParsedCommand cmd;
            const auto    lead = first_word(text);
            cmd.cmd_type       = is_path_prefixed(lead) ? std::string(kExecute) : std::string(lead);
            cmd.full_text      = std::string(text);
            cmd.ts             = e.ts;
            cmd.day            = utc_day(e.ts);
            open->events.push_back(std::move(cmd));
            open->end_ts = e.ts;
        }
        close();
    }
    std::stable_sort(result.sessions.begin(), result.sessions.end(), [](const Session& a, const Session& b) {
        return std::tie(a.start_ts, a.session_id) < std::tie(b.start_ts, b.session_id);
    });
    return result;
}

Session resolve_paths(const Session& session, const ParseConfig& cfg) {
    Session out = session;
    out.events.clear();

    const std::string          home = "/home/" + session.user;
    std::string                cwd  = home;
    std::optional<std::string> previous;

    for (const auto& event : session.events) {
        const auto words = lex(event.full_text);
        const bool is_cd = words && !words->empty() && (*words)[0].value == "cd" &&
                           std::none_of(words->begin(), words->end(), [](const Word& w) { return w.op; });
        if (is_cd) {
            std::optional<std::string> next;
            if (words->size() == 1) {
                next = home;
            } else if ((*words)[1].value == "-") {
                next = previous;
            } else {
                next = resolve_path((*words)[1].value, cwd, session.user);
            }
            previous = cwd;
            cwd      = next.value_or("/");
            continue;
        }
        if (!words && first_word(event.full_text) == "cd") {
            // unparseable cd target
            previous = cwd;
            cwd      = "/";
            continue;
        }
        auto normalized = normalize_command(event.full_text, cwd, cfg, session.user);
        if (auto* cmd = std::get_if<ParsedCommand>(&normalized)) {
            cmd->ts  = event.ts;
            cmd->day = event.day.empty() ? utc_day(event.ts) : event.day;
            out.events.push_back(std::move(*cmd));
        }
    }
    return out;
}

std::vector<Session> filter_rare(const std::vector<Session>& sessions, std::size_t min_supp) {
    std::unordered_map<std::string, std::size_t> session_counts;
    for (const auto& s : sessions) {
        std::unordered_set<std::string_view> seen;
        for (const auto& e : s.events) {
            if (seen.insert(e.full_text).second) {
                ++session_counts[e.full_text];
            }
        }
    }
    std::vector<Session> out;
    out.reserve(sessions.size());
    for (const auto& s : sessions) {
        Session kept = s;
        std::erase_if(kept.events, [&](const ParsedCommand& e) { return session_counts[e.full_text] < min_supp; });
        if (!kept.events.empty()) {
            out.push_back(std::move(kept));
        }
    }
    return out;
}

std::vector<Session> process_sessions(const std::vector<Session>& raw, const ParseConfig& cfg) {
    std::vector<Session> resolved;
    resolved.reserve(raw.size());
    for (const auto& s : raw) {
        resolved.push_back(resolve_paths(s, cfg));
    }
    return filter_rare(resolved, cfg.min_supp);
}

std::vector<std::string> tokenize(std::string_view command) {
    std::vector<std::string> tokens;
    std::size_t              pos = 0;
    while (pos < command.size()) {
        while (pos < command.size() && is_space(command[pos])) {
            ++pos;
        }
        std::size_t end = pos;
        while (end < command.size() && !is_space(command[end])) {
            ++end;
        }
        if (end == pos) {
            break;
        }
        const auto token = command.substr(pos, end - pos);
        if (token.starts_with('/')) {
            std::size_t p = 0;
            while (p < token.size()) {
                auto q = token.find('/', p);
                if (q == std::string_view::npos) {
                    q = token.size();
                }
                if (q > p) {
                    tokens.emplace_back(token.substr(p, q - p));
                }
                p = q + 1;
            }
        } else {
            tokens.emplace_back(token);
        }
        pos = end;
    }
    return tokens;
}

std::vector<std::string> tokenize(const ParsedCommand& command) {
    return tokenize(command.full_text);
}

}  // namespace shellkg::parser
