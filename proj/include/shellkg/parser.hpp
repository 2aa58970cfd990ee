#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace shellkg::parser {

/// Marker used as cmd_type for commands that directly invoke a script by path.
inline constexpr std::string_view kExecute = "execute";

struct RawEvent {
    std::string  command;
    std::string  scope;
    std::string  user;
    std::int64_t ts = 0;  // milliseconds since epoch, UTC
};

struct ParsedCommand {
    std::string                cmd_type;
    std::string                full_text;
    std::optional<std::string> path;  // absolute, normalized directory
    std::optional<std::string> file;  // file name inside `path`
    std::int64_t               ts = 0;
    std::string                day;  // YYYY-MM-DD (UTC)

    bool operator==(const ParsedCommand&) const = default;
};

struct Session {
    std::string                session_id;
    std::string                ip;
    std::string                scope;
    std::string                user;
    std::vector<ParsedCommand> events;
    std::int64_t               start_ts = 0;
    std::int64_t               end_ts   = 0;

    bool operator==(const Session&) const = default;

    /// Day of the session start (UTC).
    [[nodiscard]] std::string day() const;
};

struct ParseConfig {
    std::size_t           min_supp = 2;
    std::set<std::string> file_command_set;
    /// Options dropped from a command; the "*" key applies to every command.
    std::map<std::string, std::set<std::string>> strip_option_set;
    /// Leading tokens accepted as commands. Empty accepts anything.
    std::set<std::string> known_commands;
    /// File commands whose first operand is a pattern, not a path (grep family).
    std::set<std::string> pattern_first_commands;
};

ParseConfig default_parse_config();

enum class RejectReason { empty, syntax_error, unknown_command };

struct Rejected {
    RejectReason reason;
    std::string  message;
};

using NormalizeResult = std::variant<ParsedCommand, Rejected>;

struct LogParse {
    std::vector<Session> sessions;
    std::size_t          malformed_ssh = 0;  // ssh commands without a parseable IPv4
    std::size_t          orphan_events = 0;  // commands seen before any ssh in their group
};

/// Splits an event stream into ssh-delimited sessions. Commands are kept as
/// typed (trimmed); path resolution and rejection happen in resolve_paths.
LogParse parse_log(std::vector<RawEvent> events);

/// Extracts the IPv4 address of an ssh command ("ssh [-opts] [user@]a.b.c.d").
std::optional<std::string> parse_ssh_ip(std::string_view command);

NormalizeResult normalize_command(std::string_view   text,
                                  std::string_view   cwd,
                                  const ParseConfig& cfg,
                                  std::string_view   user = {});

/// Threads the working directory through the session, rewriting relative file
/// paths to absolute ones, dropping cd commands and rejected commands.
Session resolve_paths(const Session& session, const ParseConfig& cfg = default_parse_config());

/// Removes commands seen in fewer than `min_supp` distinct sessions and drops
/// sessions left empty.
std::vector<Session> filter_rare(const std::vector<Session>& sessions, std::size_t min_supp);

/// resolve_paths over every session followed by filter_rare.
std::vector<Session> process_sessions(const std::vector<Session>& raw, const ParseConfig& cfg);

std::vector<std::string> tokenize(std::string_view command);
std::vector<std::string> tokenize(const ParsedCommand& command);

/// Lexically normalizes an absolute path: collapses separators, "." and "..".
std::string normalize_path(std::string_view absolute);

/// Resolves `arg` against `cwd`; "~" maps to /home/<user>.
std::string resolve_path(std::string_view arg, std::string_view cwd, std::string_view user);

bool is_path_prefixed(std::string_view word);

/// Calendar day (YYYY-MM-DD, UTC) of a millisecond timestamp.
std::string utc_day(std::int64_t ts_ms);

}  // namespace shellkg::parser
