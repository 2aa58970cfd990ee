#pragma once

#include "shellkg/parser.hpp"

#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fixtures {

inline constexpr std::int64_t kDay = 86'400'000;
inline constexpr std::int64_t kT0  = 1'700'000'000'000;

// Session of already-normalized commands. Commands the default parser rejects
// (single-letter items used by the mining tests) are kept verbatim.
inline shellkg::parser::Session session(const std::string&              id,
                                        const std::vector<std::string>& commands,
                                        const std::string&              user  = "alice",
                                        const std::string&              scope = "svc",
                                        const std::string&              ip    = "10.0.0.1",
                                        std::int64_t                    ts    = kT0) {
    using namespace shellkg::parser;
    Session s;
    s.session_id = id;
    s.user       = user;
    s.scope      = scope;
    s.ip         = ip;
    s.start_ts   = ts;
    const auto cfg = default_parse_config();
    for (const auto& text : commands) {
        ParsedCommand c;
        auto          r = normalize_command(text, "/", cfg, user);
        if (auto* p = std::get_if<ParsedCommand>(&r)) {
            c = *p;
        } else {
            c.full_text = text;
            c.cmd_type  = text.substr(0, text.find(' '));
        }
        c.ts  = ts;
        c.day = utc_day(ts);
        s.events.push_back(c);
        ts += 1000;
    }
    s.end_ts = ts;
    return s;
}

inline std::vector<shellkg::parser::Session> dataset(const std::vector<std::vector<std::string>>& rows) {
    std::vector<shellkg::parser::Session> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.push_back(session("s" + std::to_string(i), rows[i]));
    }
    return out;
}

}  // namespace fixtures
