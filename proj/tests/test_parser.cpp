#include "fixtures.hpp"
#include "oracles.hpp"

#include "shellkg/parser.hpp"

#include <doctest.h>

#include <map>
#include <random>
#include <set>

using namespace shellkg::parser;

namespace {

RawEvent ev(const std::string& cmd, std::int64_t t, const std::string& user = "bob", const std::string& scope = "svc") {
    return RawEvent{cmd, scope, user, fixtures::kT0 + t};
}

ParsedCommand parsed(std::string_view text, std::string_view cwd = "/") {
    auto r = normalize_command(text, cwd, default_parse_config(), "bob");
    REQUIRE(std::holds_alternative<ParsedCommand>(r));
    return std::get<ParsedCommand>(r);
}

std::vector<std::string> texts(const Session& s) {
    std::vector<std::string> out;
    for (const auto& e : s.events) {
        out.push_back(e.full_text);
    }
    return out;
}

}  // namespace

TEST_CASE("parse_log splits on ssh and consumes the ssh line") {
    auto one = parse_log({ev("ssh 10.0.0.5", 0), ev("ls", 1), ev("pwd", 2)});
    REQUIRE(one.sessions.size() == 1);
    CHECK(one.sessions[0].ip == "10.0.0.5");
    CHECK(one.sessions[0].events.size() == 2);

    auto two = parse_log({ev("ssh 10.0.0.5", 0), ev("ls", 1), ev("ssh 10.0.0.6", 2), ev("pwd", 3)});
    REQUIRE(two.sessions.size() == 2);
    CHECK(two.sessions[0].events.size() == 1);
    CHECK(two.sessions[1].events.size() == 1);
    CHECK(two.sessions[1].ip == "10.0.0.6");
}

TEST_CASE("parse_log groups by user and scope before splitting") {
    auto r = parse_log({ev("ssh 10.0.0.1", 0, "a"), ev("ssh 10.0.0.2", 1, "b"), ev("ls", 2, "a"), ev("pwd", 3, "b")});
    REQUIRE(r.sessions.size() == 2);
    for (const auto& s : r.sessions) {
        REQUIRE(s.events.size() == 1);
        CHECK(s.events[0].full_text == (s.user == "a" ? "ls" : "pwd"));
    }
}

TEST_CASE("malformed ssh yields ip 0.0.0.0 and a warning") {
    auto r = parse_log({ev("ssh somehost", 0), ev("ls", 1)});
    REQUIRE(r.sessions.size() == 1);
    CHECK(r.sessions[0].ip == "0.0.0.0");
    CHECK(r.malformed_ssh == 1);
}

TEST_CASE("ssh ip extraction") {
    CHECK(parse_ssh_ip("ssh 10.1.2.3") == "10.1.2.3");
    CHECK(parse_ssh_ip("ssh -p 22 root@192.168.0.7") == "192.168.0.7");
    CHECK_FALSE(parse_ssh_ip("ssh 300.1.1.1"));
    CHECK_FALSE(parse_ssh_ip("ssh host"));
}

TEST_CASE("parse_log is deterministic") {
    std::vector<RawEvent> evs = {ev("ssh 10.0.0.1", 0, "a"), ev("ls", 5, "a"), ev("ssh 10.0.0.2", 1, "b"), ev("cat /x.log", 9, "b")};
    auto a = parse_log(evs);
    auto b = parse_log(evs);
    CHECK(a.sessions == b.sessions);
}

TEST_CASE("resolve_paths threads the working directory") {
    auto r = parse_log({ev("ssh 10.0.0.1", 0), ev("cd /data", 1), ev("cat logs/result.log", 2)});
    CHECK(texts(resolve_paths(r.sessions.at(0))) == std::vector<std::string>{"cat /data/logs/result.log"});

    r        = parse_log({ev("ssh 10.0.0.1", 0), ev("cd /a", 1), ev("cd b", 2), ev("cat c.log", 3)});
    auto out = resolve_paths(r.sessions.at(0));
    REQUIRE(out.events.size() == 1);
    CHECK(out.events[0].full_text == "cat /a/b/c.log");
    CHECK(out.events[0].path == "/a/b");
    CHECK(out.events[0].file == "c.log");
}

TEST_CASE("absolute commands are unchanged and resolve_paths is idempotent") {
    auto r    = parse_log({ev("ssh 10.0.0.1", 0), ev("cat /abs/x.log", 1), ev("cd /tmp", 2), ev("vi ../etc/a.conf", 3),
                           ev("cd -", 4), ev("tail -f logs/run.log", 5)});
    auto once = resolve_paths(r.sessions.at(0));
    CHECK(once.events.at(0).full_text == "cat /abs/x.log");
    CHECK(once.events.at(1).full_text == "vi /etc/a.conf");
    CHECK(resolve_paths(once) == once);
}

TEST_CASE("cd - without history sends cwd to root") {
    auto r   = parse_log({ev("ssh 10.0.0.1", 0), ev("cd -", 1), ev("cat a.log", 2)});
    auto out = resolve_paths(r.sessions.at(0));
    REQUIRE(out.events.size() == 1);
    CHECK(out.events[0].full_text == "cat /a.log");
}

TEST_CASE("normalize_command extracts entities") {
    auto c = parsed("cat /data/logs/result.log | grep error");
    CHECK(c.cmd_type == "cat");
    CHECK(c.path == "/data/logs");
    CHECK(c.file == "result.log");
    CHECK(c.full_text == "cat /data/logs/result.log | grep error");

    auto e = parsed("./scripts/bin/startup.sh", "/");
    CHECK(e.cmd_type == "execute");
    CHECK(e.path == "/scripts/bin");
    CHECK(e.file == "startup.sh");

    auto g = parsed("grep error logs/result.log", "/data");
    CHECK(g.cmd_type == "grep");
    CHECK(g.path == "/data/logs");
    CHECK(g.file == "result.log");

    auto home = parsed("cat ~/notes.txt");
    CHECK(home.path == "/home/bob");

    auto ls = parsed("ls -l");
    CHECK_FALSE(ls.path);
    CHECK_FALSE(ls.file);
}

TEST_CASE("normalize_command strips configured options") {
    CHECK(parsed("cat -n /a/b.log").full_text == "cat /a/b.log");
    CHECK(parsed("ls --color=auto /tmp").full_text.find("--color") == std::string::npos);
}

TEST_CASE("normalize_command rejects detectable errors") {
    const auto cfg = default_parse_config();
    auto       q   = normalize_command("cat 'unterminated", "/", cfg);
    REQUIRE(std::holds_alternative<Rejected>(q));
    CHECK(std::get<Rejected>(q).reason == RejectReason::syntax_error);

    auto u = normalize_command("catt /a.log", "/", cfg);
    REQUIRE(std::holds_alternative<Rejected>(u));
    CHECK(std::get<Rejected>(u).reason == RejectReason::unknown_command);
}

TEST_CASE("path invariants of parsed commands") {
    std::mt19937_64 rng(3);
    const std::vector<std::string> cmds = {"cat", "vi", "tail", "rm", "less"};
    const std::vector<std::string> segs = {"a", "b", ".", "..", "logs", "x.log", ""};
    for (int i = 0; i < 500; ++i) {
        std::string arg = rng() % 2 ? "/" : "";
        for (int k = 0, n = 1 + static_cast<int>(rng() % 4); k < n; ++k) {
            arg += segs[rng() % segs.size()] + "/";
        }
        arg += "f" + std::to_string(rng() % 3) + ".log";
        auto r = normalize_command(cmds[rng() % cmds.size()] + " " + arg, "/srv/x", default_parse_config(), "u");
        REQUIRE(std::holds_alternative<ParsedCommand>(r));
        const auto& c = std::get<ParsedCommand>(r);
        if (c.file) {
            REQUIRE(c.path);
        }
        if (c.path) {
            CHECK(c.path->front() == '/');
            CHECK(c.path->find("//") == std::string::npos);
            CHECK(c.path->find("/./") == std::string::npos);
            CHECK(c.path->find("/../") == std::string::npos);
            CHECK_FALSE(c.path->ends_with("/.."));
        }
    }
}

TEST_CASE("execute marker iff the command starts with a path prefix") {
    for (const auto* t : {"/opt/run.sh", "./run.sh", "../run.sh", "~/run.sh"}) {
        CHECK(parsed(t, "/srv/app").cmd_type == "execute");
    }
    for (const auto* t : {"sh /opt/run.sh", "cat x/y.log"}) {
        CHECK(parsed(t).cmd_type != "execute");
    }
}

TEST_CASE("filter_rare") {
    auto ds = fixtures::dataset({{"ls", "noise1"}, {"ls", "noise2"}, {"ls", "noise3"}});
    auto out = filter_rare(ds, 2);
    REQUIRE(out.size() == 3);
    for (const auto& s : out) {
        CHECK(texts(s) == std::vector<std::string>{"ls"});
    }
    CHECK(filter_rare(ds, 1) == ds);

    auto single = fixtures::dataset({{"only"}, {"ls"}, {"ls"}});
    auto kept   = filter_rare(single, 2);
    CHECK(kept.size() == 2);
}

TEST_CASE("filter_rare survivors meet min_supp and a second pass is a no-op") {
    std::mt19937_64 rng(11);
    for (int round = 0; round < 50; ++round) {
        std::vector<std::vector<std::string>> rows(1 + rng() % 20);
        for (auto& r : rows) {
            for (std::size_t k = 0, n = 1 + rng() % 6; k < n; ++k) {
                r.push_back("c" + std::to_string(rng() % 10));
            }
        }
        const std::size_t m   = 1 + rng() % 4;
        auto              out = filter_rare(fixtures::dataset(rows), m);
        std::map<std::string, std::set<std::string>> where;
        for (const auto& s : out) {
            CHECK_FALSE(s.events.empty());
            for (const auto& e : s.events) {
                where[e.full_text].insert(s.session_id);
            }
        }
        for (const auto& [text, ids] : where) {
            CHECK(ids.size() >= m);
        }
        CHECK(filter_rare(out, m) == out);
    }
}

TEST_CASE("tokenize") {
    CHECK(tokenize("cat /data/logs/result.log") == std::vector<std::string>{"cat", "data", "logs", "result.log"});
    CHECK(tokenize("ls") == std::vector<std::string>{"ls"});
    CHECK(tokenize("grep error /data/logs/result.log") ==
          std::vector<std::string>{"grep", "error", "data", "logs", "result.log"});
    CHECK(tokenize("a  //b//c ") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("tokenize properties on random text") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        const auto text = oracle::random_word(rng, "ab/ .", 0, 20);
        const auto got  = tokenize(text);
        CHECK(got == oracle::tokens(text));
        for (const auto& t : got) {
            CHECK_FALSE(t.empty());
        }
    }
    for (int i = 0; i < 200; ++i) {
        // path-free commands with single spaces reconstruct exactly
        std::string text = oracle::random_word(rng, "abc", 1, 4);
        for (int k = 0, n = static_cast<int>(rng() % 4); k < n; ++k) {
            text += " " + oracle::random_word(rng, "abc.-", 1, 5);
        }
        const auto got = tokenize(text);
        std::string joined;
        for (const auto& t : got) {
            joined += (joined.empty() ? "" : " ") + t;
        }
        CHECK(joined == text);
    }
}

TEST_CASE("utc_day boundaries") {
    CHECK(utc_day(0) == "1970-01-01");
    CHECK(utc_day(fixtures::kDay - 1) == "1970-01-01");
    CHECK(utc_day(fixtures::kDay) == "1970-01-02");
}

TEST_CASE("normalize_path") {
    CHECK(normalize_path("/a//b/./c/../d") == "/a/b/d");
    CHECK(normalize_path("/..") == "/");
    CHECK(resolve_path("x", "/srv", "u") == "/srv/x");
    CHECK(resolve_path("~", "/srv", "u") == "/home/u");
}
