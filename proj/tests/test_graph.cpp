#include "fixtures.hpp"

#include "shellkg/corpus.hpp"
#include "shellkg/graph.hpp"
#include "shellkg/miner.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

using namespace shellkg;
using namespace shellkg::graph;

namespace {

const std::string kScope = "OnlineServiceRLX";
const std::vector<std::string> kRestart = {
    "cat /opt/hw/app/OnlineServiceRLX/conf/app.properties",
    "sh /opt/hw/app/OnlineServiceRLX/bin/stop.sh",
    "sh /opt/hw/app/OnlineServiceRLX/bin/start.sh",
    "cat /opt/hw/app/OnlineServiceRLX/logs/run.log",
};

struct Fixture {
    std::vector<parser::Session>         sessions;
    std::vector<miner::SequencePattern>  patterns;
    std::vector<aggregator::Macro>       macros;
    std::vector<LabeledCommand>          labels;

    BuildInputs inputs() const {
        BuildInputs in;
        in.sessions = sessions;
        in.patterns = patterns;
        in.macros   = macros;
        in.labels   = labels;
        return in;
    }
};

// Restart operation in 8 sessions by two users plus unrelated sessions.
Fixture restart_fixture() {
    Fixture f;
    for (int i = 0; i < 8; ++i) {
        auto cmds = kRestart;
        if (i % 2 == 0) {
            cmds.insert(cmds.begin() + 1, "ps -ef");
        }
        f.sessions.push_back(fixtures::session("r" + std::to_string(i), cmds, i < 5 ? "alice" : "bob", kScope,
                                               i < 3 ? "10.0.0.1" : "10.0.0.2", fixtures::kT0 + i * fixtures::kDay));
    }
    f.sessions.push_back(fixtures::session("o1", {"ls", "df -h"}, "carol", kScope, "10.0.0.3"));
    miner::SequencePattern p;
    p.commands = kRestart;
    p.support  = 8;
    f.patterns.push_back(p);
    f.labels = label_commands(f.sessions, intents::default_rules());
    f.macros.push_back({kScope, "restart_service=Y", kRestart, std::nullopt, 1});
    return f;
}

struct Totals {
    std::map<std::uint32_t, std::int64_t> user, ip;
};

// Independent recount of the counted edges.
Totals sums(const KnowledgeGraph& g, EdgeType user_type, EdgeType ip_type) {
    Totals t;
    for (const auto& e : g.edges()) {
        if (e.type == user_type) {
            t.user[e.to] += e.value;
        } else if (e.type == ip_type) {
            t.ip[e.to] += e.value;
        }
    }
    return t;
}

void check_counts(const KnowledgeGraph& g) {
    const auto cmd = sums(g, EdgeType::user_cmd, EdgeType::ip_cmd);
    const auto seq = sums(g, EdgeType::user_seq, EdgeType::ip_seq);
    for (std::uint32_t v = 0; v < g.vertices().size(); ++v) {
        const auto& x = g.vertex(v);
        if (x.tag == Tag::cmd) {
            CHECK(x.n >= 1);
            CHECK(x.n == (cmd.user.count(v) ? cmd.user.at(v) : 0));
            CHECK(x.n == (cmd.ip.count(v) ? cmd.ip.at(v) : 0));
        } else if (x.tag == Tag::seq) {
            CHECK(x.n == (seq.user.count(v) ? seq.user.at(v) : 0));
            CHECK(x.n == (seq.ip.count(v) ? seq.ip.at(v) : 0));
        }
    }
    for (const auto& e : g.edges()) {
        // user/ip edges run user->cmd; counted edges are at least 1
        switch (e.type) {
            case EdgeType::user_cmd:
            case EdgeType::ip_cmd:
            case EdgeType::user_seq:
            case EdgeType::ip_seq:
            case EdgeType::seq_cmd: CHECK(e.value >= 1); break;
            default: CHECK(e.value == 0);
        }
    }
}

std::uint32_t must_find(const KnowledgeGraph& g, const std::string& id) {
    auto v = g.find(id);
    REQUIRE(v);
    return *v;
}

std::vector<parser::Session> corpus_sessions(std::uint64_t seed, std::size_t n) {
    corpus::CorpusConfig cc;
    cc.seed     = seed;
    cc.sessions = n;
    const auto c = corpus::generate(cc);
    return parser::process_sessions(parser::parse_log(c.events).sessions, parser::default_parse_config());
}

Fixture corpus_fixture(std::uint64_t seed, std::size_t n) {
    Fixture f;
    f.sessions = corpus_sessions(seed, n);
    auto cfg   = miner::default_mining_config(f.sessions.size());
    cfg.theta  = 5.0 / static_cast<double>(f.sessions.size());
    f.patterns = miner::post_filter(miner::mine(f.sessions, cfg), f.sessions, cfg);
    f.labels   = label_commands(f.sessions, intents::default_rules());
    return f;
}

}  // namespace

TEST_CASE("vertex ids") {
    CHECK(cmd_id("a", "ls") == cmd_id("a", "ls"));
    CHECK(cmd_id("a", "ls") != cmd_id("b", "ls"));
    CHECK(file_id("a", "/x", "f.log") != file_id("a", "/y", "f.log"));
    CHECK(path_id("a", "/x") != path_id("b", "/x"));
    CHECK(seq_id("a", {"ab", "c"}) != seq_id("a", {"a", "bc"}));
    CHECK(scope_id("a") != user_id("a"));
    CHECK(ip_id("10.0.0.1").find("10.0.0.1") != std::string::npos);
}

TEST_CASE("single command build") {
    Fixture f;
    f.sessions = {fixtures::session("s", {"ls"})};
    auto g     = build(f.inputs());
    CHECK(g.vertices().size() == 4);
    CHECK(g.count(Tag::cmd) == 1);
    const auto cmd = must_find(g, cmd_id("svc", "ls"));
    CHECK(g.vertex(cmd).n == 1);
    CHECK(g.vertex(cmd).value == "ls");

    f.sessions = {fixtures::session("s", {"cat /a/b.log"})};
    auto h     = build(f.inputs());
    CHECK(h.vertices().size() == 6);
    CHECK(h.count(Tag::file) == 1);
    CHECK(h.count(Tag::path) == 1);
    check_counts(h);
}

TEST_CASE("command counts split per user") {
    Fixture f;
    f.sessions = {fixtures::session("a1", {"df -h", "df -h"}, "A"), fixtures::session("a2", {"df -h"}, "A"),
                  fixtures::session("b1", {"df -h", "df -h"}, "B", "svc", "10.0.0.9")};
    auto g       = build(f.inputs());
    const auto c = must_find(g, cmd_id("svc", "df -h"));
    CHECK(g.vertex(c).n == 5);
    std::map<std::string, std::int64_t> per_user;
    for (const auto e : g.incident_edges(c)) {
        const auto& edge = g.edges()[e];
        if (edge.type == EdgeType::user_cmd) {
            per_user[g.vertex(edge.from).value] = edge.value;
        }
    }
    CHECK(per_user == std::map<std::string, std::int64_t>{{"A", 3}, {"B", 2}});
    auto hit = g.query_commands_by_value("svc", "df", "B", "10.0.0.9");
    REQUIRE(hit.size() == 1);
    CHECK(hit[0].user_n == 2);
    CHECK(hit[0].ip_n == 2);
    check_counts(g);
}

TEST_CASE("restart sequence") {
    const auto f   = restart_fixture();
    const auto g   = build(f.inputs());
    const auto seq = must_find(g, seq_id(kScope, kRestart));
    CHECK(g.vertex(seq).n == 8);
    CHECK(g.vertex(seq).sequence == kRestart);

    std::map<std::int64_t, std::string> positions;
    for (const auto e : g.incident_edges(seq)) {
        const auto& edge = g.edges()[e];
        if (edge.type == EdgeType::seq_cmd) {
            positions[edge.value] = g.vertex(edge.to).full_value;
        }
    }
    CHECK(positions == std::map<std::int64_t, std::string>{{1, kRestart[0]}, {2, kRestart[1]}, {3, kRestart[2]}, {4, kRestart[3]}});

    std::set<std::int64_t> sh;
    for (const auto& hit : g.query_sequences_by_cmd_value(kScope, "sh", "alice", "10.0.0.1")) {
        sh.insert(hit.position);
        CHECK(hit.user_n == 5);
        CHECK(hit.ip_n == 3);
    }
    CHECK(sh == std::set<std::int64_t>{2, 3});
    CHECK(g.query_sequences_by_cmd_value(kScope, "df").empty());
    check_counts(g);
}

TEST_CASE("repeated command inside a sequence yields one row per position") {
    Fixture f;
    const std::vector<std::string> s = {"tail /a/x.log", "sh /a/run.sh", "tail /a/x.log"};
    f.sessions = {fixtures::session("1", s), fixtures::session("2", s)};
    miner::SequencePattern p;
    p.commands = s;
    p.support  = 2;
    f.patterns = {p};
    auto g     = build(f.inputs());
    std::set<std::int64_t> pos;
    for (const auto& hit : g.query_sequences_by_cmd_value("svc", "tail")) {
        pos.insert(hit.position);
    }
    CHECK(pos == std::set<std::int64_t>{1, 3});
    check_counts(g);
}

TEST_CASE("prefix and execute queries") {
    Fixture f;
    f.sessions = {fixtures::session("1", {"cat /a/x.log", "cd /tmp", "ls", "/opt/run.sh"})};
    auto g     = build(f.inputs());
    CHECK(g.query_commands_by_prefix("svc", "").size() == g.count(Tag::cmd));
    auto ca = g.query_commands_by_prefix("svc", "ca");
    REQUIRE(ca.size() == 1);
    CHECK(g.vertex(ca[0].cmd).value == "cat");
    CHECK(g.query_commands_by_prefix("other", "").empty());
    auto ex = g.query_commands_execute("svc");
    REQUIRE(ex.size() == 1);
    CHECK(g.vertex(ex[0].cmd).full_value == "/opt/run.sh");
    CHECK(g.command_values("svc") == std::vector<std::string>{"cat", "cd", "execute", "ls"});
}

TEST_CASE("file queries agree over both routes") {
    Fixture f;
    f.sessions = {fixtures::session("1", {"cat /data/logs/result.log | grep error", "grep error /data/logs/result.log",
                                          "cat /data/logs/other.log", "ls /data/logs/"})};
    auto g    = build(f.inputs());
    auto hits = g.query_commands_by_file("svc", "/data/logs", "result.log");
    std::set<std::string> texts;
    for (const auto v : hits) {
        texts.insert(g.vertex(v).full_value);
    }
    CHECK(texts == std::set<std::string>{"cat /data/logs/result.log | grep error", "grep error /data/logs/result.log"});
    CHECK(g.query_commands_by_file_via_path("svc", "/data/logs", "result.log") == hits);
    CHECK(g.query_commands_by_file("svc", "/data/logs", "missing.log").empty());
    CHECK(g.query_commands_by_file_via_path("svc", "/data/logs", "missing.log").empty());

    // every file in a corpus graph: both routes agree
    const auto c  = corpus_fixture(3, 200);
    const auto cg = build(c.inputs());
    std::size_t files = 0;
    for (std::uint32_t v = 0; v < cg.vertices().size(); ++v) {
        const auto& x = cg.vertex(v);
        if (x.tag != Tag::file) {
            continue;
        }
        ++files;
        std::string path;
        for (const auto e : cg.incident_edges(v)) {
            const auto& edge = cg.edges()[e];
            if (edge.type == EdgeType::path_file) {
                path = cg.vertex(edge.from).value;
            }
        }
        const auto direct = cg.query_commands_by_file(x.scope, path, x.value);
        CHECK_FALSE(direct.empty());
        CHECK(cg.query_commands_by_file_via_path(x.scope, path, x.value) == direct);
    }
    CHECK(files > 10);
}

TEST_CASE("only file-accessing commands connect to files") {
    const auto c = corpus_fixture(5, 200);
    const auto g = build(c.inputs());
    for (const auto& e : g.edges()) {
        if (e.type == EdgeType::cmd_file || e.type == EdgeType::cmd_path) {
            const auto& cmd = g.vertex(e.from);
            auto        r   = parser::normalize_command(cmd.full_value, "/", parser::default_parse_config());
            REQUIRE(std::holds_alternative<parser::ParsedCommand>(r));
            CHECK(std::get<parser::ParsedCommand>(r).file.has_value());
        }
    }
    check_counts(g);
}

TEST_CASE("intent edges only where labeled; macros become sequences") {
    const auto f = restart_fixture();
    const auto g = build(f.inputs());
    std::size_t cmd_intent = 0, seq_intent = 0;
    for (const auto& e : g.edges()) {
        if (e.type == EdgeType::cmd_intent) {
            ++cmd_intent;
            CHECK(g.vertex(e.to).tag == Tag::intent);
        }
        if (e.type == EdgeType::seq_intent) {
            ++seq_intent;
            CHECK(g.vertex(e.to).value == "restart_service=Y");
        }
    }
    CHECK(cmd_intent == f.labels.size());
    CHECK(seq_intent == 1);

    auto bad = f;
    bad.macros.push_back({kScope, "other", {"sh /never/ran.sh"}, std::nullopt, 2});
    CHECK_THROWS_AS(build(bad.inputs()), BuildError);
}

TEST_CASE("build is deterministic") {
    const auto f = corpus_fixture(9, 200);
    CHECK(snapshot_serialize(build(f.inputs())) == snapshot_serialize(build(f.inputs())));
}

TEST_CASE("snapshot round-trip") {
    const KnowledgeGraph empty;
    CHECK(snapshot_deserialize(snapshot_serialize(empty)).structurally_equal(empty));

    const auto f    = corpus_fixture(1, 300);
    const auto g    = build(f.inputs());
    const auto path = std::filesystem::temp_directory_path() / "shellkg_graph_test.snap";
    snapshot_save(g, path);
    const auto back = snapshot_load(path);
    CHECK(back.structurally_equal(g));
    CHECK(back.metadata() == g.metadata());
    CHECK(snapshot_serialize(back) == snapshot_serialize(g));

    const auto bytes = snapshot_serialize(g);
    std::mt19937_64 rng(6);
    for (int i = 0; i < 20; ++i) {
        auto corrupt = bytes;
        corrupt[8 + rng() % (corrupt.size() - 8)] ^= static_cast<char>(1 + rng() % 255);
        CHECK_THROWS_AS(snapshot_deserialize(corrupt), SnapshotError);
    }
    CHECK_THROWS_AS(snapshot_deserialize(bytes.substr(0, bytes.size() / 2)), SnapshotError);
    CHECK_THROWS_AS(snapshot_deserialize("NOTASNAP"), SnapshotError);
    {
        std::ofstream out(path, std::ios::binary);
        out << bytes.substr(0, 100);
    }
    CHECK_THROWS_AS(snapshot_load(path), SnapshotError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(snapshot_load(path), SnapshotError);
}

TEST_CASE("large random graph round-trips") {
    std::mt19937_64 rng(12);
    Fixture         f;
    for (int s = 0; s < 1500; ++s) {
        std::vector<std::string> cmds;
        for (int k = 0; k < 6; ++k) {
            cmds.push_back("cat /d" + std::to_string(rng() % 400) + "/f" + std::to_string(rng() % 100) + ".log");
        }
        f.sessions.push_back(fixtures::session("s" + std::to_string(s), cmds, "u" + std::to_string(rng() % 20), "svc",
                                               "10.0.0." + std::to_string(rng() % 50)));
    }
    const auto g = build(f.inputs());
    CHECK(g.vertices().size() >= 10000);
    CHECK(snapshot_deserialize(snapshot_serialize(g)).structurally_equal(g));
}

TEST_CASE("incremental update equals a rebuild") {
    auto f = corpus_fixture(21, 300);
    const auto full = build(f.inputs());
    CHECK(apply_update(full, BuildInputs{}).structurally_equal(full));

    const std::size_t half = f.sessions.size() / 2;
    const std::vector<parser::Session> first(f.sessions.begin(), f.sessions.begin() + static_cast<std::ptrdiff_t>(half));
    const std::vector<parser::Session> second(f.sessions.begin() + static_cast<std::ptrdiff_t>(half), f.sessions.end());

    auto a     = f.inputs();
    a.sessions = first;
    auto base  = build(a);
    auto b     = f.inputs();
    b.sessions = second;
    const auto updated = apply_update(base, b);
    CHECK(updated.structurally_equal(full));
    check_counts(updated);
}

TEST_CASE("update adds overlapping counts") {
    Fixture f;
    f.sessions = {fixtures::session("1", {"df -h", "df -h"})};
    const auto base = build(f.inputs());
    Fixture    d;
    d.sessions = {fixtures::session("2", {"df -h", "free -m"})};
    const auto g = apply_update(base, d.inputs());
    CHECK(g.vertex(must_find(g, cmd_id("svc", "df -h"))).n == 3);
    CHECK(g.vertex(must_find(g, cmd_id("svc", "free -m"))).n == 1);
    check_counts(g);
}

TEST_CASE("schema views") {
    const auto f = restart_fixture();
    const auto g = build(f.inputs());
    const auto c = must_find(g, cmd_id(kScope, kRestart[1]));
    const auto p = g.vertex(c).props();
    CHECK(std::get<std::string>(p.at("value")) == "sh");
    CHECK(std::get<std::string>(p.at("full_value")) == kRestart[1]);
    CHECK(std::get<std::int64_t>(p.at("n")) == 8);
    for (const auto e : g.incident_edges(c)) {
        const auto& edge = g.edges()[e];
        const auto  name = edge_property_name(edge.type);
        if (!name.empty()) {
            CHECK(g.edge_props(edge).count(std::string(name)) == 1);
        }
    }
    CHECK(edge_property_name(EdgeType::seq_cmd) == "seq_cmd_ex");
    CHECK(edge_property_name(EdgeType::ip_cmd) == "IP_cmd_n");
    CHECK(edge_property_name(EdgeType::cmd_file).empty());
}
