#include "fixtures.hpp"

#include "shellkg/corpus.hpp"
#include "shellkg/intents.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace shellkg;
using namespace shellkg::intents;

namespace {

parser::ParsedCommand cmd(std::string_view text) {
    auto r = parser::normalize_command(text, "/", parser::default_parse_config(), "u");
    REQUIRE(std::holds_alternative<parser::ParsedCommand>(r));
    return std::get<parser::ParsedCommand>(r);
}

}  // namespace

TEST_CASE("classify examples") {
    const auto rules = default_rules();
    auto       log   = classify(cmd("cat /x/logdir/run.log"), rules);
    REQUIRE(log);
    CHECK(log->intent_name == "log_analysis");
    CHECK(log->parameter == "run.log");
    CHECK(log->to_string() == "log_analysis run.log");

    auto df = classify(cmd("df -h"), rules);
    REQUIRE(df);
    CHECK(df->intent_name == "storage_analysis");
    CHECK_FALSE(df->parameter);

    CHECK_FALSE(classify(cmd("cat /x/readme"), rules));

    auto exec = classify(cmd("/opt/app/bin/start.sh"), rules);
    REQUIRE(exec);
    CHECK(exec->intent_name == "execute_script");
    CHECK(exec->parameter == "start.sh");

    auto conf = classify(cmd("vi /etc/app/app.properties"), rules);
    REQUIRE(conf);
    CHECK(conf->intent_name == "config_analysis");

    auto ps = classify(cmd("ps -ef"), rules);
    REQUIRE(ps);
    CHECK(ps->intent_name == "process_analysis");
}

TEST_CASE("rule validation and the intent vocabulary") {
    CHECK(kIntentNames.size() == 8);
    for (const auto name : kIntentNames) {
        CHECK(is_intent_name(name));
    }
    CHECK_FALSE(is_intent_name("restart_service"));
    IntentRule bad{"made_up", {}, {}, {}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK(parameter_kind("log_analysis") == ParameterKind::file_name);
    CHECK(parameter_kind("storage_analysis") == ParameterKind::none);
    CHECK(parameter_kind("process_analysis") == ParameterKind::process_name);
}

TEST_CASE("file intents bind the accessed file and require one") {
    const std::vector<IntentRule> rules = {{"log_analysis", {}, {".log"}, {}}};
    CHECK_FALSE(classify(cmd("ls /var/x.log/"), rules));
    auto hit = classify(cmd("tail -f /var/a.log"), rules);
    REQUIRE(hit);
    CHECK(hit->parameter == "a.log");
}

TEST_CASE("unclear iff no rule predicate fires; first match wins") {
    const auto rules = default_rules();
    corpus::CorpusConfig cc;
    cc.sessions = 150;
    cc.planted  = 2;
    const auto c = corpus::generate(cc);
    const auto sessions = parser::process_sessions(parser::parse_log(c.events).sessions, parser::default_parse_config());
    std::size_t checked = 0;
    for (const auto& s : sessions) {
        for (const auto& e : s.events) {
            const auto label = classify(e, rules);
            const auto first = std::find_if(rules.begin(), rules.end(), [&](const IntentRule& r) { return rule_matches(r, e); });
            CHECK(label.has_value() == (first != rules.end()));
            if (label) {
                CHECK(label->intent_name == first->intent_name);
                CHECK(classify(e, rules) == label);
            }
            ++checked;
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("permuting non-overlapping rules keeps labels") {
    const std::vector<IntentRule> rules = {
        {"log_analysis", {}, {".log"}, {}},
        {"config_analysis", {}, {".conf"}, {}},
        {"storage_analysis", {"df", "du"}, {}, {}},
        {"network_analysis", {"netstat", "ping"}, {}, {}},
    };
    const std::vector<std::string> cmds = {"cat /a/x.log", "vi /a/y.conf", "df -h", "ping 10.0.0.1", "ls"};
    auto                           perm = rules;
    std::mt19937_64                rng(2);
    for (int i = 0; i < 10; ++i) {
        std::shuffle(perm.begin(), perm.end(), rng);
        for (const auto& t : cmds) {
            CHECK(classify(cmd(t), perm) == classify(cmd(t), rules));
        }
    }
}

TEST_CASE("distribution report") {
    const auto rules = default_rules();
    auto       empty = classify_corpus({}, rules);
    CHECK(empty.total == 0);
    CHECK(empty.percentages.empty());

    auto logs = classify_corpus({cmd("cat /a/x.log"), cmd("tail /b/y.log")}, rules);
    CHECK(logs.counts.at("log_analysis") == 2);
    CHECK(logs.percentages.at("log_analysis") == doctest::Approx(100.0));

    auto mixed = classify_corpus({cmd("cat /a/x.log"), cmd("df -h"), cmd("cat /x/readme")}, rules);
    double sum = 0.0;
    for (const auto& [k, v] : mixed.percentages) {
        sum += v;
    }
    CHECK(sum == doctest::Approx(100.0));
    CHECK(mixed.unclear == 1);
}

TEST_CASE("synthetic corpus commands are all labeled as generated") {
    corpus::CorpusConfig cc;
    const auto c = corpus::generate(cc);
    const auto sessions = parser::process_sessions(parser::parse_log(c.events).sessions, parser::default_parse_config());
    const auto rules = default_rules();
    std::size_t labeled = 0, total = 0;
    for (const auto& s : sessions) {
        for (const auto& e : s.events) {
            auto it = c.intents.find(e.full_text);
            if (it == c.intents.end()) {
                continue;
            }
            ++total;
            const auto got = classify(e, rules);
            if (got && got->intent_name == it->second) {
                ++labeled;
            } else {
                MESSAGE("mislabeled: " << e.full_text);
            }
        }
    }
    CHECK(total > 500);
    CHECK(labeled == total);
}

TEST_CASE("rules file round-trip") {
    const auto rules = default_rules();
    const auto back  = parse_rules(dump_rules(rules));
    REQUIRE(back.size() == rules.size());
    for (std::size_t i = 0; i < rules.size(); ++i) {
        CHECK(back[i].intent_name == rules[i].intent_name);
        CHECK(back[i].command_set == rules[i].command_set);
        CHECK(back[i].extension_patterns == rules[i].extension_patterns);
        CHECK(back[i].path_patterns == rules[i].path_patterns);
    }
    CHECK_THROWS(parse_rules(R"({"intent": "nonsense"})"));
}
