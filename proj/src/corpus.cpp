#include "shellkg/corpus.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <stdexcept>

namespace shellkg::corpus {

namespace {

using Rng = std::mt19937_64;

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool chance(Rng& rng, double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
    return items[uniform(rng, 0, items.size() - 1)];
}

const std::string kBase = "/opt/hw/app/";

// A command that may touch `dir/file`. Rendered either with the absolute
// path or, after a cd into `dir`, with the bare file name.
struct Template {
    std::string prefix;  // e.g. "tail -n 200"
    std::string dir;     // empty when the command takes no file
    std::string file;
    std::string suffix;  // e.g. "| grep ERROR"
    std::string intent;

    std::string absolute() const {
        std::string out = prefix;
        if (!file.empty()) {
            out += " " + dir + "/" + file;
        }
        if (!suffix.empty()) {
            out += " " + suffix;
        }
        return out;
    }
    std::string relative() const {
        std::string out = prefix;
        if (!file.empty()) {
            out += " " + file;
        }
        if (!suffix.empty()) {
            out += " " + suffix;
        }
        return out;
    }
};

std::string normalized(const std::string& raw, const parser::ParseConfig& cfg) {
    const auto result = parser::normalize_command(raw, "/", cfg, "root");
    if (const auto* cmd = std::get_if<parser::ParsedCommand>(&result)) {
        return cmd->full_text;
    }
    throw std::logic_error("generator produced an unparseable template: " + raw);
}

std::vector<Template> scope_templates(const std::string& scope, bool demo) {
    const std::string base = kBase + scope;
    const std::string logs = base + "/logs";
    const std::string conf = base + "/conf";
    const std::string bin  = base + "/bin";
    const std::string src  = base + "/src";
    std::string       proc = scope;
    std::transform(proc.begin(), proc.end(), proc.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    std::vector<Template> t;
    std::vector<std::string> log_files = {"error.log", "access.log", "gc.log", "debug.log", "audit.log"};
    if (!demo) {
        log_files.push_back("run.log");
    }
    for (const auto& f : log_files) {
        t.push_back({"cat", logs, f, "", "log_analysis"});
        t.push_back({"tail -n 200", logs, f, "", "log_analysis"});
        t.push_back({"grep -i exception", logs, f, "", "log_analysis"});
        t.push_back({"less", logs, f, "", "log_analysis"});
    }
    for (const auto& f : {"app.properties", "server.xml", "db.conf", "cache.yaml"}) {
        if (demo && std::string(f) == "app.properties") {
            continue;
        }
        t.push_back({"cat", conf, f, "", "config_analysis"});
        t.push_back({"vi", conf, f, "", "config_analysis"});
    }
    for (const auto& f : {"status.sh", "backup.sh", "healthcheck.sh"}) {
        t.push_back({"sh", bin, f, "", "execute_script"});
    }
    if (!demo) {
        t.push_back({"sh", bin, "start.sh", "", "execute_script"});
        t.push_back({"sh", bin, "stop.sh", "", "execute_script"});
        t.push_back({"ps -ef | grep " + proc, "", "", "", "process_analysis"});
    }
    for (const auto& f : {"Main.java", "handler.py"}) {
        t.push_back({"cat", src, f, "", "code_analysis"});
    }
    t.push_back({"ps -ef | grep java", "", "", "", "process_analysis"});
    t.push_back({"top -b -n 1", "", "", "", "process_analysis"});
    t.push_back({"jps -l", "", "", "", "process_analysis"});
    t.push_back({"netstat -anp | grep 8080", "", "", "", "network_analysis"});
    t.push_back({"ping -c 3 10.0.0.1", "", "", "", "network_analysis"});
    t.push_back({"curl http://localhost:8080/health", "", "", "", "network_analysis"});
    t.push_back({"df -h", "", "", "", "storage_analysis"});
    t.push_back({"du -sh " + logs, "", "", "", "storage_analysis"});
    t.push_back({"crontab -l", "", "", "", "crontab_analysis"});
    if (demo) {
        t.push_back({"cat", "/opt/hw/configuration/logs", "result.log", "", "log_analysis"});
        t.push_back({"cat", logs, "run.log", "| grep ERROR", "log_analysis"});
        t.push_back({"tail -f", logs, "run.log", "", "log_analysis"});
    }
    return t;
}

const std::vector<std::string> kScopeNames = {
    "PaymentGateway", "OrderCenter", "UserProfile", "BillingCore", "SearchIndex", "MessageBus", "InventorySync", "ReportEngine",
};

struct SessionPlan {
    std::string              scope;
    std::size_t              user = 0;
    std::string              ip;
    std::vector<std::string> planted;  // raw texts inserted contiguously
};

}  // namespace

void CorpusConfig::validate() const {
    if (scopes == 0 || users == 0 || ips == 0 || sessions == 0) {
        throw std::invalid_argument("corpus: scopes, users, ips and sessions must be positive");
    }
    if (min_session_len == 0 || min_session_len > max_session_len) {
        throw std::invalid_argument("corpus: invalid session length range");
    }
    if (plant_min_len < 2 || plant_min_len > plant_max_len) {
        throw std::invalid_argument("corpus: planted length range must start at 2 or more");
    }
    if (plant_min_support == 0 || plant_min_support > plant_max_support) {
        throw std::invalid_argument("corpus: invalid planted support range");
    }
    for (const double p : {cd_rate, error_rate, rare_rate}) {
        if (p < 0.0 || p > 1.0) {
            throw std::invalid_argument("corpus: rates must lie in [0, 1]");
        }
    }
}

std::vector<std::string> demo_restart_sequence() {
    const std::string base = kBase + std::string(kDemoScope);
    return {"cat " + base + "/conf/app.properties", "sh " + base + "/bin/stop.sh", "sh " + base + "/bin/start.sh",
            "cat " + base + "/logs/run.log"};
}

std::vector<std::string> demo_check_stop_sequence() {
    const std::string base = kBase + std::string(kDemoScope);
    return {"sh " + base + "/bin/stop.sh", "ps -ef | grep onlineservicerlx"};
}

Corpus generate(const CorpusConfig& cfg) {
    cfg.validate();
    Rng                       rng(cfg.seed);
    const auto                parse_cfg = parser::default_parse_config();
    Corpus                    corpus;

    std::vector<std::string> scopes;
    for (std::size_t i = 0; i < cfg.scopes; ++i) {
        scopes.push_back(kScopeNames[i % kScopeNames.size()] + (i < kScopeNames.size() ? "" : std::to_string(i / kScopeNames.size())));
    }
    const std::size_t plain_scopes = scopes.size();
    if (cfg.demo_scope) {
        scopes.emplace_back(kDemoScope);
    }
    std::vector<std::string> users;
    for (std::size_t i = 0; i < cfg.users; ++i) {
        users.push_back("sre" + std::string(i + 1 < 10 ? "0" : "") + std::to_string(i + 1));
    }
    std::vector<std::string> ips;
    for (std::size_t i = 0; i < cfg.ips; ++i) {
        ips.push_back("10.20." + std::to_string(i / 250) + "." + std::to_string(i % 250 + 1));
    }
    // Each user works from a couple of hosts.
    std::vector<std::vector<std::string>> user_ips(users.size());
    for (auto& list : user_ips) {
        const auto k = uniform(rng, 1, std::min<std::size_t>(3, ips.size()));
        for (std::size_t j = 0; j < k; ++j) {
            list.push_back(pick(rng, ips));
        }
    }
    std::map<std::string, std::vector<Template>> templates;
    for (const auto& s : scopes) {
        templates[s] = scope_templates(s, s == kDemoScope);
        for (const auto& t : templates[s]) {
            corpus.intents[normalized(t.absolute(), parse_cfg)] = t.intent;
        }
    }

    std::vector<SessionPlan> plans(cfg.sessions);
    std::map<std::string, std::vector<std::size_t>> by_scope;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        plans[i].scope = scopes[i % scopes.size()];
        plans[i].user  = uniform(rng, 0, users.size() - 1);
        plans[i].ip    = pick(rng, user_ips[plans[i].user]);
        by_scope[plans[i].scope].push_back(i);
    }
    std::map<std::string, std::vector<std::size_t>> free_sessions = by_scope;
    for (auto& [scope, list] : free_sessions) {
        std::shuffle(list.begin(), list.end(), rng);
    }
    const auto plant = [&](const std::string& scope, const std::vector<std::string>& raw, std::size_t support) {
        auto& pool = free_sessions[scope];
        if (pool.size() < support) {
            throw std::invalid_argument("corpus: scope " + scope + " has too few sessions for a planted support of " +
                                        std::to_string(support));
        }
        for (std::size_t j = 0; j < support; ++j) {
            plans[pool.back()].planted = raw;
            pool.pop_back();
        }
        PlantedSequence truth{scope, {}, support};
        for (const auto& r : raw) {
            truth.commands.push_back(normalized(r, parse_cfg));
        }
        corpus.planted.push_back(std::move(truth));
    };

    const std::vector<std::string> step_forms = {"sh {d}/step{j}.sh", "cat {d}/conf/step{j}.properties", "tail -n 50 {d}/logs/step{j}.log",
                                                 "grep -i error {d}/logs/step{j}.log", "vi {d}/conf/step{j}.yaml"};
    for (std::size_t i = 0; i < cfg.planted; ++i) {
        const auto& scope = scopes[i % plain_scopes];
        const auto  len   = uniform(rng, cfg.plant_min_len, cfg.plant_max_len);
        const auto  dir   = "/srv/ops/" + scope + "/op" + std::to_string(i);
        std::vector<std::string> raw;
        for (std::size_t j = 0; j < len; ++j) {
            std::string form = pick(rng, step_forms);
            form.replace(form.find("{d}"), 3, dir);
            form.replace(form.find("{j}"), 3, std::to_string(j));
            raw.push_back(form);
        }
        plant(scope, raw, uniform(rng, cfg.plant_min_support, cfg.plant_max_support));
    }
    if (cfg.demo_scope) {
        const auto restart    = demo_restart_sequence();
        const auto check_stop = demo_check_stop_sequence();
        plant(std::string(kDemoScope), restart, std::min<std::size_t>(14, by_scope[std::string(kDemoScope)].size() / 2));
        plant(std::string(kDemoScope), check_stop, std::min<std::size_t>(10, free_sessions[std::string(kDemoScope)].size()));
        corpus.intents[normalized(restart[0], parse_cfg)]    = "config_analysis";
        corpus.intents[normalized(restart[1], parse_cfg)]    = "execute_script";
        corpus.intents[normalized(restart[2], parse_cfg)]    = "execute_script";
        corpus.intents[normalized(restart[3], parse_cfg)]    = "log_analysis";
        corpus.intents[normalized(check_stop[1], parse_cfg)] = "process_analysis";
    }

    std::size_t rare_counter = 0;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto&  plan = plans[i];
        const auto&  user = users[plan.user];
        const auto&  tpl  = templates[plan.scope];
        std::int64_t ts   = cfg.start_ts + static_cast<std::int64_t>(i) * 3'600'000 + static_cast<std::int64_t>(uniform(rng, 0, 600'000));
        const auto   emit = [&](std::string command) {
            corpus.events.push_back(parser::RawEvent{std::move(command), plan.scope, user, ts});
            ts += static_cast<std::int64_t>(uniform(rng, 2'000, 60'000));
        };

        emit("ssh " + (chance(rng, 0.5) ? user + "@" : std::string()) + plan.ip);
        const auto len      = uniform(rng, cfg.min_session_len, cfg.max_session_len);
        const auto plant_at = uniform(rng, 0, len);
        for (std::size_t slot = 0; slot <= len; ++slot) {
            if (slot == plant_at) {
                for (const auto& c : plan.planted) {
                    emit(c);
                }
            }
            if (slot == len) {
                break;
            }
            if (chance(rng, cfg.error_rate)) {
                static const std::vector<std::string> broken = {"cta /etc/hosts", "gerp -r ERROR .", "grep \"unterminated /var/log/messages",
                                                                "ps -ef |", "sl -l", "tial -f nohup.out"};
                emit(pick(rng, broken));
                continue;
            }
            if (chance(rng, cfg.rare_rate)) {
                emit("cat /tmp/scratch_" + std::to_string(cfg.seed) + "_" + std::to_string(rare_counter++) + ".txt");
                continue;
            }
            const auto& t = pick(rng, tpl);
            if (!t.file.empty() && chance(rng, cfg.cd_rate)) {
                // Same command reached through a working-directory change.
                emit("cd " + t.dir);
                emit(t.relative());
                if (chance(rng, 0.5)) {
                    emit(chance(rng, 0.5) ? "cd .." : "cd -");
                }
                continue;
            }
            emit(t.absolute());
        }
    }
    return corpus;
}

ScaleCorpus generate_scale(std::uint64_t seed, std::size_t min_commands, std::size_t min_sequences, std::size_t scopes) {
    if (scopes == 0) {
        throw std::invalid_argument("generate_scale: scopes must be positive");
    }
    Rng        rng(seed);
    const auto cfg = parser::default_parse_config();

    // Weighted toward log reading, as in real operations.
    const std::vector<std::pair<std::string, std::string>> forms = {
        {"cat", "log"},   {"cat", "log"},  {"cat", "properties"}, {"cat", "log"}, {"tail -n 100", "log"}, {"tail -f", "out"},
        {"grep -i error", "log"}, {"grep timeout", "log"}, {"vi", "conf"}, {"less", "log"}, {"head -n 20", "csv"},
        {"sh", "sh"},     {"rm -f", "tmp"}, {"cp", "bak"}, {"more", "txt"}, {"vim", "yaml"},
    };
    const std::vector<std::string> no_file = {"ps -ef | grep worker", "df -h", "free -m", "netstat -anp | grep ", "jstack ", "du -sh /data/"};

    ScaleCorpus out;
    const std::size_t per_scope = (min_commands + scopes - 1) / scopes;
    std::size_t       session_no = 0;
    for (std::size_t s = 0; s < scopes; ++s) {
        const std::string scope = "LoadScope" + std::to_string(s);
        std::vector<parser::ParsedCommand> commands;
        std::set<std::string>              seen;
        while (commands.size() < per_scope) {
            std::string raw;
            const auto  k = commands.size();
            if (k % 20 == 19) {
                raw = pick(rng, no_file) + std::to_string(k);
            } else {
                const auto& [prefix, ext] = pick(rng, forms);
                raw = prefix + " /data/" + scope + "/svc" + std::to_string(uniform(rng, 0, 40)) + "/mod" + std::to_string(uniform(rng, 0, 30)) +
                      "/f" + std::to_string(k) + "." + ext;
            }
            const auto result = parser::normalize_command(raw, "/", cfg, "root");
            const auto* cmd   = std::get_if<parser::ParsedCommand>(&result);
            if (cmd != nullptr && seen.insert(cmd->full_text).second) {
                commands.push_back(*cmd);
            }
        }
        // Every command appears at least once, many more than once.
        std::vector<std::size_t> order(commands.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size();) {
            const auto     len = uniform(rng, 6, 14);
            parser::Session session;
            session.scope      = scope;
            session.user       = "user" + std::to_string(uniform(rng, 0, 49));
            session.ip         = "10.1." + std::to_string(uniform(rng, 0, 3)) + "." + std::to_string(uniform(rng, 1, 60));
            session.session_id = "load" + std::to_string(session_no++);
            session.start_ts   = 1'700'000'000'000 + static_cast<std::int64_t>(session_no) * 60'000;
            for (std::size_t j = 0; j < len; ++j) {
                const auto idx = start < order.size() && j % 3 != 2 ? order[start++] : uniform(rng, 0, commands.size() - 1);
                auto       ev  = commands[idx];
                ev.ts          = session.start_ts + static_cast<std::int64_t>(j) * 1000;
                ev.day         = parser::utc_day(ev.ts);
                session.events.push_back(std::move(ev));
            }
            session.end_ts = session.events.back().ts;
            out.sessions.push_back(std::move(session));
        }
    }

    std::set<miner::Sequence> sequences;
    while (sequences.size() < min_sequences) {
        const auto& session = pick(rng, out.sessions);
        const auto  len     = uniform(rng, 2, std::min<std::size_t>(6, session.events.size()));
        const auto  start   = uniform(rng, 0, session.events.size() - len);
        miner::Sequence seq;
        for (std::size_t j = 0; j < len; ++j) {
            seq.push_back(session.events[start + j].full_text);
        }
        sequences.insert(std::move(seq));
    }
    for (const auto& seq : sequences) {
        out.patterns.push_back(miner::SequencePattern{seq, 1, 0.0, 1, 1});
    }
    return out;
}

}  // namespace shellkg::corpus
