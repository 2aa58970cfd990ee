#include "shellkg/aggregator.hpp"
#include "shellkg/corpus.hpp"
#include "shellkg/evaluator.hpp"
#include "shellkg/graph.hpp"
#include "shellkg/intents.hpp"
#include "shellkg/io.hpp"
#include "shellkg/miner.hpp"
#include "shellkg/parser.hpp"
#include "shellkg/recommender.hpp"
#include "shellkg/service.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

using namespace shellkg;
using nlohmann::json;

namespace {

service::Service* g_running = nullptr;

void on_signal(int) {
    if (g_running != nullptr) {
        g_running->stop();
    }
}

json stats_json(const evaluator::LatencyStats& s) {
    return json{{"count", s.count}, {"p50_ms", s.p50_ms}, {"p95_ms", s.p95_ms}, {"max_ms", s.max_ms}};
}

std::vector<intents::IntentRule> rules_from(const std::string& path) {
    return path.empty() ? intents::default_rules() : intents::load_rules(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shell-operation knowledge graph: mining pipeline and recommendation service"};
    app.require_subcommand(1);

    // gen-corpus
    corpus::CorpusConfig gen_cfg;
    std::string          gen_out   = "events.ndjson";
    std::string          gen_truth;
    bool                 gen_no_demo = false;
    auto*                gen = app.add_subcommand("gen-corpus", "Write a synthetic labeled event log with planted operations");
    gen->add_option("--seed", gen_cfg.seed, "Random seed");
    gen->add_option("--sessions", gen_cfg.sessions, "Number of sessions");
    gen->add_option("--scopes", gen_cfg.scopes, "Number of ordinary scopes");
    gen->add_option("--users", gen_cfg.users, "Number of users");
    gen->add_option("--ips", gen_cfg.ips, "Number of source IPs");
    gen->add_option("--planted", gen_cfg.planted, "Planted operations outside the demo scope");
    gen->add_option("--plant-min-support", gen_cfg.plant_min_support);
    gen->add_option("--plant-max-support", gen_cfg.plant_max_support);
    gen->add_flag("--no-demo", gen_no_demo, "Omit the OnlineServiceRLX demo scope");
    gen->add_option("-o,--out", gen_out, "Event log (NDJSON)");
    gen->add_option("--truth", gen_truth, "Planted sequences and intended intents (JSON)");

    // ingest
    std::string ingest_events;
    std::string ingest_out     = "sessions.ndjson";
    std::string ingest_raw_out = "sessions_raw.ndjson";
    std::size_t ingest_min_supp = 2;
    auto*       ingest = app.add_subcommand("ingest", "Split an event log into sessions and normalize commands");
    ingest->add_option("--events", ingest_events, "Event log (NDJSON)")->required()->check(CLI::ExistingFile);
    ingest->add_option("-o,--out", ingest_out, "Processed sessions (NDJSON)");
    ingest->add_option("--raw-out", ingest_raw_out, "Sessions before normalization (NDJSON)");
    ingest->add_option("--min-supp", ingest_min_supp, "Drop commands seen in fewer sessions");

    // mine
    std::string           mine_sessions;
    std::string           mine_out = "patterns.ndjson";
    miner::MiningConfig   mine_cfg;
    std::optional<double> mine_theta;
    std::optional<std::size_t> mine_min_count;
    bool                  mine_no_collapse = false;
    bool                  mine_raw = false;
    auto*                 mine = app.add_subcommand("mine", "Mine gap-constrained frequent command sequences");
    mine->add_option("--sessions,--input", mine_sessions, "Processed sessions (NDJSON)")->required()->check(CLI::ExistingFile);
    mine->add_option("-o,--out", mine_out, "Patterns (NDJSON)");
    auto* theta_opt = mine->add_option("--theta", mine_theta, "Minimum frequency; default: two sessions");
    mine->add_option("--min-count", mine_min_count, "Minimum number of sessions instead of a frequency")->excludes(theta_opt);
    mine->add_option("--gap", mine_cfg.max_gap, "Maximum gap between consecutive commands");
    mine->add_option("--min-size", mine_cfg.min_size);
    mine->add_option("--max-size", mine_cfg.max_size);
    mine->add_option("--min-users", mine_cfg.min_users);
    mine->add_option("--min-days", mine_cfg.min_days);
    mine->add_option("--redundancy", mine_cfg.redundancy_r, "Redundancy ratio r");
    mine->add_option("--threads", mine_cfg.threads);
    mine->add_flag("--no-collapse", mine_no_collapse, "Keep consecutive repeated commands");
    mine->add_flag("--unfiltered", mine_raw, "Skip thresholds, collapse and redundancy filtering");

    // aggregate
    std::string                aggregate_patterns;
    std::string                aggregate_out = "clusters.ndjson";
    std::string                aggregate_k = "auto";
    std::optional<std::size_t> aggregate_k_min, aggregate_k_max, aggregate_k_step;
    std::uint64_t              aggregate_seed = 1;
    auto*                      aggregate = app.add_subcommand("aggregate", "Cluster mined sequences with k-medoids");
    aggregate->add_option("--patterns", aggregate_patterns, "Patterns (NDJSON)")->required()->check(CLI::ExistingFile);
    aggregate->add_option("-o,--out", aggregate_out, "Cluster assignment (NDJSON)");
    aggregate->add_option("--k", aggregate_k, "Number of clusters, or 'auto' for the best silhouette");
    aggregate->add_option("--k-min", aggregate_k_min);
    aggregate->add_option("--k-max", aggregate_k_max);
    aggregate->add_option("--k-step", aggregate_k_step);
    aggregate->add_option("--seed", aggregate_seed);

    // classify
    std::string classify_sessions;
    std::string classify_rules;
    std::string classify_out = "labels.ndjson";
    bool        classify_report = false;
    auto*       classify = app.add_subcommand("classify", "Label commands with intents and report the distribution");
    classify->add_option("--sessions", classify_sessions, "Processed sessions (NDJSON)")->required()->check(CLI::ExistingFile);
    classify->add_option("--rules", classify_rules, "Intent rules (NDJSON); default: built-in rules")->check(CLI::ExistingFile);
    classify->add_option("-o,--out", classify_out, "Labels (NDJSON)");
    classify->add_flag("--report", classify_report, "Print the intent distribution");

    // build-graph
    std::string build_sessions, build_patterns, build_macros, build_labels, build_rules, build_base;
    std::string build_out = "graph.snap";
    std::size_t build_gap = 5;
    auto*       build = app.add_subcommand("build-graph", "Build or update the knowledge graph snapshot");
    build->add_option("--sessions", build_sessions, "Processed sessions (NDJSON)")->required()->check(CLI::ExistingFile);
    build->add_option("--patterns", build_patterns, "Patterns (NDJSON)")->check(CLI::ExistingFile);
    build->add_option("--macros", build_macros, "Macro registry (NDJSON)")->check(CLI::ExistingFile);
    auto* labels_opt = build->add_option("--labels", build_labels, "Intent labels (NDJSON)")->check(CLI::ExistingFile);
    build->add_option("--rules", build_rules, "Classify with these rules when no labels are given")->excludes(labels_opt)->check(CLI::ExistingFile);
    build->add_option("--gap", build_gap, "Gap used to count sequence occurrences");
    build->add_option("--base", build_base, "Existing snapshot to update with these sessions")->check(CLI::ExistingFile);
    build->add_option("-o,--out", build_out, "Snapshot file");

    // eval
    std::string eval_graph, eval_raw, eval_processed, eval_weights;
    std::string eval_out        = "report.ndjson";
    std::size_t eval_iterations = 10;
    std::size_t eval_requests   = 50;
    std::size_t eval_threads    = 1;
    auto*       eval = app.add_subcommand("eval", "Estimate efficiency gains and measure recommendation latency");
    eval->add_option("--graph", eval_graph, "Snapshot file")->required()->check(CLI::ExistingFile);
    eval->add_option("--sessions-raw", eval_raw, "Sessions before normalization (NDJSON)")->required()->check(CLI::ExistingFile);
    eval->add_option("--sessions-processed", eval_processed, "Processed sessions (NDJSON)")->required()->check(CLI::ExistingFile);
    eval->add_option("--weights", eval_weights, "Weights (JSON)");
    eval->add_option("--iterations", eval_iterations, "Latency replays of the workload; 0 skips latency");
    eval->add_option("--requests", eval_requests, "Requests per replay");
    eval->add_option("--threads", eval_threads, "Concurrent latency workers");
    eval->add_option("-o,--out", eval_out, "Report (NDJSON)");

    // serve
    std::string                serve_config;
    std::optional<std::string> serve_snapshot, serve_host, serve_weights;
    std::optional<int>         serve_port;
    auto*                      serve = app.add_subcommand("serve", "Serve recommendations over HTTP");
    serve->add_option("--config", serve_config, "Service config (JSON)")->check(CLI::ExistingFile);
    serve->add_option("--snapshot", serve_snapshot, "Snapshot file");
    serve->add_option("--host", serve_host);
    serve->add_option("--port", serve_port);
    serve->add_option("--weights", serve_weights, "Weights (JSON)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            gen_cfg.demo_scope = !gen_no_demo;
            const auto c       = corpus::generate(gen_cfg);
            io::write_ndjson(gen_out, c.events);
            if (!gen_truth.empty()) {
                json planted = json::array();
                for (const auto& p : c.planted) {
                    planted.push_back(json{{"scope", p.scope}, {"commands", p.commands}, {"support", p.support}});
                }
                std::ofstream(gen_truth) << json{{"planted", planted}, {"intents", c.intents}}.dump(2) << '\n';
            }
            std::cout << "wrote " << c.events.size() << " events, " << c.planted.size() << " planted operations\n";
        } else if (*ingest) {
            auto       log = parser::parse_log(io::read_ndjson<parser::RawEvent>(ingest_events));
            auto       cfg = parser::default_parse_config();
            cfg.min_supp   = ingest_min_supp;
            const auto processed = parser::process_sessions(log.sessions, cfg);
            io::write_ndjson(ingest_raw_out, log.sessions);
            io::write_ndjson(ingest_out, processed);
            std::size_t commands = 0;
            for (const auto& s : processed) {
                commands += s.events.size();
            }
            std::cout << log.sessions.size() << " sessions (" << processed.size() << " after filtering, " << commands << " commands); "
                      << log.malformed_ssh << " malformed ssh lines, " << log.orphan_events << " commands before any ssh\n";
        } else if (*mine) {
            const auto sessions = io::read_ndjson<parser::Session>(mine_sessions);
            if (mine_theta) {
                mine_cfg.theta = *mine_theta;
            } else if (mine_min_count) {
                mine_cfg.theta = std::min(1.0, static_cast<double>(*mine_min_count) / static_cast<double>(std::max<std::size_t>(1, sessions.size())));
            } else {
                mine_cfg.theta = miner::default_mining_config(sessions.size()).theta;
            }
            mine_cfg.collapse_repeats = !mine_no_collapse;
            auto patterns             = miner::mine(sessions, mine_cfg);
            const auto mined          = patterns.size();
            if (!mine_raw) {
                patterns = miner::post_filter(std::move(patterns), sessions, mine_cfg);
            }
            io::write_ndjson(mine_out, patterns);
            std::cout << mined << " frequent sequences, " << patterns.size() << " written (min support "
                      << miner::min_support_count(mine_cfg.theta, sessions.size()) << " sessions)\n";
        } else if (*aggregate) {
            const auto patterns = io::read_ndjson<miner::SequencePattern>(aggregate_patterns);
            std::vector<aggregator::Sequence> seqs;
            for (const auto& p : patterns) {
                seqs.push_back(p.commands);
            }
            if (seqs.size() < 3) {
                throw std::runtime_error("need at least 3 patterns to cluster");
            }
            const auto matrix = aggregator::build_distance_matrix(seqs);
            std::size_t k     = 0;
            if (aggregate_k != "auto") {
                k = std::stoul(aggregate_k);
            } else {
                auto grid = aggregator::default_k_grid(seqs.size());
                grid.k_min = aggregate_k_min.value_or(grid.k_min);
                grid.k_max = aggregate_k_max.value_or(grid.k_max);
                grid.step  = aggregate_k_step.value_or(grid.step);
                k          = aggregator::select_k(matrix, grid.k_min, grid.k_max, grid.step, aggregate_seed);
            }
            const auto clustering = aggregator::cluster(matrix, k, aggregate_seed);
            const auto score      = aggregator::silhouette(matrix, clustering.assignment);
            std::vector<json> rows;
            for (std::size_t i = 0; i < patterns.size(); ++i) {
                const auto c = clustering.assignment[i];
                rows.push_back(json{{"cluster", c},
                                    {"medoid", clustering.medoids[c] == i},
                                    {"commands", patterns[i].commands},
                                    {"support", patterns[i].support}});
            }
            io::write_ndjson_values(aggregate_out, rows);
            std::cout << "K=" << k << " silhouette=" << score << " loss=" << clustering.loss << "\n";
        } else if (*classify) {
            const auto sessions = io::read_ndjson<parser::Session>(classify_sessions);
            const auto rules    = rules_from(classify_rules);
            io::write_ndjson(classify_out, graph::label_commands(sessions, rules));
            std::vector<parser::ParsedCommand> commands;
            for (const auto& s : sessions) {
                commands.insert(commands.end(), s.events.begin(), s.events.end());
            }
            const auto report = intents::classify_corpus(commands, rules);
            std::cout << "labeled " << report.total - report.unclear << " of " << report.total << " commands\n";
            if (classify_report) {
                std::cout << json{{"total", report.total}, {"unclear", report.unclear}, {"counts", report.counts}, {"percentages", report.percentages}}.dump(2)
                          << "\n";
            }
        } else if (*build) {
            const auto sessions = io::read_ndjson<parser::Session>(build_sessions);
            const auto patterns = build_patterns.empty() ? std::vector<miner::SequencePattern>{} : io::read_ndjson<miner::SequencePattern>(build_patterns);
            const auto macros   = build_macros.empty() ? std::vector<aggregator::Macro>{} : aggregator::macro_registry_load(build_macros);
            const auto labels   = build_labels.empty() ? graph::label_commands(sessions, rules_from(build_rules))
                                                       : io::read_ndjson<graph::LabeledCommand>(build_labels);
            graph::BuildInputs in;
            in.sessions = sessions;
            in.patterns = patterns;
            in.macros   = macros;
            in.labels   = labels;
            in.max_gap  = build_gap;
            const auto g = build_base.empty() ? graph::build(in) : graph::apply_update(graph::snapshot_load(build_base), in);
            graph::snapshot_save(g, build_out);
            std::cout << g.vertices().size() << " vertices, " << g.edges().size() << " edges (" << g.count(graph::Tag::cmd) << " cmd, "
                      << g.count(graph::Tag::seq) << " seq)\n";
        } else if (*eval) {
            const auto g         = graph::snapshot_load(eval_graph);
            const auto raw       = io::read_ndjson<parser::Session>(eval_raw);
            const auto processed = io::read_ndjson<parser::Session>(eval_processed);
            const auto weights   = eval_weights.empty() ? recommender::Weights{} : recommender::load_weights(eval_weights);
            const auto cmdline   = evaluator::cmdline_reduction(raw, processed);
            const auto chars     = evaluator::char_reduction(evaluator::file_commands(processed));
            const auto seqs      = evaluator::seq_reduction(evaluator::graph_sequences(g));
            std::vector<json> report;
            report.push_back(json{{"metric", "cmdline_reduction"}, {"avg", cmdline.avg}, {"max", cmdline.max}, {"sessions", cmdline.sessions}});
            report.push_back(json{{"metric", "char_reduction"}, {"avg", chars}});
            report.push_back(json{{"metric", "seq_reduction"},
                                  {"weighted_avg", seqs.weighted_avg},
                                  {"min", seqs.min},
                                  {"max", seqs.max},
                                  {"sequences", seqs.sequences}});
            if (eval_iterations > 0) {
                const auto workload = evaluator::sample_workload(g, eval_requests, 1);
                for (const auto& [path, stats] : evaluator::latency_report(g, weights, workload, eval_iterations, eval_threads)) {
                    auto row      = stats_json(stats);
                    row["metric"] = "latency_" + path;
                    report.push_back(row);
                }
            }
            io::write_ndjson_values(eval_out, report);
            for (const auto& row : report) {
                std::cout << row.dump() << "\n";
            }
        } else if (*serve) {
            service::ServiceConfig cfg = serve_config.empty() ? service::ServiceConfig{} : service::ServiceConfig::load(serve_config);
            cfg.apply_env();
            if (serve_snapshot) {
                cfg.snapshot = *serve_snapshot;
            }
            if (serve_host) {
                cfg.host = *serve_host;
            }
            if (serve_port) {
                cfg.port = *serve_port;
            }
            if (serve_weights) {
                cfg.weights = *serve_weights;
            }
            service::Service svc(cfg);
            try {
                svc.load_snapshot();
            } catch (const std::exception& e) {
                std::cerr << "shellkg serve: cannot start without a snapshot: " << e.what() << "\n";
                return 2;
            }
            g_running = &svc;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "serving on " << cfg.host << ":" << cfg.port << std::endl;
            if (!svc.listen()) {
                std::cerr << "shellkg serve: cannot listen on " << cfg.host << ":" << cfg.port << "\n";
                return 2;
            }
        }
    } catch (const graph::BuildError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
