#include "shellkg/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_map>

namespace shellkg::evaluator {

SessionReduction cmdline_reduction(const std::vector<parser::Session>& raw, const std::vector<parser::Session>& processed) {
    std::unordered_map<std::string, std::size_t> kept;
    for (const auto& s : processed) {
        kept[s.session_id] = s.events.size();
    }
    SessionReduction out;
    double           sum = 0.0;
    for (const auto& s : raw) {
        if (s.events.empty()) {
            continue;
        }
        const auto        it = kept.find(s.session_id);
        const std::size_t y  = it == kept.end() ? 0 : it->second;
        const double      r  = 1.0 - static_cast<double>(y) / static_cast<double>(s.events.size());
        sum += r;
        out.max = std::max(out.max, r);
        ++out.sessions;
    }
    if (out.sessions > 0) {
        out.avg = sum / static_cast<double>(out.sessions);
    }
    return out;
}

std::vector<FileCommand> file_commands(const std::vector<parser::Session>& sessions) {
    std::vector<FileCommand> out;
    for (const auto& s : sessions) {
        for (const auto& e : s.events) {
            if (!e.file) {
                continue;
            }
            const std::string typed = e.cmd_type == parser::kExecute ? *e.file : e.cmd_type + " " + *e.file;
            out.push_back(FileCommand{typed, e.full_text});
        }
    }
    return out;
}

double char_reduction(const std::vector<FileCommand>& commands) {
    if (commands.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (const auto& c : commands) {
        if (c.full.empty()) {
            continue;
        }
        sum += std::max(0.0, 1.0 - static_cast<double>(c.typed.size()) / static_cast<double>(c.full.size()));
    }
    return sum / static_cast<double>(commands.size());
}

SequenceReduction seq_reduction(const std::vector<WeightedSequence>& sequences) {
    SequenceReduction out;
    double            num = 0.0;
    double            den = 0.0;
    for (const auto& s : sequences) {
        if (s.length == 0) {
            continue;
        }
        const double r = 1.0 - 1.0 / static_cast<double>(s.length);
        if (out.sequences == 0) {
            out.min = out.max = r;
        } else {
            out.min = std::min(out.min, r);
            out.max = std::max(out.max, r);
        }
        ++out.sequences;
        num += s.weight * r;
        den += s.weight;
    }
    if (den > 0.0) {
        out.weighted_avg = num / den;
    }
    return out;
}

std::vector<WeightedSequence> graph_sequences(const graph::KnowledgeGraph& graph) {
    std::vector<WeightedSequence> out;
    for (const auto& v : graph.vertices()) {
        if (v.tag == graph::Tag::seq) {
            out.push_back(WeightedSequence{v.sequence.size(), static_cast<double>(v.n)});
        }
    }
    return out;
}

Workload sample_workload(const graph::KnowledgeGraph& graph, std::size_t count, std::uint64_t seed) {
    Workload                   w;
    std::vector<std::uint32_t> cmds;
    std::vector<std::uint32_t> entries;
    for (std::uint32_t i = 0; i < graph.vertices().size(); ++i) {
        if (graph.vertex(i).tag == graph::Tag::cmd) {
            cmds.push_back(i);
        }
    }
    for (const auto& e : graph.edges()) {
        if (e.type == graph::EdgeType::seq_cmd) {
            entries.push_back(e.to);
        }
    }
    if (cmds.empty()) {
        return w;
    }
    std::mt19937_64 rng(seed);
    const auto      pick = [&](const std::vector<std::uint32_t>& from) {
        return from[std::uniform_int_distribution<std::size_t>(0, from.size() - 1)(rng)];
    };
    // Some user and IP that executed the command.
    const auto identity = [&](std::uint32_t cmd) {
        std::pair<std::string, std::string> who;
        for (const auto e : graph.incident_edges(cmd)) {
            const auto& edge = graph.edges()[e];
            if (edge.type == graph::EdgeType::user_cmd && who.first.empty()) {
                who.first = graph.vertex(edge.from).value;
            } else if (edge.type == graph::EdgeType::ip_cmd && who.second.empty()) {
                who.second = graph.vertex(edge.from).value;
            }
        }
        return who;
    };
    for (std::size_t i = 0; i < count; ++i) {
        const auto  c         = pick(cmds);
        const auto& v         = graph.vertex(c);
        const auto [user, ip] = identity(c);
        const auto len        = std::uniform_int_distribution<std::size_t>(std::min<std::size_t>(v.full_value.size(), 2), v.full_value.size())(rng);
        w.commands.push_back(recommender::CommandRequest{v.full_value.substr(0, len), user, ip, v.scope, 5});
        if (!entries.empty()) {
            const auto  e          = pick(entries);
            const auto& ev         = graph.vertex(e);
            const auto [eu, eip]   = identity(e);
            w.sequences.push_back(recommender::SequenceRequest{ev.full_value, eu, eip, ev.scope, 5, std::nullopt});
        }
    }
    return w;
}

LatencyStats summarize(std::vector<double> samples) {
    LatencyStats out;
    out.count = samples.size();
    if (samples.empty()) {
        return out;
    }
    std::sort(samples.begin(), samples.end());
    const auto rank = [&](double q) {
        const auto r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
        return samples[std::clamp<std::size_t>(r, 1, samples.size()) - 1];
    };
    out.p50_ms = rank(0.50);
    out.p95_ms = rank(0.95);
    out.max_ms = samples.back();
    return out;
}

LatencyReport latency_report(const graph::KnowledgeGraph& graph,
                             const recommender::Weights&  weights,
                             const Workload&              workload,
                             std::size_t                  iterations,
                             std::size_t                  parallelism) {
    LatencyReport report;
    if (iterations == 0 || (workload.commands.empty() && workload.sequences.empty())) {
        return report;
    }
    parallelism = std::max<std::size_t>(1, parallelism);
    recommender::CommandCache cache;
    std::mutex                mutex;
    std::vector<double>       uncached, cached, sequence;

    const auto elapsed_ms = [](auto start) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    };
    const auto worker = [&](std::size_t first) {
        std::vector<double> u, c, s;
        for (std::size_t it = first; it < iterations; it += parallelism) {
            for (const auto& req : workload.commands) {
                auto start = std::chrono::steady_clock::now();
                recommender::recommend_commands(req, graph, weights);
                u.push_back(elapsed_ms(start));
                recommender::recommend_commands(req, graph, weights, &cache);
                start = std::chrono::steady_clock::now();
                recommender::recommend_commands(req, graph, weights, &cache);
                c.push_back(elapsed_ms(start));
            }
            for (const auto& req : workload.sequences) {
                const auto start = std::chrono::steady_clock::now();
                recommender::recommend_sequences(req, graph, weights);
                s.push_back(elapsed_ms(start));
            }
        }
        const std::lock_guard lock(mutex);
        uncached.insert(uncached.end(), u.begin(), u.end());
        cached.insert(cached.end(), c.begin(), c.end());
        sequence.insert(sequence.end(), s.begin(), s.end());
    };
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < parallelism; ++t) {
        threads.emplace_back(worker, t);
    }
    worker(0);
    for (auto& t : threads) {
        t.join();
    }
    if (!workload.commands.empty()) {
        report["command_uncached"] = summarize(std::move(uncached));
        report["command_cached"]   = summarize(std::move(cached));
    }
    if (!workload.sequences.empty()) {
        report["sequence"] = summarize(std::move(sequence));
    }
    return report;
}

}  // namespace shellkg::evaluator
