#pragma once

#include "shellkg/graph.hpp"
#include "shellkg/parser.hpp"
#include "shellkg/recommender.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace shellkg::evaluator {

struct SessionReduction {
    double      avg      = 0.0;
    double      max      = 0.0;
    std::size_t sessions = 0;  // sessions with at least one raw command
};

/// Per session 1 - |processed| / |raw|, pairing sessions by id. A raw session
/// with no processed counterpart was dropped entirely and counts as 1.
SessionReduction cmdline_reduction(const std::vector<parser::Session>& raw, const std::vector<parser::Session>& processed);

struct FileCommand {
    std::string typed;  // what the user would type to get the recommendation
    std::string full;   // the recommended full command
};

/// Commands that access a file. The typed form is "<cmd_type> <file>", or just
/// the file name for scripts executed by path.
std::vector<FileCommand> file_commands(const std::vector<parser::Session>& sessions);

/// Average of 1 - |typed| / |full|, each term clamped at 0. Empty input gives 0.
double char_reduction(const std::vector<FileCommand>& commands);

struct WeightedSequence {
    std::size_t length = 0;
    double      weight = 0.0;
};

struct SequenceReduction {
    double      weighted_avg = 0.0;
    double      min          = 0.0;
    double      max          = 0.0;
    std::size_t sequences    = 0;
};

/// Support-weighted mean of 1 - 1 / |s| with its range.
SequenceReduction seq_reduction(const std::vector<WeightedSequence>& sequences);

/// Every seq vertex with its occurrence count as weight.
std::vector<WeightedSequence> graph_sequences(const graph::KnowledgeGraph& graph);

struct LatencyStats {
    std::size_t count  = 0;
    double      p50_ms = 0.0;
    double      p95_ms = 0.0;
    double      max_ms = 0.0;
};

/// Nearest-rank percentiles of the samples (milliseconds).
LatencyStats summarize(std::vector<double> samples_ms);

struct Workload {
    std::vector<recommender::CommandRequest>  commands;
    std::vector<recommender::SequenceRequest> sequences;
};

/// Requests drawn from the graph itself: command prefixes of random cmd
/// vertices and executed commands that start stored sequences.
Workload sample_workload(const graph::KnowledgeGraph& graph, std::size_t count, std::uint64_t seed);

/// Keys "command_uncached", "command_cached", "sequence"; empty for 0 iterations.
using LatencyReport = std::map<std::string, LatencyStats>;

/// Replays the workload `iterations` times spread over `parallelism` threads.
/// Each command request is timed once without cache, then again right after
/// priming the cache.
LatencyReport latency_report(const graph::KnowledgeGraph& graph,
                             const recommender::Weights&  weights,
                             const Workload&              workload,
                             std::size_t                  iterations,
                             std::size_t                  parallelism = 1);

}  // namespace shellkg::evaluator
