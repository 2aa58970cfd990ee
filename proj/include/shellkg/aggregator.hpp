#pragma once

#include "shellkg/parser.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shellkg::aggregator {

using Sequence = std::vector<std::string>;

/// Symmetric matrix with zero diagonal, stored as the strict upper triangle.
class DistanceMatrix {
  public:
    DistanceMatrix() = default;
    explicit DistanceMatrix(std::size_t n) : n_(n), values_(n < 2 ? 0 : n * (n - 1) / 2, 0.0) {}

    /// Throws std::invalid_argument unless `dense` is square, symmetric,
    /// zero on the diagonal and bounded in [0, 1].
    static DistanceMatrix from_dense(const std::vector<std::vector<double>>& dense);

    [[nodiscard]] std::size_t size() const { return n_; }

    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
        if (i == j) {
            return 0.0;
        }
        return i < j ? values_[index(i, j)] : values_[index(j, i)];
    }

    void set(std::size_t i, std::size_t j, double value) {
        if (i == j) {
            return;
        }
        values_[i < j ? index(i, j) : index(j, i)] = value;
    }

  private:
    [[nodiscard]] std::size_t index(std::size_t i, std::size_t j) const { return i * n_ - i * (i + 1) / 2 + (j - i - 1); }

    std::size_t         n_ = 0;
    std::vector<double> values_;
};

double jaccard_distance(std::string_view a, std::string_view b);
double jaccard_distance(const parser::ParsedCommand& a, const parser::ParsedCommand& b);

/// Position-wise Jaccard distances plus the length difference, normalized by
/// the longer length.
double sequence_distance(const Sequence& x, const Sequence& y);

DistanceMatrix build_distance_matrix(const std::vector<Sequence>& patterns, std::size_t threads = 0);

struct Clustering {
    std::vector<std::size_t> assignment;  // point -> cluster id in [0, K)
    std::vector<std::size_t> medoids;     // cluster id -> medoid point, ascending
    double                   loss = 0.0;  // total distance to the assigned medoid
    std::vector<double>      loss_trace;  // loss after initialization and after every swap
};

/// K-medoids over a precomputed matrix: seeded random initialization followed
/// by eager best-swap passes until no swap improves the loss.
Clustering cluster(const DistanceMatrix& matrix, std::size_t k, std::uint64_t seed);

/// Mean silhouette; singleton clusters contribute 0 and 0/0 counts as 0.
double silhouette(const DistanceMatrix& matrix, const std::vector<std::size_t>& assignment);

/// K in {k_min, k_min + step, ...} <= k_max maximizing the silhouette; ties
/// go to the smaller K.
std::size_t select_k(const DistanceMatrix& matrix, std::size_t k_min, std::size_t k_max, std::size_t step, std::uint64_t seed);

/// Default scan: K from 2 to n - 1 stepping max(1, n / 100).
struct KGrid {
    std::size_t k_min = 2;
    std::size_t k_max = 2;
    std::size_t step  = 1;
};
KGrid default_k_grid(std::size_t n);

struct Macro {
    std::string                scope;
    std::string                intent;
    std::vector<std::string>   commands;
    std::optional<std::size_t> source_cluster;
    std::size_t                line = 0;  // 1-based line in the registry file, 0 if built in code
};

class MacroParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Newline-delimited {scope, intent, commands: [...], cluster?} objects.
/// Throws MacroParseError listing every offending line.
std::vector<Macro> macro_registry_load(const std::filesystem::path& path);
std::vector<Macro> macro_registry_parse(std::string_view text);

struct Diagnostic {
    std::size_t macro_index = 0;
    std::size_t line        = 0;
    std::string message;
};

std::vector<Diagnostic> macro_registry_validate(const std::vector<Macro>& macros, const std::set<std::string>& known_scopes);

}  // namespace shellkg::aggregator
