#include "shellkg/aggregator.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace shellkg::aggregator {

namespace {

using TokenSet = std::vector<std::uint32_t>;  // sorted, unique

double jaccard_of_sorted(const TokenSet& a, const TokenSet& b) {
    if (a.empty() && b.empty()) {
        return 0.0;
    }
    std::size_t shared = 0;
    auto        ia     = a.begin();
    auto        ib     = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++shared;
            ++ia;
            ++ib;
        }
    }
    const std::size_t united = a.size() + b.size() - shared;
    return 1.0 - static_cast<double>(shared) / static_cast<double>(united);
}

class TokenInterner {
  public:
    TokenSet intern(std::string_view command) {
        TokenSet out;
        for (auto& token : parser::tokenize(command)) {
            out.push_back(ids_.emplace(std::move(token), static_cast<std::uint32_t>(ids_.size())).first->second);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

  private:
    std::unordered_map<std::string, std::uint32_t> ids_;
};

double sequence_distance_sets(const std::vector<const TokenSet*>& x, const std::vector<const TokenSet*>& y) {
    const std::size_t shorter = std::min(x.size(), y.size());
    const std::size_t longer  = std::max(x.size(), y.size());
    double            sum     = 0.0;
    for (std::size_t i = 0; i < shorter; ++i) {
        sum += jaccard_of_sorted(*x[i], *y[i]);
    }
    return (sum + static_cast<double>(longer - shorter)) / static_cast<double>(longer);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// State of the eager swap search over medoid slots.
class MedoidSearch {
  public:
    MedoidSearch(const DistanceMatrix& d, std::vector<std::size_t> medoids)
      : d_(d), n_(d.size()), medoids_(std::move(medoids)), slot_of_(n_, -1), nearest_(n_), second_(n_),
        d_near_(n_), d_second_(n_) {
        for (std::size_t s = 0; s < medoids_.size(); ++s) {
            slot_of_[medoids_[s]] = static_cast<std::ptrdiff_t>(s);
        }
        for (std::size_t j = 0; j < n_; ++j) {
            rescan(j);
        }
    }

    double loss() const { return std::accumulate(d_near_.begin(), d_near_.end(), 0.0); }

    // Runs until n consecutive candidates yield no improving swap.
    void optimize(std::vector<double>& trace) {
        const std::size_t k = medoids_.size();
        if (k >= n_) {
            return;
        }
        std::vector<double> delta(k);
        std::size_t         since_swap = 0;
        std::size_t         candidate  = 0;
        const std::size_t   max_steps  = 200 * n_;
        for (std::size_t step = 0; step < max_steps && since_swap < n_; ++step, candidate = (candidate + 1) % n_) {
            ++since_swap;
            if (slot_of_[candidate] >= 0) {
                continue;
            }
            compute_removal_loss(delta);
            double acc = 0.0;
            for (std::size_t j = 0; j < n_; ++j) {
                const double dcj = d_(candidate, j);
                if (dcj < d_near_[j]) {
                    acc += dcj - d_near_[j];
                    delta[nearest_[j]] += d_near_[j] - d_second_[j];
                } else if (dcj < d_second_[j]) {
                    delta[nearest_[j]] += dcj - d_second_[j];
                }
            }
            const auto   best  = static_cast<std::size_t>(std::min_element(delta.begin(), delta.end()) - delta.begin());
            const double total = delta[best] + acc;
            if (total < -1e-12) {
                swap(best, candidate);
                trace.push_back(loss());
                since_swap = 0;
            }
        }
    }

    Clustering result(std::vector<double> trace) const {
        Clustering out;
        std::vector<std::size_t> order(medoids_.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return medoids_[a] < medoids_[b]; });
        std::vector<std::size_t> rank(medoids_.size());
        for (std::size_t r = 0; r < order.size(); ++r) {
            rank[order[r]] = r;
            out.medoids.push_back(medoids_[order[r]]);
        }
        out.assignment.resize(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            out.assignment[j] = rank[nearest_[j]];
        }
        out.loss       = loss();
        out.loss_trace = std::move(trace);
        return out;
    }

  private:
    void compute_removal_loss(std::vector<double>& removal) const {
        std::fill(removal.begin(), removal.end(), 0.0);
        for (std::size_t j = 0; j < n_; ++j) {
            removal[nearest_[j]] += d_second_[j] - d_near_[j];
        }
    }

    void rescan(std::size_t j) {
        double      best = kInf, runner = kInf;
        std::size_t best_slot = 0, runner_slot = 0;
        for (std::size_t s = 0; s < medoids_.size(); ++s) {
            const double dist = d_(medoids_[s], j);
            if (dist < best) {
                runner      = best;
                runner_slot = best_slot;
                best        = dist;
                best_slot   = s;
            } else if (dist < runner) {
                runner      = dist;
                runner_slot = s;
            }
        }
        nearest_[j]  = best_slot;
        d_near_[j]   = best;
        second_[j]   = runner_slot;
        d_second_[j] = runner;
        pin_medoid(j);
    }

    // A medoid always belongs to its own cluster, even when another medoid
    // sits at distance zero.
    void pin_medoid(std::size_t j) {
        if (slot_of_[j] < 0) {
            return;
        }
        const auto own = static_cast<std::size_t>(slot_of_[j]);
        if (nearest_[j] != own) {
            second_[j]   = nearest_[j];
            d_second_[j] = d_near_[j];
            nearest_[j]  = own;
            d_near_[j]   = 0.0;
        }
    }

    void swap(std::size_t slot, std::size_t candidate) {
        slot_of_[medoids_[slot]] = -1;
        medoids_[slot]           = candidate;
        slot_of_[candidate]      = static_cast<std::ptrdiff_t>(slot);
        for (std::size_t j = 0; j < n_; ++j) {
            if (nearest_[j] == slot || second_[j] == slot) {
                rescan(j);
                continue;
            }
            const double dcj = d_(candidate, j);
            if (dcj < d_near_[j]) {
                second_[j]   = nearest_[j];
                d_second_[j] = d_near_[j];
                nearest_[j]  = slot;
                d_near_[j]   = dcj;
            } else if (dcj < d_second_[j]) {
                second_[j]   = slot;
                d_second_[j] = dcj;
            }
            pin_medoid(j);
        }
    }

    const DistanceMatrix&       d_;
    std::size_t                 n_;
    std::vector<std::size_t>    medoids_;
    std::vector<std::ptrdiff_t> slot_of_;
    std::vector<std::size_t>    nearest_;
    std::vector<std::size_t>    second_;
    std::vector<double>         d_near_;
    std::vector<double>         d_second_;
};

}  // namespace

DistanceMatrix DistanceMatrix::from_dense(const std::vector<std::vector<double>>& dense) {
    const std::size_t n = dense.size();
    DistanceMatrix    m(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (dense[i].size() != n) {
            throw std::invalid_argument("distance matrix must be square");
        }
        if (dense[i][i] != 0.0) {
            throw std::invalid_argument("distance matrix diagonal must be zero");
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            if (dense[i][j] != dense[j][i]) {
                throw std::invalid_argument("distance matrix must be symmetric");
            }
            if (!(dense[i][j] >= 0.0 && dense[i][j] <= 1.0)) {
                throw std::invalid_argument("distance values must lie in [0, 1]");
            }
            m.set(i, j, dense[i][j]);
        }
    }
    return m;
}

double jaccard_distance(std::string_view a, std::string_view b) {
    TokenInterner interner;
    const auto    ta = interner.intern(a);
    const auto    tb = interner.intern(b);
    return jaccard_of_sorted(ta, tb);
}

double jaccard_distance(const parser::ParsedCommand& a, const parser::ParsedCommand& b) {
    return jaccard_distance(a.full_text, b.full_text);
}

double sequence_distance(const Sequence& x, const Sequence& y) {
    if (x.empty() || y.empty()) {
        throw std::invalid_argument("sequence_distance requires non-empty sequences");
    }
    TokenInterner                interner;
    std::vector<TokenSet>        xs, ys;
    std::vector<const TokenSet*> xp, yp;
    for (const auto& c : x) {
        xs.push_back(interner.intern(c));
    }
    for (const auto& c : y) {
        ys.push_back(interner.intern(c));
    }
    for (const auto& t : xs) {
        xp.push_back(&t);
    }
    for (const auto& t : ys) {
        yp.push_back(&t);
    }
    return sequence_distance_sets(xp, yp);
}

DistanceMatrix build_distance_matrix(const std::vector<Sequence>& patterns, std::size_t threads) {
    if (patterns.empty()) {
        throw std::invalid_argument("build_distance_matrix requires at least one pattern");
    }
    // Tokenize each distinct command once.
    TokenInterner                               interner;
    std::unordered_map<std::string, TokenSet>   cache;
    std::vector<std::vector<const TokenSet*>>   encoded(patterns.size());
    for (auto& c : patterns) {
        for (const auto& cmd : c) {
            if (!cache.contains(cmd)) {
                cache.emplace(cmd, interner.intern(cmd));
            }
        }
    }
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        if (patterns[i].empty()) {
            throw std::invalid_argument("build_distance_matrix: empty pattern");
        }
        for (const auto& cmd : patterns[i]) {
            encoded[i].push_back(&cache.at(cmd));
        }
    }

    const std::size_t n = patterns.size();
    DistanceMatrix    m(n);
    std::size_t       workers = threads != 0 ? threads : std::max(1U, std::thread::hardware_concurrency());
    workers                   = std::min(workers, n);
    // Rows are interleaved across workers; each worker writes disjoint cells.
    auto fill_rows = [&](std::size_t w) {
        for (std::size_t i = w; i < n; i += workers) {
            for (std::size_t j = i + 1; j < n; ++j) {
                m.set(i, j, sequence_distance_sets(encoded[i], encoded[j]));
            }
        }
    };
    if (workers <= 1) {
        fill_rows(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(fill_rows, w);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    return m;
}

Clustering cluster(const DistanceMatrix& matrix, std::size_t k, std::uint64_t seed) {
    const std::size_t n = matrix.size();
    if (k < 2) {
        throw std::invalid_argument("cluster: K must be >= 2");
    }
    if (k > n) {
        throw std::invalid_argument("cluster: K exceeds the number of points");
    }
    // Seeded Fisher-Yates; first k indices become the initial medoids.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::swap(order[i], order[rng() % (i + 1)]);
    }
    std::vector<std::size_t> initial(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));

    MedoidSearch        search(matrix, std::move(initial));
    std::vector<double> trace{search.loss()};
    search.optimize(trace);
    return search.result(std::move(trace));
}

double silhouette(const DistanceMatrix& matrix, const std::vector<std::size_t>& assignment) {
    const std::size_t n = matrix.size();
    if (assignment.size() != n) {
        throw std::invalid_argument("silhouette: assignment size mismatch");
    }
    if (n == 0) {
        return 0.0;
    }
    const std::size_t        k = *std::max_element(assignment.begin(), assignment.end()) + 1;
    std::vector<std::size_t> sizes(k, 0);
    for (const auto c : assignment) {
        ++sizes[c];
    }
    if (std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; }) < 2) {
        throw std::invalid_argument("silhouette requires at least two clusters");
    }

    double              total = 0.0;
    std::vector<double> sums(k);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t own = assignment[i];
        if (sizes[own] == 1) {
            continue;
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                sums[assignment[j]] += matrix(i, j);
            }
        }
        const double a = sums[own] / static_cast<double>(sizes[own] - 1);
        double       b = kInf;
        for (std::size_t c = 0; c < k; ++c) {
            if (c != own && sizes[c] > 0) {
                b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
            }
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

KGrid default_k_grid(std::size_t n) {
    KGrid grid;
    grid.k_min = 2;
    grid.k_max = n > 3 ? n - 1 : n;
    grid.step  = std::max<std::size_t>(1, n / 100);
    return grid;
}

std::size_t select_k(const DistanceMatrix& matrix, std::size_t k_min, std::size_t k_max, std::size_t step, std::uint64_t seed) {
    if (step == 0) {
        throw std::invalid_argument("select_k: step must be positive");
    }
    const std::size_t upper = std::min(k_max, matrix.size());
    if (k_min < 2 || k_min > upper) {
        throw std::invalid_argument("select_k: empty K grid");
    }
    std::size_t best_k     = k_min;
    double      best_score = -kInf;
    for (std::size_t k = k_min; k <= upper; k += step) {
        const auto   clustering = cluster(matrix, k, seed);
        const double score      = silhouette(matrix, clustering.assignment);
        if (score > best_score + 1e-12) {
            best_score = score;
            best_k     = k;
        }
    }
    return best_k;
}

std::vector<Macro> macro_registry_parse(std::string_view text) {
    std::vector<Macro>       out;
    std::vector<std::string> errors;
    std::istringstream       in{std::string(text)};
    std::string              line;
    std::size_t              line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            Macro      m;
            m.line   = line_no;
            m.scope  = j.at("scope").get<std::string>();
            m.intent = j.at("intent").get<std::string>();
            m.commands = j.at("commands").get<std::vector<std::string>>();
            if (j.contains("cluster") && !j.at("cluster").is_null()) {
                m.source_cluster = j.at("cluster").get<std::size_t>();
            }
            out.push_back(std::move(m));
        } catch (const nlohmann::json::exception& e) {
            errors.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!errors.empty()) {
        std::string message = "macro registry parse errors:";
        for (const auto& e : errors) {
            message += "\n  " + e;
        }
        throw MacroParseError(message);
    }
    return out;
}

std::vector<Macro> macro_registry_load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open macro registry " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return macro_registry_parse(buffer.str());
}

std::vector<Diagnostic> macro_registry_validate(const std::vector<Macro>& macros, const std::set<std::string>& known_scopes) {
    std::vector<Diagnostic>                                out;
    std::map<std::pair<std::string, std::string>, std::size_t> first_seen;
    for (std::size_t i = 0; i < macros.size(); ++i) {
        const auto& m    = macros[i];
        auto        flag = [&](std::string message) { out.push_back(Diagnostic{i, m.line, std::move(message)}); };
        if (m.intent.find_first_not_of(" \t") == std::string::npos) {
            flag("empty intent");
        }
        if (m.commands.empty()) {
            flag("macro has no commands");
        }
        if (std::any_of(m.commands.begin(), m.commands.end(), [](const std::string& c) {
                return c.find_first_not_of(" \t") == std::string::npos;
            })) {
            flag("empty command in macro");
        }
        if (!known_scopes.empty() && !known_scopes.contains(m.scope)) {
            flag("unknown scope '" + m.scope + "'");
        }
        const auto [it, inserted] = first_seen.emplace(std::make_pair(m.scope, m.intent), i);
        if (!inserted) {
            flag("duplicate intent '" + m.intent + "' in scope '" + m.scope + "' (first defined by macro " +
                 std::to_string(it->second) + ")");
        }
    }
    return out;
}

}  // namespace shellkg::aggregator
