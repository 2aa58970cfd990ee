#pragma once

// Straightforward reference implementations used to cross-check the library.
// Nothing here calls into shellkg; each routine is written from the formula.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

using Seq = std::vector<std::string>;

// Every distinct subsequence of `t` with size in [lo, hi] that embeds with
// consecutive index distance <= g.
inline std::set<Seq> gap_subsequences(const Seq& t, std::size_t g, std::size_t lo, std::size_t hi) {
    std::set<Seq> out;
    Seq           cur;
    std::function<void(std::size_t)> extend = [&](std::size_t last) {
        if (cur.size() >= lo) {
            out.insert(cur);
        }
        if (cur.size() == hi) {
            return;
        }
        for (std::size_t r = last + 1; r < t.size() && r - last <= g; ++r) {
            cur.push_back(t[r]);
            extend(r);
            cur.pop_back();
        }
    };
    for (std::size_t start = 0; start < t.size(); ++start) {
        cur = {t[start]};
        extend(start);
    }
    return out;
}

inline bool contains_with_gap(const Seq& a, const Seq& b, std::size_t g) {
    if (a.empty()) {
        return true;
    }
    // try every embedding
    std::function<bool(std::size_t, std::size_t)> go = [&](std::size_t j, std::size_t last) {
        if (j == a.size()) {
            return true;
        }
        for (std::size_t r = last + 1; r < b.size() && r - last <= g; ++r) {
            if (b[r] == a[j] && go(j + 1, r)) {
                return true;
            }
        }
        return false;
    };
    for (std::size_t r = 0; r < b.size(); ++r) {
        if (b[r] == a[0] && go(1, r)) {
            return true;
        }
    }
    return false;
}

// Sequence -> support for every sequence with support / |D| >= theta.
inline std::map<Seq, std::size_t> mine(const std::vector<Seq>& db, double theta, std::size_t g, std::size_t lo, std::size_t hi) {
    std::map<Seq, std::size_t> counts;
    for (const auto& t : db) {
        for (const auto& s : gap_subsequences(t, g, lo, hi)) {
            ++counts[s];
        }
    }
    std::map<Seq, std::size_t> out;
    for (const auto& [s, c] : counts) {
        if (static_cast<double>(c) / static_cast<double>(db.size()) >= theta - 1e-9) {
            out.emplace(s, c);
        }
    }
    return out;
}

inline std::vector<std::string> tokens(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream        in(text);
    std::string               word;
    while (in >> word) {
        if (word[0] != '/') {
            out.push_back(word);
            continue;
        }
        std::string part;
        for (char c : word) {
            if (c == '/') {
                if (!part.empty()) {
                    out.push_back(part);
                }
                part.clear();
            } else {
                part += c;
            }
        }
        if (!part.empty()) {
            out.push_back(part);
        }
    }
    return out;
}

inline double jaccard_sim(const std::string& a, const std::string& b) {
    const auto ta = tokens(a);
    const auto tb = tokens(b);
    std::set<std::string> sa(ta.begin(), ta.end());
    std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) {
        return 1.0;
    }
    std::size_t inter = 0;
    for (const auto& x : sa) {
        inter += sb.count(x);
    }
    std::set<std::string> uni = sa;
    uni.insert(sb.begin(), sb.end());
    return static_cast<double>(inter) / static_cast<double>(uni.size());
}

inline double jaccard_dist(const std::string& a, const std::string& b) { return 1.0 - jaccard_sim(a, b); }

inline double sequence_distance(const Seq& x, const Seq& y) {
    const std::size_t m  = std::min(x.size(), y.size());
    const std::size_t mx = std::max(x.size(), y.size());
    double            sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sum += jaccard_dist(x[i], y[i]);
    }
    return (sum + static_cast<double>(mx - m)) / static_cast<double>(mx);
}

// Greedy pairing of equal bigrams: each bigram of `b` is used at most once.
inline double dice(const std::string& a, const std::string& b) {
    if (a.size() < 2 || b.size() < 2) {
        return a == b ? 1.0 : 0.0;
    }
    std::vector<std::string> ba, bb;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) {
        ba.push_back(a.substr(i, 2));
    }
    for (std::size_t i = 0; i + 1 < b.size(); ++i) {
        bb.push_back(b.substr(i, 2));
    }
    std::vector<bool> used(bb.size(), false);
    std::size_t       shared = 0;
    for (const auto& x : ba) {
        for (std::size_t j = 0; j < bb.size(); ++j) {
            if (!used[j] && bb[j] == x) {
                used[j] = true;
                ++shared;
                break;
            }
        }
    }
    return 2.0 * static_cast<double>(shared) / static_cast<double>(ba.size() + bb.size());
}

inline std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> std::size_t {
        if (i == 0) {
            return j;
        }
        if (j == 0) {
            return i;
        }
        auto it = memo.find({i, j});
        if (it != memo.end()) {
            return it->second;
        }
        const std::size_t v = std::min({d(i - 1, j) + 1, d(i, j - 1) + 1, d(i - 1, j - 1) + (a[i - 1] == b[j - 1] ? 0 : 1)});
        memo[{i, j}] = v;
        return v;
    };
    return d(a.size(), b.size());
}

using Matrix = std::vector<std::vector<double>>;

inline double silhouette(const Matrix& d, const std::vector<std::size_t>& label) {
    const std::size_t n = d.size();
    double            total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::map<std::size_t, std::pair<double, std::size_t>> per;  // cluster -> (sum, count)
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                auto& p = per[label[j]];
                p.first += d[i][j];
                p.second += 1;
            }
        }
        auto own = per.find(label[i]);
        if (own == per.end()) {
            continue;  // singleton
        }
        const double a = own->second.first / static_cast<double>(own->second.second);
        double       b = INFINITY;
        for (const auto& [c, p] : per) {
            if (c != label[i]) {
                b = std::min(b, p.first / static_cast<double>(p.second));
            }
        }
        const double m = std::max(a, b);
        total += m == 0.0 ? 0.0 : (b - a) / m;
    }
    return total / static_cast<double>(n);
}

inline double session_reduction(std::size_t raw, std::size_t processed) {
    return 1.0 - static_cast<double>(processed) / static_cast<double>(raw);
}

inline double weighted_seq_reduction(const std::vector<std::pair<std::size_t, double>>& len_weight) {
    double num = 0.0, den = 0.0;
    for (const auto& [len, w] : len_weight) {
        num += (1.0 - 1.0 / static_cast<double>(len)) * w;
        den += w;
    }
    return den == 0.0 ? 0.0 : num / den;
}

inline std::string random_word(std::mt19937_64& rng, const std::string& alphabet, std::size_t lo, std::size_t hi) {
    std::uniform_int_distribution<std::size_t> len(lo, hi);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    std::string                                 out;
    for (std::size_t i = 0, n = len(rng); i < n; ++i) {
        out += alphabet[pick(rng)];
    }
    return out;
}

// Small shell-like command over a tiny vocabulary so token overlaps happen.
inline std::string random_command(std::mt19937_64& rng) {
    static const std::vector<std::string> heads = {"cat", "vi", "grep", "tail", "ls", "sh"};
    static const std::vector<std::string> parts = {"data", "logs", "opt", "app", "run.log", "x.conf", "bin"};
    std::uniform_int_distribution<std::size_t> h(0, heads.size() - 1);
    std::uniform_int_distribution<std::size_t> p(0, parts.size() - 1);
    std::uniform_int_distribution<int>          count(0, 3);
    std::string                                 out = heads[h(rng)];
    for (int w = 0, n = count(rng); w < n; ++w) {
        out += ' ';
        if (rng() % 2 == 0) {
            out += parts[p(rng)];
        } else {
            for (int k = 0, segs = 1 + static_cast<int>(rng() % 3); k < segs; ++k) {
                out += '/' + parts[p(rng)];
            }
        }
    }
    return out;
}

}  // namespace oracle
