#include "shellkg/miner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace shellkg::miner {

namespace {

using Item = std::uint32_t;

// Integer-coded view of the dataset. Item ids follow lexicographic order of
// the command strings.
struct EncodedDataset {
    std::vector<std::string>       items;
    std::vector<std::vector<Item>> sequences;
    std::vector<std::uint32_t>     session_user;
    std::vector<std::uint32_t>     session_day;
};

EncodedDataset encode(const std::vector<parser::Session>& dataset) {
    EncodedDataset                     enc;
    std::map<std::string_view, Item>   ids;
    std::map<std::string_view, std::uint32_t> users;
    std::map<std::string, std::uint32_t>      days;
    for (const auto& s : dataset) {
        for (const auto& e : s.events) {
            ids.emplace(e.full_text, 0);
        }
    }
    Item next = 0;
    for (auto& [text, id] : ids) {
        id = next++;
        enc.items.emplace_back(text);
    }
    enc.sequences.reserve(dataset.size());
    for (const auto& s : dataset) {
        std::vector<Item> seq;
        seq.reserve(s.events.size());
        for (const auto& e : s.events) {
            seq.push_back(ids.at(e.full_text));
        }
        enc.sequences.push_back(std::move(seq));
        enc.session_user.push_back(users.emplace(s.user, static_cast<std::uint32_t>(users.size())).first->second);
        enc.session_day.push_back(days.emplace(s.day(), static_cast<std::uint32_t>(days.size())).first->second);
    }
    return enc;
}

struct Projection {
    std::uint32_t              session;
    std::vector<std::uint32_t> ends;  // sorted positions where the prefix can end
};

class Miner {
  public:
    Miner(const EncodedDataset& data, const MiningConfig& cfg, std::size_t min_count)
      : data_(data), cfg_(cfg), min_count_(min_count) {}

    std::vector<Projection> root_projection(Item item) const {
        std::vector<Projection> out;
        for (std::uint32_t s = 0; s < data_.sequences.size(); ++s) {
            const auto& seq = data_.sequences[s];
            Projection  p{s, {}};
            for (std::uint32_t r = 0; r < seq.size(); ++r) {
                if (seq[r] == item) {
                    p.ends.push_back(r);
                }
            }
            if (!p.ends.empty()) {
                out.push_back(std::move(p));
            }
        }
        return out;
    }

    std::vector<Item> frequent_items() const {
        std::vector<std::size_t>   counts(data_.items.size(), 0);
        std::vector<std::uint32_t> stamp(data_.items.size(), UINT32_MAX);
        for (std::uint32_t s = 0; s < data_.sequences.size(); ++s) {
            for (const Item item : data_.sequences[s]) {
                if (stamp[item] != s) {
                    stamp[item] = s;
                    ++counts[item];
                }
            }
        }
        std::vector<Item> out;
        for (Item i = 0; i < counts.size(); ++i) {
            if (counts[i] >= min_count_) {
                out.push_back(i);
            }
        }
        return out;
    }

    void search(std::vector<Item>& prefix, const std::vector<Projection>& projected, std::vector<SequencePattern>& out) {
        if (prefix.size() >= cfg_.min_size) {
            emit(prefix, projected, out);
        }
        if (prefix.size() >= cfg_.max_size) {
            return;
        }

        // Sessions per extension item, counting each session once.
        std::unordered_map<Item, std::size_t>   counts;
        std::unordered_map<Item, std::uint32_t> stamp;
        for (const auto& p : projected) {
            const auto& seq = data_.sequences[p.session];
            std::size_t from = 0;
            for (const auto end : p.ends) {
                from            = std::max<std::size_t>(from, end + 1);
                const auto last = std::min<std::size_t>(seq.size(), end + cfg_.max_gap + 1);
                for (std::size_t r = from; r < last; ++r) {
                    auto [it, inserted] = stamp.try_emplace(seq[r], p.session);
                    if (inserted || it->second != p.session) {
                        it->second = p.session;
                        ++counts[seq[r]];
                    }
                }
                from = std::max(from, last);
            }
        }
        std::vector<Item> extensions;
        for (const auto& [item, count] : counts) {
            if (count >= min_count_) {
                extensions.push_back(item);
            }
        }
        std::sort(extensions.begin(), extensions.end());

        for (const Item item : extensions) {
            std::vector<Projection> next;
            next.reserve(projected.size());
            for (const auto& p : projected) {
                const auto& seq = data_.sequences[p.session];
                Projection  q{p.session, {}};
                std::size_t k = 0;  // index of the latest end before r
                for (std::size_t r = p.ends.front() + 1; r < seq.size(); ++r) {
                    while (k + 1 < p.ends.size() && p.ends[k + 1] < r) {
                        ++k;
                    }
                    if (p.ends[k] < r && r - p.ends[k] <= cfg_.max_gap && seq[r] == item) {
                        q.ends.push_back(static_cast<std::uint32_t>(r));
                    }
                }
                if (!q.ends.empty()) {
                    next.push_back(std::move(q));
                }
            }
            prefix.push_back(item);
            search(prefix, next, out);
            prefix.pop_back();
        }
    }

  private:
    void emit(const std::vector<Item>& prefix, const std::vector<Projection>& projected, std::vector<SequencePattern>& out) const {
        SequencePattern pattern;
        pattern.commands.reserve(prefix.size());
        for (const Item i : prefix) {
            pattern.commands.push_back(data_.items[i]);
        }
        pattern.support   = projected.size();
        pattern.frequency = static_cast<double>(pattern.support) / static_cast<double>(data_.sequences.size());
        std::unordered_set<std::uint32_t> users;
        std::unordered_set<std::uint32_t> days;
        for (const auto& p : projected) {
            users.insert(data_.session_user[p.session]);
            days.insert(data_.session_day[p.session]);
        }
        pattern.user_count = users.size();
        pattern.day_count  = days.size();
        out.push_back(std::move(pattern));
    }

    const EncodedDataset& data_;
    const MiningConfig&   cfg_;
    std::size_t           min_count_;
};

struct Stats {
    std::size_t support = 0;
    std::size_t users   = 0;
    std::size_t days    = 0;
};

Stats recount(const std::vector<parser::Session>& dataset, const Sequence& s, std::size_t g) {
    Stats                           stats;
    std::unordered_set<std::string> users;
    std::unordered_set<std::string> days;
    for (const auto& session : dataset) {
        if (is_subsequence_with_gap(s, commands_of(session), g)) {
            ++stats.support;
            users.insert(session.user);
            days.insert(session.day());
        }
    }
    stats.users = users.size();
    stats.days  = days.size();
    return stats;
}

}  // namespace

void MiningConfig::validate() const {
    if (!(theta > 0.0 && theta <= 1.0)) {
        throw std::invalid_argument("theta must lie in (0, 1]");
    }
    if (max_gap < 1) {
        throw std::invalid_argument("max_gap must be >= 1");
    }
    if (min_size < 2 || min_size > max_size) {
        throw std::invalid_argument("sizes must satisfy 2 <= min_size <= max_size");
    }
    if (!(redundancy_r > 0.0 && redundancy_r < 1.0)) {
        throw std::invalid_argument("redundancy_r must lie in (0, 1)");
    }
}

MiningConfig default_mining_config(std::size_t dataset_size) {
    MiningConfig cfg;
    cfg.theta = dataset_size == 0 ? 1.0 : std::min(1.0, 2.0 / static_cast<double>(dataset_size));
    return cfg;
}

std::vector<std::string> commands_of(const parser::Session& session) {
    std::vector<std::string> out;
    out.reserve(session.events.size());
    for (const auto& e : session.events) {
        out.push_back(e.full_text);
    }
    return out;
}

std::size_t support(const std::vector<parser::Session>& dataset, const Sequence& s, std::size_t g) {
    return static_cast<std::size_t>(std::count_if(dataset.begin(), dataset.end(), [&](const parser::Session& session) {
        return is_subsequence_with_gap(s, commands_of(session), g);
    }));
}

std::size_t min_support_count(double theta, std::size_t dataset_size) {
    // frequency >= theta  <=>  support >= theta * |D|; the epsilon absorbs
    // rounding when theta was itself computed as k / |D|.
    const double bound = theta * static_cast<double>(dataset_size);
    const auto   count = static_cast<std::size_t>(std::ceil(bound - 1e-9));
    return std::max<std::size_t>(1, count);
}

void sort_patterns(std::vector<SequencePattern>& patterns) {
    std::sort(patterns.begin(), patterns.end(), [](const SequencePattern& a, const SequencePattern& b) {
        if (a.support != b.support) {
            return a.support > b.support;
        }
        if (a.commands.size() != b.commands.size()) {
            return a.commands.size() > b.commands.size();
        }
        return a.commands < b.commands;
    });
}

std::vector<SequencePattern> mine(const std::vector<parser::Session>& dataset, const MiningConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) {
        throw std::invalid_argument("mine: dataset is empty");
    }
    const auto data      = encode(dataset);
    const auto min_count = min_support_count(cfg.theta, dataset.size());

    Miner      miner(data, cfg, min_count);
    const auto roots = miner.frequent_items();

    std::size_t workers = cfg.threads != 0 ? cfg.threads : std::max(1U, std::thread::hardware_concurrency());
    workers             = std::min<std::size_t>(workers, std::max<std::size_t>(1, roots.size()));

    std::atomic<std::size_t>                  next_root{0};
    std::vector<std::vector<SequencePattern>> partial(workers);
    auto                                      work = [&](std::size_t w) {
        Miner local(data, cfg, min_count);
        for (std::size_t i = next_root++; i < roots.size(); i = next_root++) {
            std::vector<Item> prefix{roots[i]};
            local.search(prefix, local.root_projection(roots[i]), partial[w]);
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work, w);
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    std::vector<SequencePattern> out;
    for (auto& p : partial) {
        std::move(p.begin(), p.end(), std::back_inserter(out));
    }
    sort_patterns(out);
    return out;
}

std::vector<SequencePattern> post_filter(std::vector<SequencePattern>        patterns,
                                         const std::vector<parser::Session>& dataset,
                                         const MiningConfig&                 cfg) {
    const auto passes_thresholds = [&](const SequencePattern& p) {
        return p.user_count >= cfg.min_users && p.day_count >= cfg.min_days;
    };
    std::erase_if(patterns, [&](const SequencePattern& p) { return !passes_thresholds(p); });

    if (cfg.collapse_repeats) {
        const auto min_count = dataset.empty() ? 1 : min_support_count(cfg.theta, dataset.size());
        // (collapsed sequence) -> (pattern, original sequence) keeping max support,
        // ties resolved towards the lexicographically smaller original.
        std::map<Sequence, std::pair<SequencePattern, Sequence>> merged;
        for (auto& p : patterns) {
            Sequence original = p.commands;
            Sequence collapsed;
            std::unique_copy(p.commands.begin(), p.commands.end(), std::back_inserter(collapsed));
            if (collapsed.size() != p.commands.size()) {
                if (collapsed.size() < cfg.min_size) {
                    continue;
                }
                const auto stats = recount(dataset, collapsed, cfg.max_gap);
                p.commands       = collapsed;
                p.support        = stats.support;
                p.frequency      = dataset.empty() ? 0.0 : static_cast<double>(stats.support) / static_cast<double>(dataset.size());
                p.user_count     = stats.users;
                p.day_count      = stats.days;
                if (p.support < min_count || !passes_thresholds(p)) {
                    continue;
                }
            }
            auto it = merged.find(p.commands);
            if (it == merged.end()) {
                Sequence key = p.commands;
                merged.emplace(std::move(key), std::make_pair(std::move(p), std::move(original)));
            } else if (p.support > it->second.first.support ||
                       (p.support == it->second.first.support && original < it->second.second)) {
                it->second = std::make_pair(std::move(p), std::move(original));
            }
        }
        patterns.clear();
        for (auto& [key, value] : merged) {
            patterns.push_back(std::move(value.first));
        }
    }

    // Redundancy: drop a when a longer surviving b contains it (w.r.t. the gap)
    // with f(b) >= r * f(a).
    std::unordered_map<std::string_view, std::vector<std::size_t>> by_item;
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        std::unordered_set<std::string_view> seen;
        for (const auto& c : patterns[i].commands) {
            if (seen.insert(c).second) {
                by_item[c].push_back(i);
            }
        }
    }
    std::vector<char> redundant(patterns.size(), 0);
    for (std::size_t a = 0; a < patterns.size(); ++a) {
        const auto& pa = patterns[a];
        for (const std::size_t b : by_item[pa.commands.front()]) {
            const auto& pb = patterns[b];
            if (pb.commands.size() <= pa.commands.size()) {
                continue;
            }
            if (pb.frequency + 1e-12 >= cfg.redundancy_r * pa.frequency &&
                is_subsequence_with_gap(pa.commands, pb.commands, cfg.max_gap)) {
                redundant[a] = 1;
                break;
            }
        }
    }
    std::vector<SequencePattern> out;
    for (std::size_t i = 0; i < patterns.size(); ++i) {
        if (!redundant[i]) {
            out.push_back(std::move(patterns[i]));
        }
    }
    sort_patterns(out);
    return out;
}

}  // namespace shellkg::miner
