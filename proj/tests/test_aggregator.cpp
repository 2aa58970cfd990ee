#include "oracles.hpp"

#include "shellkg/aggregator.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace shellkg::aggregator;

namespace {

DistanceMatrix blocks(const std::vector<std::size_t>& group, double within, double across) {
    std::vector<std::vector<double>> d(group.size(), std::vector<double>(group.size(), 0.0));
    for (std::size_t i = 0; i < group.size(); ++i) {
        for (std::size_t j = 0; j < group.size(); ++j) {
            if (i != j) {
                d[i][j] = group[i] == group[j] ? within : across;
            }
        }
    }
    return DistanceMatrix::from_dense(d);
}

oracle::Matrix dense(const DistanceMatrix& m) {
    oracle::Matrix d(m.size(), std::vector<double>(m.size()));
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) {
            d[i][j] = m(i, j);
        }
    }
    return d;
}

DistanceMatrix random_matrix(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DistanceMatrix                          m(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            m.set(i, j, u(rng));
        }
    }
    return m;
}

// Partition induced by an assignment, independent of cluster numbering.
std::set<std::set<std::size_t>> partition(const std::vector<std::size_t>& a) {
    std::map<std::size_t, std::set<std::size_t>> by;
    for (std::size_t i = 0; i < a.size(); ++i) {
        by[a[i]].insert(i);
    }
    std::set<std::set<std::size_t>> out;
    for (auto& [k, v] : by) {
        out.insert(v);
    }
    return out;
}

}  // namespace

TEST_CASE("jaccard_distance examples") {
    CHECK(jaccard_distance("cat /data/logs/result.log", "cat /data/logs/result.log") == 0.0);
    CHECK(jaccard_distance("cat /data/logs/result.log", "vi /data/logs/result.log") == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(jaccard_distance("ls -l", "df -h") == 1.0);
    CHECK(jaccard_distance("", "") == 0.0);
}

TEST_CASE("sequence_distance examples") {
    const std::string c = "cat /a/b.log";
    CHECK(sequence_distance({c}, {c}) == 0.0);
    CHECK(sequence_distance({c}, {c, c}) == doctest::Approx(0.5));
    CHECK(sequence_distance({"ls", "pwd"}, {"df", "top"}) == 1.0);
}

TEST_CASE("sequence_distance properties against the formula") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        oracle::Seq x, y;
        for (std::size_t k = 0, n = 1 + rng() % 4; k < n; ++k) {
            x.push_back(oracle::random_command(rng));
        }
        for (std::size_t k = 0, n = 1 + rng() % 4; k < n; ++k) {
            y.push_back(oracle::random_command(rng));
        }
        const double d = sequence_distance(x, y);
        CHECK(d == sequence_distance(y, x));
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
        CHECK(sequence_distance(x, x) == 0.0);
        CHECK(std::abs(d - oracle::sequence_distance(x, y)) <= 1e-12);
    }
}

TEST_CASE("distance matrix") {
    const std::vector<Sequence> same = {{"ls"}, {"ls"}, {"ls"}};
    auto                        z    = build_distance_matrix(same);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(z(i, j) == 0.0);
        }
    }
    auto two = build_distance_matrix({{"cat /a/b.log"}, {"vi /a/b.log", "ls"}});
    // (0.5 + 1) / 2
    CHECK(two(0, 1) == doctest::Approx(0.75));
    CHECK(two(1, 0) == two(0, 1));

    CHECK_THROWS_AS(DistanceMatrix::from_dense({{0.0, 0.5}, {0.4, 0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(DistanceMatrix::from_dense({{0.1, 0.5}, {0.5, 0.0}}), std::invalid_argument);
    CHECK_THROWS_AS(DistanceMatrix::from_dense({{0.0, 1.5}, {1.5, 0.0}}), std::invalid_argument);
}

TEST_CASE("k-medoids on separated pairs") {
    auto m = blocks({0, 0, 1, 1}, 0.0, 1.0);
    auto c = cluster(m, 2, 3);
    CHECK(partition(c.assignment) == std::set<std::set<std::size_t>>{{0, 1}, {2, 3}});
    CHECK(c.loss == 0.0);

    auto all = cluster(m, 4, 3);
    CHECK(partition(all.assignment).size() == 4);
    CHECK(all.loss == 0.0);

    CHECK_THROWS(cluster(m, 5, 3));
}

TEST_CASE("k-medoids invariants on random matrices") {
    std::mt19937_64 rng(8);
    for (int round = 0; round < 30; ++round) {
        const std::size_t n = 3 + rng() % 20;
        auto              m = random_matrix(rng, n);
        const std::size_t k = 2 + rng() % (n - 2);
        auto              a = cluster(m, k, round);
        auto              b = cluster(m, k, round);
        CHECK(a.assignment == b.assignment);
        CHECK(a.medoids.size() == k);
        CHECK(partition(a.assignment).size() == k);
        for (std::size_t i = 1; i < a.loss_trace.size(); ++i) {
            CHECK(a.loss_trace[i] <= a.loss_trace[i - 1] + 1e-12);
        }
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            loss += m(i, a.medoids[a.assignment[i]]);
            // every point sits with its nearest medoid
            for (const auto med : a.medoids) {
                CHECK(m(i, a.medoids[a.assignment[i]]) <= m(i, med) + 1e-12);
            }
        }
        CHECK(loss == doctest::Approx(a.loss));
    }
}

TEST_CASE("silhouette") {
    CHECK(silhouette(blocks({0, 0, 1, 1}, 0.0, 1.0), {0, 0, 1, 1}) == 1.0);
    CHECK(silhouette(blocks({0, 0, 0, 0}, 0.0, 0.0), {0, 0, 1, 1}) == 0.0);

    std::mt19937_64 rng(4);
    for (int round = 0; round < 40; ++round) {
        const std::size_t        n = 2 + rng() % 49;
        auto                     m = random_matrix(rng, n);
        const std::size_t        k = 2 + rng() % std::min<std::size_t>(n - 1, 6);
        std::vector<std::size_t> label(n);
        for (std::size_t i = 0; i < n; ++i) {
            label[i] = i < k ? i : rng() % k;
        }
        const double got = silhouette(m, label);
        CHECK(std::abs(got - oracle::silhouette(dense(m), label)) <= 1e-9);
        CHECK(got >= -1.0);
        CHECK(got <= 1.0);
    }
}

TEST_CASE("select_k") {
    CHECK(select_k(blocks({0, 0, 1, 1}, 0.0, 1.0), 2, 3, 1, 1) == 2);
    CHECK(select_k(blocks({0, 0, 1, 1}, 0.0, 1.0), 3, 3, 1, 1) == 3);
    CHECK_THROWS(select_k(blocks({0, 0, 1, 1}, 0.0, 1.0), 3, 2, 1, 1));

    const std::vector<std::size_t> blob = {0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
    auto                           m    = blocks(blob, 0.1, 0.9);
    CHECK(select_k(m, 2, 6, 1, 5) == 3);
    // the scanned table peaks at 3
    double best = -2.0;
    std::size_t arg = 0;
    for (std::size_t k = 2; k <= 6; ++k) {
        const double s = oracle::silhouette(dense(m), cluster(m, k, 5).assignment);
        if (s > best + 1e-12) {
            best = s;
            arg  = k;
        }
    }
    CHECK(arg == 3);
}

TEST_CASE("default k grid") {
    auto g = default_k_grid(10);
    CHECK(g.k_min == 2);
    CHECK(g.k_max == 9);
    CHECK(g.step == 1);
    CHECK(default_k_grid(1000).step == 10);
}

TEST_CASE("macro registry") {
    CHECK(macro_registry_parse("").empty());

    const std::string restart =
        R"({"scope": "OnlineServiceRLX", "intent": "restart_service=Y", "commands": ["cat /opt/hw/app/OnlineServiceRLX/conf/app.properties", "sh /opt/hw/app/OnlineServiceRLX/bin/stop.sh", "sh /opt/hw/app/OnlineServiceRLX/bin/start.sh", "cat /opt/hw/app/OnlineServiceRLX/logs/run.log"]})";
    auto ms = macro_registry_parse(restart + "\n");
    REQUIRE(ms.size() == 1);
    CHECK(ms[0].intent == "restart_service=Y");
    CHECK(ms[0].commands.size() == 4);
    CHECK(ms[0].line == 1);
    CHECK(macro_registry_validate(ms, {"OnlineServiceRLX"}).empty());

    auto dup = macro_registry_parse(restart + "\n\n" + restart + "\n");
    auto diag = macro_registry_validate(dup, {"OnlineServiceRLX"});
    REQUIRE(diag.size() == 1);
    CHECK(diag[0].line == 3);

    auto empty_intent = macro_registry_parse(R"({"scope": "s", "intent": "", "commands": ["ls"]})");
    CHECK_FALSE(macro_registry_validate(empty_intent, {"s"}).empty());

    try {
        macro_registry_parse("{\"scope\": \"s\", \"intent\": \"x\", \"commands\": [\"ls\"]}\nnot json\n{\"scope\": 1}\n");
        FAIL("expected a parse error");
    } catch (const MacroParseError& e) {
        const std::string what = e.what();
        CHECK(what.find("line 2") != std::string::npos);
        CHECK(what.find("line 3") != std::string::npos);
    }
}

TEST_CASE("macro registry file loading") {
    const auto path = std::filesystem::temp_directory_path() / "shellkg_macros_test.ndjson";
    {
        std::ofstream out(path);
        out << R"({"scope": "s", "intent": "x", "commands": ["ls", "pwd"], "cluster": 4})" << "\n";
    }
    auto ms = macro_registry_load(path);
    REQUIRE(ms.size() == 1);
    CHECK(ms[0].source_cluster == 4u);
    std::filesystem::remove(path);
    CHECK_THROWS(macro_registry_load(path));
}
