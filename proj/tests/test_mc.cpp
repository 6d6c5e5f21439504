#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "kcore/mc.hpp"
#include "kcore/stats.hpp"

using namespace kcore;

TEST_CASE("pair index round trip") {
    for (std::int64_t n : {2, 3, 5, 17, 64}) {
        std::int64_t idx = 0;
        for (VertexId u = 0; u + 1 < VertexId(n); ++u)
            for (VertexId v = u + 1; v < VertexId(n); ++v) {
                CHECK(pair_index(n, u, v) == idx);
                CHECK(pair_from_index(n, idx) == Edge{u, v});
                ++idx;
            }
        CHECK(idx == n * (n - 1) / 2);
    }
}

TEST_CASE("sample_gnm extremes and uniformity") {
    Rng rng(1);
    Graph complete = sample_gnm(5, 10, rng);
    CHECK(complete.num_edges() == 10);
    Graph empty = sample_gnm(5, 0, rng);
    CHECK(empty.num_edges() == 0);
    CHECK_THROWS_AS(sample_gnm(4, 7, rng), std::invalid_argument);

    // n=4, m=3: all 20 graphs equally likely.
    const int reps = 200000;
    std::map<std::uint64_t, int> freq;
    GnmSampler sampler;
    std::vector<Edge> edges;
    Rng root(31);
    for (int i = 0; i < reps; ++i) {
        Rng r = root.split(std::uint64_t(i));
        sampler.sample(4, 3, r, edges);
        std::uint64_t mask = 0;
        for (const auto& e : edges) mask |= (1ULL << pair_index(4, e.first, e.second));
        ++freq[mask];
    }
    CHECK(freq.size() == 20);
    const double expected = double(reps) / 20.0;
    const double five_sigma = 5.0 * std::sqrt(expected * (1.0 - 1.0 / 20.0));
    for (const auto& [mask, count] : freq)
        CHECK(std::fabs(double(count) - expected) <= five_sigma);
}

TEST_CASE("mc_core_stats") {
    SUBCASE("subcritical degree leaves the core empty") {
        EmpiricalDist dist = mc_core_stats(1000, 500, 3, 200, 5, 2);
        for (const auto& [key, c] : dist.counts) {
            CHECK(key[1] == 0);
            CHECK(key[3] == 0);
        }
    }
    SUBCASE("m_11 always even, totals conserved, deterministic") {
        EmpiricalDist a = mc_core_stats(400, 1000, 3, 300, 42, 1);
        EmpiricalDist b = mc_core_stats(400, 1000, 3, 300, 42, 2);
        CHECK(a.counts == b.counts);  // substreams keyed by replicate index
        for (const auto& [key, c] : a.counts) CHECK(key[3] % 2 == 0);
        std::int64_t total = 0;
        for (const auto& [key, c] : a.counts) total += c;
        CHECK(total == 300);
    }
    SUBCASE("csv header") {
        EmpiricalDist dist = mc_core_stats(50, 100, 3, 5, 5, 1);
        std::ostringstream os;
        dist.write_csv(os);
        CHECK(os.str().rfind("n_star,n_1,m_10,m_11,count\n", 0) == 0);
    }
}

TEST_CASE("enumerate_gamma tiny censuses") {
    SUBCASE("K4 is the only graph with 4 vertices and 6 edges") {
        GammaCensus census = enumerate_gamma(4, 6, 3);
        CHECK(census.total == 1);
        REQUIRE(census.classes.size() == 1);
        const auto& [key, count] = *census.classes.begin();
        CHECK(key == std::array<std::int64_t, 4>{0, 4, 0, 12});
        CHECK(count == 1);
    }
    SUBCASE("n=5, m=4: no 3-core anywhere") {
        GammaCensus census = enumerate_gamma(5, 4, 3);
        CHECK(census.total == 210);  // C(10,4)
        for (const auto& [key, c] : census.classes) {
            CHECK(key[1] == 0);
            CHECK(key[3] == 0);
        }
    }
    SUBCASE("n=7, m=10 census totals") {
        GammaCensus census = enumerate_gamma(7, 10, 3);
        CHECK(census.total == 352716);  // C(21,10)
        std::int64_t sum = 0;
        for (const auto& [key, c] : census.classes) sum += c;
        CHECK(sum == census.total);
    }
    SUBCASE("guard rejects oversized enumerations") {
        CHECK_THROWS_AS(enumerate_gamma(11, 27, 3), std::invalid_argument);
    }
}

TEST_CASE("gamma_q sanity") {
    // dof=2 chi-square survival is exactly exp(-x/2).
    for (double x : {0.5, 1.0, 3.0, 10.0})
        CHECK(chi_square_pvalue(x, 2) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-10));
    CHECK(gamma_q(3.5, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("uniformity_test on a singleton class") {
    // The only graph with n=4, m=6 is K4; the conditional sampler must
    // produce it every time.
    ConditionalTargets t{0, 4, 0, 12};
    StatReport rep = uniformity_test(4, 6, 3, t, 60, 3, 2);
    CHECK(rep.tv_distance == doctest::Approx(0.0));
    CHECK(rep.p_value == doctest::Approx(1.0));

    CHECK_THROWS_AS(uniformity_test(4, 6, 3, ConditionalTargets{0, 3, 0, 12}, 10, 3, 1),
                    std::invalid_argument);  // empty class
}

TEST_CASE("uniformity_test on a modest class") {
    // n=5, m=7 with d = 2.8 has some graphs with 3-cores; test the modal
    // class end to end with a chi-square that should comfortably pass.
    GammaCensus census = enumerate_gamma(5, 7, 3);
    const auto key = census.largest_class();
    ConditionalTargets t{key[0], key[1], key[2], key[3]};
    StatReport rep = uniformity_test(5, 7, 3, t, 20000, 11, 2);
    CHECK(rep.p_value > 1e-3);
    CHECK(rep.tv_distance <= 0.05);
}

TEST_CASE("poisson_fit_report accepts poisson data and rejects constants") {
    Rng rng(8);
    std::map<std::int64_t, std::int64_t> hist;
    const std::int64_t total = 20000;
    for (std::int64_t i = 0; i < total; ++i) ++hist[poisson_sample(2.5, rng)];
    StatReport fit = poisson_fit_report(hist, total, 1e-3);
    CHECK(fit.pass);

    std::map<std::int64_t, std::int64_t> degenerate{{0, total / 2}, {5, total / 2}};
    StatReport bad = poisson_fit_report(degenerate, total, 1e-3);
    CHECK_FALSE(bad.pass);
}

TEST_CASE("forge_stage_stats smoke") {
    const std::int64_t n = 2000;
    const auto m = std::int64_t(5 * n / 2);
    const ModelParams mp = derive_params(5.0, 3);
    ConditionalTargets t = centered_targets(n, m, mp);
    ForgeStageStats st = forge_stage_stats(n, m, 3, t, 400, 21, 2);
    CHECK(st.trials == 400);
    CHECK(st.e23 <= st.e2);
    CHECK(st.e23 <= st.e3);
    CHECK(st.simple_given_e23 <= st.e23);
    std::int64_t hist_total = 0;
    for (const auto& [v, c] : st.x_star_hist) hist_total += c;
    CHECK(hist_total == st.trials);
    // Same seed, different job counts: identical integer counters.
    ForgeStageStats st1 = forge_stage_stats(n, m, 3, t, 400, 21, 1);
    CHECK(st1.e2 == st.e2);
    CHECK(st1.sum_x_star == st.sum_x_star);
    CHECK(st1.success == st.success);
}

TEST_CASE("llt_comparison smoke at modest size") {
    LltComparisonConfig cfg;
    cfg.mean_tol = 0.5;
    cfg.max_tol = 1.0;
    cfg.cov_tol = 0.5;
    cfg.min_hits = 200;
    StatReport rep = llt_comparison(3000, 7500, 3, 4000, 13, cfg, 2);
    CHECK(rep.lines.size() == 5);
    CHECK(rep.pass);
}
