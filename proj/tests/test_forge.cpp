#include <cmath>
#include <map>

#include "doctest.h"
#include "kcore/forge.hpp"
#include "kcore/graph.hpp"
#include "kcore/sum_sampler.hpp"

using namespace kcore;

TEST_CASE("sample_assignment structure") {
    const ModelParams mp = derive_params(5.0, 3);
    Rng rng(3);

    Assignment empty = sample_assignment(0, mp, rng);
    CHECK(empty.n_hat[0] + empty.n_hat[1] + empty.n_hat[2] == 0);
    for (int ab = 0; ab < 4; ++ab) CHECK(empty.m_hat[std::size_t(ab)] == 0);

    Assignment a = sample_assignment(4000, mp, rng);
    for (std::int64_t v = 0; v < a.n; ++v) {
        const auto i = std::size_t(v);
        switch (a.type[i]) {
            case VType::Zero:
                CHECK(a.deg[2][i] <= mp.k - 2);
                CHECK(a.deg[1][i] == 0);
                CHECK(a.deg[3][i] == 0);
                break;
            case VType::Star:
                CHECK(a.deg[2][i] == mp.k - 1);  // exactly k-1, always
                CHECK(a.deg[0][i] == 0);
                CHECK(a.deg[3][i] == 0);
                break;
            case VType::One:
                CHECK(a.deg[3][i] >= mp.k);
                CHECK(a.deg[0][i] == 0);
                CHECK(a.deg[2][i] == 0);
                break;
        }
    }
}

TEST_CASE("sample_assignment 11-total matches d p^2 n") {
    const ModelParams mp = derive_params(5.0, 3);
    const std::int64_t n = 1000, draws = 20000;
    Rng root(17);
    double sum = 0.0, sumsq = 0.0;
    for (std::int64_t i = 0; i < draws; ++i) {
        Rng rng = root.split(std::uint64_t(i));
        Assignment a = sample_assignment(n, mp, rng);
        const double x = double(a.m_hat[3]) / double(n);
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / double(draws);
    const double var = sumsq / double(draws) - mean * mean;
    const double se = std::sqrt(var / double(draws));
    const double target = mp.d * mp.p * mp.p;  // = 2m mu_11 / n at m = dn/2
    CHECK(std::fabs(mean - target) <= 5.0 * se);
}

TEST_CASE("parity_ok") {
    Assignment a;
    a.m_hat = {0, 0, 0, 0};
    CHECK(parity_ok(a, 0));
    a.m_hat = {2, 3, 3, 4};
    CHECK(parity_ok(a, 6));
    a.m_hat = {1, 3, 3, 5};
    CHECK_FALSE(parity_ok(a, 6));
    a.m_hat = {2, 3, 2, 4};
    CHECK_FALSE(parity_ok(a, 6));
}

namespace {

Assignment degrees_only(std::int64_t n, int k, std::vector<std::int32_t> d00) {
    Assignment a;
    a.n = n;
    a.k = k;
    a.type.assign(std::size_t(n), VType::Zero);
    for (auto& d : a.deg) d.assign(std::size_t(n), 0);
    for (std::size_t v = 0; v < d00.size(); ++v) {
        a.deg[0][v] = d00[v];
        a.m_hat[0] += d00[v];
    }
    a.n_hat[0] = n;
    return a;
}

}  // namespace

TEST_CASE("match_halfedges exact small laws") {
    SUBCASE("no half-edges") {
        Rng rng(1);
        MultiGraph mg = match_halfedges(degrees_only(3, 3, {0, 0, 0}), rng);
        CHECK(mg.edges.empty());
    }
    SUBCASE("one vertex with two stubs gives a loop") {
        Rng rng(1);
        MultiGraph mg = match_halfedges(degrees_only(1, 3, {2}), rng);
        REQUIRE(mg.edges.size() == 1);
        CHECK(mg.edges[0].u == mg.edges[0].v);
        auto rep = simplicity(mg);
        CHECK_FALSE(rep.simple);
        CHECK(rep.loops == 1);
        CHECK(rep.multi_pairs == 0);
    }
    SUBCASE("two matchings of four stubs: loops 1/3, double edge 2/3") {
        Rng rng(42);
        const int reps = 30000;
        int loops = 0;
        for (int i = 0; i < reps; ++i) {
            MultiGraph mg = match_halfedges(degrees_only(2, 3, {2, 2}), rng);
            auto rep = simplicity(mg);
            REQUIRE_FALSE(rep.simple);
            if (rep.loops == 2) ++loops;
            else CHECK(rep.multi_pairs == 1);
        }
        const double freq = double(loops) / double(reps);
        const double se = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / double(reps));
        CHECK(std::fabs(freq - 1.0 / 3.0) <= 5.0 * se);
    }
}

TEST_CASE("simplicity counts") {
    MultiGraph mg;
    mg.n = 4;
    CHECK(simplicity(mg).simple);
    mg.edges.push_back({1, 1, MultiGraph::EdgeType::T00});
    auto rep = simplicity(mg);
    CHECK(rep.loops == 1);
    CHECK(rep.multi_pairs == 0);
    mg.edges.clear();
    mg.edges.push_back({0, 1, MultiGraph::EdgeType::T00});
    mg.edges.push_back({1, 0, MultiGraph::EdgeType::T10});
    rep = simplicity(mg);
    CHECK(rep.loops == 0);
    CHECK(rep.multi_pairs == 1);  // parallels across different matchings count
}

TEST_CASE("pseudo messages by type") {
    // Star vertex 0 sends its 1 to vertex 1 only; core vertex 2 sends 1
    // everywhere; zero vertex 3 sends nothing.
    Assignment a;
    a.n = 4;
    a.k = 3;
    a.type = {VType::Star, VType::One, VType::One, VType::Zero};
    for (auto& d : a.deg) d.assign(4, 0);
    MultiGraph mg;
    mg.n = 4;
    mg.edges.push_back({1, 0, MultiGraph::EdgeType::T10});  // 1 sends into 0
    mg.edges.push_back({0, 1, MultiGraph::EdgeType::T10});  // star's 01 matched at 1
    // (a simple multigraph needs distinct pairs; use 0-1, 1-2, 2-3, 0-2)
    mg.edges.clear();
    mg.edges.push_back({0, 1, MultiGraph::EdgeType::T10});
    mg.edges.push_back({1, 2, MultiGraph::EdgeType::T11});
    mg.edges.push_back({2, 3, MultiGraph::EdgeType::T10});
    mg.edges.push_back({2, 0, MultiGraph::EdgeType::T10});
    Graph g(4, {{0, 1}, {1, 2}, {2, 3}, {0, 2}});
    auto msg = pseudo_messages(a, mg, g);
    CHECK(msg[g.slot_of(0, 1)] == 1);  // star sends along its matched pair
    CHECK(msg[g.slot_of(0, 2)] == 0);  // but nowhere else
    CHECK(msg[g.slot_of(1, 0)] == 1);  // core sends everywhere
    CHECK(msg[g.slot_of(1, 2)] == 1);
    CHECK(msg[g.slot_of(2, 3)] == 1);
    CHECK(msg[g.slot_of(3, 2)] == 0);  // zero sends nothing
}

TEST_CASE("forge_once is deterministic and reports stages") {
    const ModelParams mp = derive_params(5.0, 3);
    auto run = [&](std::uint64_t seed) {
        Rng rng(seed);
        return forge_once(300, 750, mp, rng);
    };
    ForgeResult a = run(7), b = run(7);
    CHECK(a.stage == b.stage);
    CHECK(a.loops == b.loops);
    CHECK(a.multi_pairs == b.multi_pairs);
    CHECK(a.x_star == b.x_star);
    CHECK(a.assignment.m_hat == b.assignment.m_hat);
}

TEST_CASE("forge_once can succeed on a single typeless vertex") {
    const ModelParams mp = derive_params(5.0, 3);
    bool found = false;
    for (std::uint64_t seed = 0; seed < 2000 && !found; ++seed) {
        Rng rng(seed);
        ForgeResult r = forge_once(1, 0, mp, rng);
        if (r.stage == ForgeStage::Success) {
            found = true;
            CHECK(r.graph->num_edges() == 0);
            CHECK(r.assignment.type[0] == VType::Zero);
        }
    }
    CHECK(found);
}

TEST_CASE("conditional sum sampler is exact on a small family") {
    // Three iid variables on {0,1,2}, conditioned on sum 3.
    IntPmf pmf{0, {0.5, 0.3, 0.2}};
    IidSumModel model(pmf, 3);

    // The sum distribution matches brute-force enumeration.
    std::map<std::int64_t, double> brute;
    std::map<std::array<int, 3>, double> joint;
    for (int x = 0; x <= 2; ++x)
        for (int y = 0; y <= 2; ++y)
            for (int z = 0; z <= 2; ++z) {
                const double pr = pmf.p[x] * pmf.p[y] * pmf.p[z];
                brute[x + y + z] += pr;
                joint[{x, y, z}] = pr;
            }
    for (const auto& [s, pr] : brute)
        CHECK(model.sum_dist().at(s) == doctest::Approx(pr).epsilon(1e-12));

    // Conditional draws match the exact conditional law.
    Rng rng(5);
    const int reps = 200000;
    std::map<std::array<int, 3>, int> freq;
    std::vector<std::int32_t> out;
    for (int i = 0; i < reps; ++i) {
        model.sample_given_sum(3, rng, out);
        freq[{out[0], out[1], out[2]}]++;
    }
    for (const auto& [triple, count] : freq) {
        const double expected = joint.at(triple) / brute.at(3);
        const double se = std::sqrt(expected * (1 - expected) / double(reps));
        CHECK(std::fabs(double(count) / double(reps) - expected) <= 5.0 * se);
    }
    CHECK_THROWS_AS(model.sample_given_sum(7, rng, out), infeasible_target_error);
}

TEST_CASE("centered targets and conditional forge") {
    const std::int64_t n = 300;
    const double d = 5.0;
    const int k = 3;
    const auto m = std::int64_t(std::ceil(d * double(n) / 2.0));
    const ModelParams mp = derive_params(d, k);
    const ConditionalTargets t = centered_targets(n, m, mp);
    CHECK(t.m_11 % 2 == 0);

    Rng rng(123);
    ForgeResult r = forge_conditional(n, m, k, t, rng);
    REQUIRE(r.stage == ForgeStage::Success);
    REQUIRE(r.graph.has_value());
    CHECK(std::int64_t(r.graph->num_edges()) == m);

    // The decomposition of the output reproduces the targets exactly, the
    // pseudo-messages are the true fixed point, and the core is N_1.
    Decomposition dec = decompose(*r.graph, k);
    CHECK(dec.n_star() == t.n_star);
    CHECK(dec.n_one() == t.n_1);
    CHECK(dec.m_ab[2] == t.m_10);
    CHECK(dec.m_ab[3] == t.m_11);
    CHECK(dec.wp.messages == r.pseudo);
    auto core = peel_core(*r.graph, k);
    std::vector<VertexId> n1_from_types;
    for (std::int64_t v = 0; v < n; ++v)
        if (r.assignment.type[std::size_t(v)] == VType::One) n1_from_types.push_back(VertexId(v));
    CHECK(core == n1_from_types);
}

TEST_CASE("conditional forge forces an all-core graph") {
    // n_1 = n with m_11 = 2m pins every vertex in the core.
    const std::int64_t n = 8, m = 12;
    ConditionalTargets t{0, n, 0, 2 * m};
    Rng rng(9);
    ForgeResult r = forge_conditional(n, m, 3, t, rng);
    REQUIRE(r.stage == ForgeStage::Success);
    CHECK(peel_core(*r.graph, 3).size() == std::size_t(n));
}

TEST_CASE("conditional forge rejects bad targets") {
    CHECK_THROWS_AS(ConditionalForge(10, 20, 3, ConditionalTargets{0, 2, 0, 7}),
                    std::invalid_argument);  // odd m_11
    CHECK_THROWS_AS(ConditionalForge(10, 20, 3, ConditionalTargets{0, 2, 0, 4}),
                    infeasible_target_error);  // m_11 < k n_1
    CHECK_THROWS_AS(ConditionalForge(10, 20, 3, ConditionalTargets{11, 0, 22, 0}),
                    infeasible_target_error);  // n_star > n
    CHECK_THROWS_AS(ConditionalForge(10, 20, 3, ConditionalTargets{0, 0, 5, 0}),
                    infeasible_target_error);  // senders without sender vertices
}
