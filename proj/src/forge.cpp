#include "kcore/forge.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <mutex>
#include <unordered_set>

#include "kcore/parallel.hpp"

namespace kcore {

std::int64_t Assignment::n_plus() const {
    std::int64_t c = 0;
    for (std::int64_t v = 0; v < n; ++v)
        if (type[std::size_t(v)] == VType::Zero && deg[2][std::size_t(v)] == k - 2) ++c;
    return c;
}

Assignment sample_assignment(std::int64_t n, const ModelParams& params, Rng& rng) {
    Assignment a;
    a.n = n;
    a.k = params.k;
    a.type.resize(std::size_t(n));
    for (auto& d : a.deg) d.assign(std::size_t(n), 0);

    const TruncatedPoisson d10 = params.deg_10();
    const TruncatedPoisson d11 = params.deg_11();
    const double nu0 = params.nu[0], nu_star = params.nu[1];

    for (std::int64_t v = 0; v < n; ++v) {
        const std::size_t i = std::size_t(v);
        double u = rng.next_double();
        VType t = u < nu0 ? VType::Zero : (u < nu0 + nu_star ? VType::Star : VType::One);
        a.type[i] = t;
        switch (t) {
            case VType::Zero:
                a.deg[0][i] = std::int32_t(poisson_sample(params.lambda[0], rng));
                a.deg[2][i] = std::int32_t(d10.sample(rng));
                break;
            case VType::Star:
                a.deg[1][i] = std::int32_t(poisson_sample(params.lambda[1], rng));
                a.deg[2][i] = std::int32_t(params.k - 1);
                break;
            case VType::One:
                a.deg[1][i] = std::int32_t(poisson_sample(params.lambda[1], rng));
                a.deg[3][i] = std::int32_t(d11.sample(rng));
                break;
        }
        ++a.n_hat[std::size_t(t)];
        for (int ab = 0; ab < 4; ++ab) a.m_hat[std::size_t(ab)] += a.deg[std::size_t(ab)][i];
    }
    return a;
}

bool parity_ok(const Assignment& a, std::int64_t m) {
    return a.m_hat[0] % 2 == 0 && a.m_hat[3] % 2 == 0 && a.m_hat[1] == a.m_hat[2] &&
           a.m_hat[0] + 2 * a.m_hat[1] + a.m_hat[3] == 2 * m;
}

namespace {

void fill_stubs(const Assignment& a, int ab, std::vector<VertexId>& stubs) {
    stubs.clear();
    stubs.reserve(std::size_t(a.m_hat[std::size_t(ab)]));
    const auto& deg = a.deg[std::size_t(ab)];
    for (std::int64_t v = 0; v < a.n; ++v)
        for (std::int32_t i = 0; i < deg[std::size_t(v)]; ++i)
            stubs.push_back(VertexId(v));
}

void shuffle(std::vector<VertexId>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[std::size_t(rng.next_below(i))]);
}

void match_halfedges_into(const Assignment& a, Rng& rng, MultiGraph& mg,
                          std::vector<VertexId>& stubs, std::vector<VertexId>& stubs2) {
    if (a.m_hat[0] % 2 != 0 || a.m_hat[3] % 2 != 0 || a.m_hat[1] != a.m_hat[2])
        throw std::invalid_argument("match_halfedges: parity precondition violated");
    mg.n = a.n;
    mg.edges.clear();
    mg.edges.reserve(std::size_t((a.m_hat[0] + a.m_hat[3]) / 2 + a.m_hat[1]));

    // A uniformly shuffled stub list paired consecutively is a uniform
    // perfect matching.
    fill_stubs(a, 0, stubs);
    shuffle(stubs, rng);
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2)
        mg.edges.push_back({stubs[i], stubs[i + 1], MultiGraph::EdgeType::T00});

    fill_stubs(a, 3, stubs);
    shuffle(stubs, rng);
    for (std::size_t i = 0; i + 1 < stubs.size(); i += 2)
        mg.edges.push_back({stubs[i], stubs[i + 1], MultiGraph::EdgeType::T11});

    // Bipartite: shuffle one side, pair positionally.
    fill_stubs(a, 1, stubs);   // 01 side (senders)
    fill_stubs(a, 2, stubs2);  // 10 side (receivers)
    shuffle(stubs, rng);
    for (std::size_t i = 0; i < stubs.size(); ++i)
        mg.edges.push_back({stubs[i], stubs2[i], MultiGraph::EdgeType::T10});
}

// LSD radix sort on packed (min,max) pair keys: pair ids fit in 2*17 bits
// for any graph this project touches, so two sequential passes suffice.
void radix_sort_keys(std::vector<std::uint64_t>& keys, std::vector<std::uint64_t>& tmp,
                     int key_bits) {
    const int half = (key_bits + 1) / 2;
    const std::size_t buckets = std::size_t(1) << half;
    tmp.resize(keys.size());
    static thread_local std::vector<std::uint32_t> count;
    for (int pass = 0; pass < 2; ++pass) {
        const int shift = pass * half;
        count.assign(buckets, 0);
        for (std::uint64_t k : keys) ++count[(k >> shift) & (buckets - 1)];
        std::uint32_t pos = 0;
        for (std::size_t b = 0; b < buckets; ++b) {
            std::uint32_t c = count[b];
            count[b] = pos;
            pos += c;
        }
        for (std::uint64_t k : keys) tmp[count[(k >> shift) & (buckets - 1)]++] = k;
        keys.swap(tmp);
    }
}

SimplicityReport simplicity_with(const MultiGraph& mg, std::vector<std::uint64_t>& keys,
                                 std::vector<std::uint64_t>& tmp) {
    SimplicityReport rep;
    keys.clear();
    keys.reserve(mg.edges.size());
    int bits = 1;
    while ((std::uint64_t(mg.n) << 1) >> bits) ++bits;
    for (const auto& e : mg.edges) {
        if (e.u == e.v) { ++rep.loops; continue; }
        VertexId a = std::min(e.u, e.v), b = std::max(e.u, e.v);
        keys.push_back((std::uint64_t(a) << bits) | b);
    }
    radix_sort_keys(keys, tmp, 2 * bits);
    for (std::size_t i = 0; i < keys.size();) {
        std::size_t j = i + 1;
        while (j < keys.size() && keys[j] == keys[i]) ++j;
        const std::int64_t c = std::int64_t(j - i);
        if (c > 1) rep.multi_pairs += c * (c - 1) / 2;
        i = j;
    }
    rep.simple = rep.loops == 0 && rep.multi_pairs == 0;
    return rep;
}

}  // namespace

MultiGraph match_halfedges(const Assignment& a, Rng& rng) {
    MultiGraph mg;
    std::vector<VertexId> stubs, stubs2;
    match_halfedges_into(a, rng, mg, stubs, stubs2);
    return mg;
}

SimplicityReport simplicity(const MultiGraph& mg) {
    std::vector<std::uint64_t> keys, tmp;
    return simplicity_with(mg, keys, tmp);
}

MultiGraphCycles count_multigraph_cycles(const Assignment& a, const MultiGraph& mg) {
    MultiGraphCycles out;
    std::vector<Edge> star_arcs, plus_edges;
    for (const auto& e : mg.edges) {
        if (e.type == MultiGraph::EdgeType::T10) {
            if (a.type[e.u] == VType::Star && a.type[e.v] == VType::Star)
                star_arcs.emplace_back(e.u, e.v);
        } else if (e.type == MultiGraph::EdgeType::T00) {
            auto plus = [&](VertexId v) {
                return a.type[v] == VType::Zero && a.deg[2][v] == a.k - 2;
            };
            if (plus(e.u) && plus(e.v)) plus_edges.emplace_back(e.u, e.v);
        }
    }
    out.x_star = count_directed_cycles(star_arcs);
    out.x_plus = count_undirected_cycles(plus_edges);
    return out;
}

std::vector<std::uint8_t> pseudo_messages(const Assignment& a, const MultiGraph& mg,
                                          const Graph& contracted) {
    std::unordered_set<std::uint64_t> star_sends;
    for (const auto& e : mg.edges)
        if (e.type == MultiGraph::EdgeType::T10 && a.type[e.u] == VType::Star)
            star_sends.insert((std::uint64_t(e.u) << 32) | e.v);

    std::vector<std::uint8_t> msg(2 * contracted.num_edges(), 0);
    for (VertexId v = 0; v < contracted.num_vertices(); ++v) {
        for (std::uint32_t s = contracted.slot_begin(v); s < contracted.slot_end(v); ++s) {
            VertexId w = contracted.neighbor_at(s);
            if (a.type[v] == VType::One)
                msg[s] = 1;
            else if (a.type[v] == VType::Star &&
                     star_sends.count((std::uint64_t(v) << 32) | w))
                msg[s] = 1;
        }
    }
    return msg;
}

const char* to_string(ForgeStage s) {
    switch (s) {
        case ForgeStage::Success: return "success";
        case ForgeStage::Parity: return "parity";
        case ForgeStage::NotSimple: return "not-simple";
        case ForgeStage::WpMismatch: return "wp-mismatch";
    }
    return "?";
}

namespace {

// Steps (4)-(7) given an assignment whose totals already satisfy parity.
struct StageOutcome {
    ForgeStage stage = ForgeStage::NotSimple;
    std::int64_t loops = 0, multi_pairs = 0, x_star = 0, x_plus = 0;
    std::optional<Graph> graph;
    std::vector<std::uint8_t> pseudo;
};

struct StageScratch {
    MultiGraph mg;
    std::vector<VertexId> stubs, stubs2;
    std::vector<std::uint64_t> keys, tmp;
};

StageOutcome run_matching_stages(const Assignment& a, Rng& rng) {
    thread_local StageScratch ws;
    StageOutcome r;
    match_halfedges_into(a, rng, ws.mg, ws.stubs, ws.stubs2);
    const MultiGraph& mg = ws.mg;
    auto cyc = count_multigraph_cycles(a, mg);
    r.x_star = cyc.x_star;
    r.x_plus = cyc.x_plus;
    auto rep = simplicity_with(mg, ws.keys, ws.tmp);
    r.loops = rep.loops;
    r.multi_pairs = rep.multi_pairs;
    if (!rep.simple) {
        r.stage = ForgeStage::NotSimple;
        return r;
    }
    std::vector<Edge> edges;
    edges.reserve(mg.edges.size());
    for (const auto& e : mg.edges) edges.emplace_back(e.u, e.v);
    Graph g(VertexId(mg.n), std::move(edges));
    r.pseudo = pseudo_messages(a, mg, g);
    WpState wp = wp_run(g, a.k);
    bool marks_match = true;
    for (VertexId v = 0; v < g.num_vertices(); ++v)
        if (wp.marks[v] != (a.type[v] == VType::One ? 1 : 0)) { marks_match = false; break; }
    if (wp.messages != r.pseudo || !marks_match) {
        r.stage = ForgeStage::WpMismatch;
        return r;
    }
    r.stage = ForgeStage::Success;
    r.graph = std::move(g);
    return r;
}

}  // namespace

ForgeResult forge_once(std::int64_t n, std::int64_t m, const ModelParams& params, Rng& rng) {
    ForgeResult r;
    r.assignment = sample_assignment(n, params, rng);
    if (!parity_ok(r.assignment, m)) {
        r.stage = ForgeStage::Parity;
        return r;
    }
    StageOutcome out = run_matching_stages(r.assignment, rng);
    r.stage = out.stage;
    r.loops = out.loops;
    r.multi_pairs = out.multi_pairs;
    r.x_star = out.x_star;
    r.x_plus = out.x_plus;
    r.pseudo = std::move(out.pseudo);
    r.graph = std::move(out.graph);
    return r;
}

ConditionalTargets centered_targets(std::int64_t n, std::int64_t m, const ModelParams& params) {
    ConditionalTargets t;
    t.n_star = std::llround(double(n) * params.nu[1]);
    t.n_1 = std::llround(double(n) * params.nu[2]);
    t.m_10 = std::llround(2.0 * double(m) * params.mu[2]);
    t.m_11 = std::int64_t(std::floor(2.0 * double(m) * params.mu[3]));
    if (t.m_11 % 2 != 0) --t.m_11;
    return t;
}

double solve_truncated_mean_rate(TruncKind kind, std::int64_t bound, double target_mean) {
    double lo = 1e-4, hi = 60.0;
    auto mean_at = [&](double r) { return TruncatedPoisson{r, kind, bound}.mean(); };
    if (target_mean <= mean_at(lo)) return lo;
    if (target_mean >= mean_at(hi)) return hi;
    for (int it = 0; it < 200 && hi - lo > 1e-9 * (1.0 + hi); ++it) {
        double mid = 0.5 * (lo + hi);
        (mean_at(mid) < target_mean ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

ConditionalForge::ConditionalForge(std::int64_t n, std::int64_t m, int k,
                                   const ConditionalTargets& targets)
    : n_(n), m_(m), k_(k), targets_(targets) {
    if (k < 3) throw std::invalid_argument("ConditionalForge: k must be at least 3");
    if (targets.m_11 % 2 != 0)
        throw std::invalid_argument("ConditionalForge: m_11 target must be even");
    n_0 = n - targets.n_star - targets.n_1;
    m_01 = targets.m_10;
    m_00 = 2 * m - 2 * targets.m_10 - targets.m_11;
    t_10 = targets.m_10 - std::int64_t(k - 1) * targets.n_star;
    if (n_0 < 0 || m_00 < 0 || t_10 < 0)
        throw infeasible_target_error("ConditionalForge: negative derived counts");
    if (targets.n_1 == 0 && targets.m_11 != 0)
        throw infeasible_target_error("ConditionalForge: m_11 > 0 with empty N_1");
    if (targets.n_star + targets.n_1 == 0 && m_01 != 0)
        throw infeasible_target_error("ConditionalForge: m_01 > 0 with no senders");
    if (n_0 == 0 && (m_00 != 0 || t_10 != 0))
        throw infeasible_target_error("ConditionalForge: N_0 empty but 00/10 degrees required");
    if (targets.m_11 < std::int64_t(k) * targets.n_1 || t_10 > std::int64_t(k - 2) * n_0)
        throw infeasible_target_error("ConditionalForge: degree totals outside support");

    // Rates only centre the tables; the conditional law does not depend on
    // them because they cancel once the family sum is fixed.
    TruncatedPoisson t10{1.0, TruncKind::AtMost, std::int64_t(k) - 2};
    if (n_0 > 0) t10.rate = solve_truncated_mean_rate(t10.kind, t10.bound, double(t_10) / double(n_0));
    TruncatedPoisson t11{double(k), TruncKind::AtLeast, std::int64_t(k)};
    if (targets.n_1 > 0)
        t11.rate = solve_truncated_mean_rate(t11.kind, t11.bound,
                                             double(targets.m_11) / double(targets.n_1));
    IntPmf pmf11 = pmf_table(t11);
    if (targets.n_1 > 0 && targets.n_1 <= 64) {
        // One vertex may have to absorb nearly the whole total when the
        // family is small; extend the per-variable support to cover that.
        std::int64_t need = targets.m_11 - std::int64_t(k) * (targets.n_1 - 1);
        while (pmf11.hi() < need) pmf11.p.push_back(t11.pmf(pmf11.hi() + 1));
    }
    fam_10_ = std::make_shared<IidSumModel>(pmf_table(t10), n_0);
    fam_11_ = std::make_shared<IidSumModel>(std::move(pmf11), targets.n_1);
    if (fam_10_->sum_dist().at(t_10) <= 0.0 || fam_11_->sum_dist().at(targets.m_11) <= 0.0)
        throw infeasible_target_error("ConditionalForge: degree totals have zero mass");
}

ConditionalForge::ConditionalForge(std::int64_t n, std::int64_t m, const ModelParams& params,
                                   const ConditionalTargets& targets)
    : ConditionalForge(n, m, params.k, targets) {}

void ConditionalForge::draw_assignment_into(Assignment& a, Rng& rng) const {
    a.n = n_;
    a.k = k_;
    a.type.resize(std::size_t(n_));
    for (auto& d : a.deg) d.assign(std::size_t(n_), 0);

    // Types conditioned on their counts: a uniformly shuffled label vector.
    std::size_t i = 0;
    for (; i < std::size_t(n_0); ++i) a.type[i] = VType::Zero;
    for (; i < std::size_t(n_0 + targets_.n_star); ++i) a.type[i] = VType::Star;
    for (; i < std::size_t(n_); ++i) a.type[i] = VType::One;
    for (std::size_t j = a.type.size(); j > 1; --j)
        std::swap(a.type[j - 1], a.type[std::size_t(rng.next_below(j))]);

    thread_local std::vector<std::int64_t> zeros, ones, senders;
    zeros.clear();
    ones.clear();
    senders.clear();
    zeros.reserve(std::size_t(n_0));
    ones.reserve(std::size_t(targets_.n_1));
    senders.reserve(std::size_t(targets_.n_star + targets_.n_1));
    for (std::int64_t v = 0; v < n_; ++v) {
        switch (a.type[std::size_t(v)]) {
            case VType::Zero: zeros.push_back(v); break;
            case VType::Star: senders.push_back(v); a.deg[2][std::size_t(v)] = k_ - 1; break;
            case VType::One: senders.push_back(v); ones.push_back(v); break;
        }
    }

    thread_local std::vector<std::int32_t> vals;
    throw_balls(m_00, std::int64_t(zeros.size()), rng, vals);
    for (std::size_t j = 0; j < zeros.size(); ++j) a.deg[0][std::size_t(zeros[j])] = vals[j];
    throw_balls(m_01, std::int64_t(senders.size()), rng, vals);
    for (std::size_t j = 0; j < senders.size(); ++j) a.deg[1][std::size_t(senders[j])] = vals[j];
    fam_10_->sample_given_sum(t_10, rng, vals);
    for (std::size_t j = 0; j < zeros.size(); ++j) a.deg[2][std::size_t(zeros[j])] = vals[j];
    fam_11_->sample_given_sum(targets_.m_11, rng, vals);
    for (std::size_t j = 0; j < ones.size(); ++j) a.deg[3][std::size_t(ones[j])] = vals[j];

    a.n_hat = {n_0, targets_.n_star, targets_.n_1};
    a.m_hat = {m_00, m_01, targets_.m_10, targets_.m_11};
}

ConditionalForge::Attempt ConditionalForge::attempt(Rng& rng) const {
    thread_local Assignment a;
    draw_assignment_into(a, rng);
    assert(parity_ok(a, m_));
    StageOutcome out = run_matching_stages(a, rng);
    Attempt at;
    at.stage = out.stage;
    at.loops = out.loops;
    at.multi_pairs = out.multi_pairs;
    at.x_star = out.x_star;
    at.x_plus = out.x_plus;
    at.graph = std::move(out.graph);
    return at;
}

ForgeResult ConditionalForge::sample(Rng& rng, std::uint64_t max_attempts) const {
    ForgeResult r;
    thread_local Assignment a;
    for (std::uint64_t tries = 1; tries <= max_attempts; ++tries) {
        draw_assignment_into(a, rng);
        StageOutcome out = run_matching_stages(a, rng);
        if (out.stage == ForgeStage::Success) {
            r.stage = ForgeStage::Success;
            r.assignment = a;
            r.loops = out.loops;
            r.multi_pairs = out.multi_pairs;
            r.x_star = out.x_star;
            r.x_plus = out.x_plus;
            r.pseudo = std::move(out.pseudo);
            r.graph = std::move(out.graph);
            r.attempts = tries;
            return r;
        }
    }
    throw attempts_exhausted_error("forge_conditional: attempt budget exhausted");
}

ForgeResult ConditionalForge::sample_parallel(std::uint64_t seed, int jobs,
                                              std::uint64_t max_attempts) const {
    if (jobs < 2) {
        Rng rng = Rng(seed).split(0);
        ForgeResult r = sample(rng, max_attempts);
        return r;
    }
    const Rng root(seed);
    const std::uint64_t wave = std::uint64_t(jobs) * 8;
    for (std::uint64_t base = 0; base < max_attempts; base += wave) {
        const std::uint64_t end = std::min(max_attempts, base + wave);
        std::mutex mtx;
        std::uint64_t best = UINT64_MAX;
        ForgeResult winner;
        parallel_for(std::int64_t(base), std::int64_t(end), jobs, [&](std::int64_t i, int) {
            Rng rng = root.split(std::uint64_t(i));
            Assignment a;
            draw_assignment_into(a, rng);
            StageOutcome out = run_matching_stages(a, rng);
            if (out.stage != ForgeStage::Success) return;
            std::lock_guard<std::mutex> lock(mtx);
            if (std::uint64_t(i) < best) {
                best = std::uint64_t(i);
                winner.stage = ForgeStage::Success;
                winner.assignment = std::move(a);
                winner.loops = out.loops;
                winner.multi_pairs = out.multi_pairs;
                winner.x_star = out.x_star;
                winner.x_plus = out.x_plus;
                winner.pseudo = std::move(out.pseudo);
                winner.graph = std::move(out.graph);
            }
        });
        if (best != UINT64_MAX) {
            winner.attempts = best + 1;
            return winner;
        }
    }
    throw attempts_exhausted_error("forge_conditional: attempt budget exhausted");
}

ForgeResult forge_conditional(std::int64_t n, std::int64_t m, int k,
                              const ConditionalTargets& targets, Rng& rng,
                              std::uint64_t max_attempts) {
    ConditionalForge cf(n, m, k, targets);
    return cf.sample(rng, max_attempts);
}

ForgeResult forge_conditional(std::int64_t n, std::int64_t m, const ModelParams& params,
                              const ConditionalTargets& targets, Rng& rng,
                              std::uint64_t max_attempts) {
    return forge_conditional(n, m, params.k, targets, rng, max_attempts);
}

}  // namespace kcore
