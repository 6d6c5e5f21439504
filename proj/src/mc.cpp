#include "kcore/mc.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <ostream>

#include "kcore/parallel.hpp"
#include "kcore/stats.hpp"

namespace kcore {

void EmpiricalDist::write_csv(std::ostream& out) const {
    out << "n_star,n_1,m_10,m_11,count\n";
    for (const auto& [key, c] : counts)
        out << key[0] << ',' << key[1] << ',' << key[2] << ',' << key[3] << ',' << c << '\n';
}

void StatReport::add(std::string name, double emp, double pred, double se, double tol) {
    CheckLine line{std::move(name), emp, pred, se, tol, false};
    line.pass = std::fabs(emp - pred) <= tol * std::fabs(pred);
    pass = pass && line.pass;
    lines.push_back(std::move(line));
}

void StatReport::add_abs(std::string name, double emp, double pred, double se, double tol) {
    CheckLine line{std::move(name), emp, pred, se, tol, false};
    line.pass = std::fabs(emp - pred) <= tol;
    pass = pass && line.pass;
    lines.push_back(std::move(line));
}

std::int64_t pair_index(std::int64_t n, VertexId u, VertexId v) {
    if (u > v) std::swap(u, v);
    const std::int64_t uu = u, vv = v;
    return uu * (2 * n - uu - 1) / 2 + (vv - uu - 1);
}

Edge pair_from_index(std::int64_t n, std::int64_t idx) {
    // Largest u with u*(2n-u-1)/2 <= idx.
    double du = (double(2 * n - 1) -
                 std::sqrt(double(2 * n - 1) * double(2 * n - 1) - 8.0 * double(idx))) /
                2.0;
    auto u = std::int64_t(du);
    if (u > 0 && u * (2 * n - u - 1) / 2 > idx) --u;
    while ((u + 1) * (2 * n - u - 2) / 2 <= idx) ++u;
    const std::int64_t v = idx - u * (2 * n - u - 1) / 2 + u + 1;
    return {VertexId(u), VertexId(v)};
}

void GnmSampler::sample(std::int64_t n, std::int64_t m, Rng& rng, std::vector<Edge>& edges) {
    const std::int64_t total = n * (n - 1) / 2;
    if (m < 0 || m > total) throw std::invalid_argument("sample_gnm: infeasible m");
    swapped_.reset(std::size_t(m));
    edges.clear();
    edges.reserve(std::size_t(m));
    for (std::int64_t i = 0; i < m; ++i) {
        const std::int64_t j = i + std::int64_t(rng.next_below(std::uint64_t(total - i)));
        const std::int64_t vj = swapped_.get_or(j, j);
        swapped_.put(j, swapped_.get_or(i, i));
        edges.push_back(pair_from_index(n, vj));
    }
}

Graph sample_gnm(std::int64_t n, std::int64_t m, Rng& rng) {
    GnmSampler sampler;
    std::vector<Edge> edges;
    sampler.sample(n, m, rng, edges);
    return Graph(VertexId(n), std::move(edges));
}

namespace {

// (n_star, n_1, m_10, m_11) of one graph, reusing the engine's buffers.
std::array<std::int64_t, 4> core_tuple(const Graph& g, int k, WpEngine& engine) {
    const WpState& wp = engine.run(g, k);
    std::array<std::int64_t, 4> t{0, 0, 0, 0};
    for (VertexId v = 0; v < g.num_vertices(); ++v) {
        if (wp.in_ones[v] == k - 1) ++t[0];
        else if (wp.in_ones[v] >= k) ++t[1];
    }
    std::int64_t m00 = 0, m01 = 0;
    for (VertexId v = 0; v < g.num_vertices(); ++v)
        for (std::uint32_t s = g.slot_begin(v); s < g.slot_end(v); ++s) {
            const int a = wp.messages[g.reverse_slot(s)];
            const int b = wp.messages[s];
            if (a == 1 && b == 0) ++t[2];
            else if (a == 1 && b == 1) ++t[3];
            else if (a == 0 && b == 0) ++m00;
            else ++m01;
        }
    assert(t[3] % 2 == 0);
    assert(m01 == t[2]);
    assert(m00 + 2 * m01 + t[3] == std::int64_t(2 * g.num_edges()));
    (void)m00;
    (void)m01;
    return t;
}

}  // namespace

EmpiricalDist mc_core_stats(std::int64_t n, std::int64_t m, int k, std::int64_t reps,
                            std::uint64_t seed, int jobs) {
    if (reps < 1) throw std::invalid_argument("mc_core_stats: reps must be positive");
    struct Worker {
        GnmSampler sampler;
        std::vector<Edge> edges;
        Graph g;
        WpEngine engine;
        std::map<std::array<std::int64_t, 4>, std::int64_t> counts;
    };
    const Rng root(seed);
    std::vector<Worker> workers(std::size_t(std::max(1, jobs)));
    parallel_for(0, reps, jobs, [&](std::int64_t rep, int w) {
        Worker& wk = workers[std::size_t(w)];
        Rng rng = root.split(std::uint64_t(rep));
        wk.sampler.sample(n, m, rng, wk.edges);
        wk.g.assign(VertexId(n), wk.edges, /*validated=*/true);
        ++wk.counts[core_tuple(wk.g, k, wk.engine)];
    });
    EmpiricalDist dist;
    for (auto& wk : workers)
        for (const auto& [key, c] : wk.counts) dist.counts[key] += c;
    dist.total = reps;
    return dist;
}

std::array<std::int64_t, 4> GammaCensus::largest_class() const {
    std::array<std::int64_t, 4> best{};
    std::int64_t best_count = -1;
    for (const auto& [key, c] : classes)
        if (c > best_count) { best_count = c; best = key; }
    return best;
}

GammaCensus enumerate_gamma(std::int64_t n, std::int64_t m, int k,
                            const std::array<std::int64_t, 4>* capture) {
    const std::int64_t total_pairs = n * (n - 1) / 2;
    if (m < 0 || m > total_pairs) throw std::invalid_argument("enumerate_gamma: infeasible m");
    if (total_pairs > 63) throw std::invalid_argument("enumerate_gamma: n too large for masks");
    double log_count = log_binomial(total_pairs, m);
    if (log_count > std::log(1e8))
        throw std::invalid_argument("enumerate_gamma: more than 1e8 graphs");

    GammaCensus census;
    if (capture) census.capture_key = *capture;

    std::vector<std::int64_t> chosen;
    chosen.reserve(std::size_t(m));
    std::vector<Edge> all_pairs;
    for (std::int64_t i = 0; i < total_pairs; ++i) all_pairs.push_back(pair_from_index(n, i));

    std::vector<Edge> edges;
    Graph g;
    WpEngine engine;
    auto emit = [&] {
        edges.clear();
        std::uint64_t mask = 0;
        for (std::int64_t idx : chosen) {
            edges.push_back(all_pairs[std::size_t(idx)]);
            mask |= (1ULL << idx);
        }
        g.assign(VertexId(n), edges);
        const auto key = core_tuple(g, k, engine);
        ++census.classes[key];
        ++census.total;
        if (capture && key == census.capture_key) census.capture_masks.push_back(mask);
    };

    // Revolving-door enumeration: successive m-subsets differ by one swap.
    std::function<void(std::int64_t, std::int64_t, bool)> gen =
        [&](std::int64_t t, std::int64_t r, bool rev) {
            if (r == 0) { emit(); return; }
            if (t == r) {
                for (std::int64_t i = 0; i < t; ++i) chosen.push_back(i);
                emit();
                for (std::int64_t i = 0; i < t; ++i) chosen.pop_back();
                return;
            }
            if (!rev) {
                gen(t - 1, r, false);
                chosen.push_back(t - 1);
                gen(t - 1, r - 1, true);
                chosen.pop_back();
            } else {
                chosen.push_back(t - 1);
                gen(t - 1, r - 1, false);
                chosen.pop_back();
                gen(t - 1, r, true);
            }
        };
    gen(total_pairs, m, false);
    return census;
}

StatReport uniformity_test(std::int64_t n, std::int64_t m, int k,
                           const ConditionalTargets& targets, std::int64_t samples,
                           std::uint64_t seed, int jobs) {
    const std::array<std::int64_t, 4> key = {targets.n_star, targets.n_1, targets.m_10,
                                             targets.m_11};
    GammaCensus census = enumerate_gamma(n, m, k, &key);
    const std::int64_t class_size = std::int64_t(census.capture_masks.size());
    if (class_size == 0) throw std::invalid_argument("uniformity_test: target class is empty");

    std::unordered_map<std::uint64_t, std::int64_t> index;
    index.reserve(std::size_t(class_size) * 2);
    for (std::int64_t i = 0; i < class_size; ++i) index[census.capture_masks[std::size_t(i)]] = i;

    ConditionalForge cf(n, m, k, targets);
    const Rng root(seed);
    const int nw = std::max(1, jobs);
    std::vector<std::vector<std::int64_t>> counts(
        std::size_t(nw), std::vector<std::int64_t>(std::size_t(class_size), 0));
    parallel_for(0, samples, jobs, [&](std::int64_t i, int w) {
        Rng rng = root.split(std::uint64_t(i));
        ForgeResult r = cf.sample(rng);
        std::uint64_t mask = 0;
        for (const auto& e : r.graph->edges()) mask |= (1ULL << pair_index(n, e.first, e.second));
        auto it = index.find(mask);
        if (it == index.end())
            throw std::logic_error("uniformity_test: forge output outside the target class");
        ++counts[std::size_t(w)][std::size_t(it->second)];
    });
    std::vector<std::int64_t> observed(std::size_t(class_size), 0);
    for (const auto& c : counts)
        for (std::int64_t i = 0; i < class_size; ++i) observed[std::size_t(i)] += c[std::size_t(i)];

    const double expected = double(samples) / double(class_size);
    StatReport rep;
    double chi = 0.0, tv = 0.0;
    for (std::int64_t i = 0; i < class_size; ++i) {
        const double o = double(observed[std::size_t(i)]);
        chi += (o - expected) * (o - expected) / expected;
        tv += std::fabs(o / double(samples) - 1.0 / double(class_size));
    }
    rep.chi_square = chi;
    rep.dof = class_size - 1;
    rep.p_value = chi_square_pvalue(chi, rep.dof);
    rep.tv_distance = tv / 2.0;
    rep.add_abs("chi_square_p_value_min_1e-3", rep.p_value, 1.0, 0.0, 1.0);
    rep.lines.back().pass = rep.p_value > 1e-3;
    rep.add_abs("tv_distance_max_0.02", rep.tv_distance, 0.0, 0.0, 0.02);
    rep.pass = rep.p_value > 1e-3 && rep.tv_distance <= 0.02 && expected >= 5.0;
    return rep;
}

StatReport llt_comparison(std::int64_t n, std::int64_t m, int k, std::int64_t reps,
                          std::uint64_t seed, const LltComparisonConfig& cfg, int jobs) {
    return llt_comparison(mc_core_stats(n, m, k, reps, seed, jobs), n, m, k, cfg);
}

StatReport llt_comparison(const EmpiricalDist& dist, std::int64_t n, std::int64_t m, int k,
                          const LltComparisonConfig& cfg) {
    const ModelParams mp = derive_params(double(2 * m) / double(n), k);
    const std::int64_t reps = dist.total;

    // Project onto (core order, core size).
    std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> hist;
    for (const auto& [key, c] : dist.counts) hist[{key[1], key[3] / 2}] += c;

    Mat q4 = q4_matrix(mp);
    const double cx = double(n) * mp.p * (1.0 - mp.q);
    const double cy = double(m) * mp.p * mp.p;
    const double sx = std::sqrt(double(n) * double(q4(1, 1)));
    const double sy = double(m) * std::sqrt(double(q4(3, 3)) / double(n));
    const auto bx = std::max<std::int64_t>(1, std::llround(sx / 2.0));
    const auto by = std::max<std::int64_t>(1, std::llround(sy / 2.0));

    std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> boxes;
    for (const auto& [xy, c] : hist) {
        const std::int64_t ix = std::int64_t(std::floor((double(xy.first) - cx) / double(bx)));
        const std::int64_t iy = std::int64_t(std::floor((double(xy.second) - cy) / double(by)));
        boxes[{ix, iy}] += c;
    }

    const CoreLaw law(n, m, mp);
    auto point_prob = [&](std::int64_t x, std::int64_t y) { return law.at(x, y); };

    double sum_rel = 0.0, max_rel = 0.0;
    std::int64_t qualifying = 0;
    for (const auto& [box, c] : boxes) {
        if (c < cfg.min_hits) continue;
        const std::int64_t x0 = std::int64_t(std::ceil(cx + double(box.first) * double(bx)));
        const std::int64_t y0 = std::int64_t(std::ceil(cy + double(box.second) * double(by)));
        double predicted = 0.0;
        for (std::int64_t x = x0; x < x0 + bx; ++x)
            for (std::int64_t y = y0; y < y0 + by; ++y) predicted += point_prob(x, y);
        const double rel = std::fabs(double(c) / double(reps) - predicted) / predicted;
        sum_rel += rel;
        max_rel = std::max(max_rel, rel);
        ++qualifying;
    }
    StatReport rep;
    if (qualifying == 0)
        throw std::runtime_error("llt_comparison: no box reached the hit threshold");

    // Sample covariance of the normalized pair vs the limit covariance.
    double su = 0.0, sv = 0.0, suu = 0.0, suv = 0.0, svv = 0.0;
    for (const auto& [xy, c] : hist) {
        const double u = (double(xy.first) - cx) / std::sqrt(double(n));
        const double v = 2.0 * (double(xy.second) - cy) / (mp.d * std::sqrt(double(n)));
        const double w = double(c);
        su += w * u;
        sv += w * v;
        suu += w * u * u;
        suv += w * u * v;
        svv += w * v * v;
    }
    const double r = double(reps);
    su /= r; sv /= r;
    const double c11 = suu / r - su * su;
    const double c12 = suv / r - su * sv;
    const double c22 = svv / r - sv * sv;
    Mat cov = clt_covariance(mp);

    const double se_box = 1.0 / std::sqrt(double(cfg.min_hits));
    rep.add("llt_mean_rel_error", sum_rel / double(qualifying), 0.0, se_box, 1.0);
    rep.lines.back().pass = sum_rel / double(qualifying) <= cfg.mean_tol;
    rep.lines.back().tolerance = cfg.mean_tol;
    rep.lines.back().predicted = 0.0;
    rep.add("llt_max_rel_error", max_rel, 0.0, se_box, 1.0);
    rep.lines.back().pass = max_rel <= cfg.max_tol;
    rep.lines.back().tolerance = cfg.max_tol;
    rep.pass = rep.lines[0].pass && rep.lines[1].pass;
    const double se_cov = std::sqrt(2.0 / r);
    rep.add("clt_cov_11", c11, double(cov(0, 0)), se_cov, cfg.cov_tol);
    rep.add("clt_cov_12", c12, double(cov(0, 1)), se_cov, cfg.cov_tol);
    rep.add("clt_cov_22", c22, double(cov(1, 1)), se_cov, cfg.cov_tol);
    return rep;
}

ForgeStageStats forge_stage_stats(std::int64_t n, std::int64_t m, int k,
                                  const ConditionalTargets& targets, std::int64_t trials,
                                  std::uint64_t seed, int jobs) {
    ConditionalForge cf(n, m, k, targets);
    const Rng root(seed);
    const int nw = std::max(1, jobs);
    std::vector<ForgeStageStats> parts(static_cast<std::size_t>(nw));
    parallel_for(0, trials, jobs, [&](std::int64_t i, int w) {
        Rng rng = root.split(std::uint64_t(i));
        auto at = cf.attempt(rng);
        ForgeStageStats& st = parts[std::size_t(w)];
        ++st.trials;
        const bool e2 = at.x_star == 0;
        const bool e3 = at.x_plus == 0;
        st.e2 += e2;
        st.e3 += e3;
        st.sum_x_star += at.x_star;
        st.sum_x_plus += at.x_plus;
        ++st.x_star_hist[at.x_star];
        if (e2 && e3) {
            ++st.e23;
            st.sum_loops_e23 += at.loops;
            st.sum_multi_e23 += at.multi_pairs;
            if (at.loops == 0 && at.multi_pairs == 0) ++st.simple_given_e23;
        }
        if (at.stage == ForgeStage::Success) ++st.success;
        if (at.stage == ForgeStage::WpMismatch && e2 && e3) ++st.wp_mismatch_without_cycles;
    });
    ForgeStageStats st;
    for (const auto& p : parts) {
        st.trials += p.trials;
        st.e2 += p.e2;
        st.e3 += p.e3;
        st.e23 += p.e23;
        st.simple_given_e23 += p.simple_given_e23;
        st.success += p.success;
        st.wp_mismatch_without_cycles += p.wp_mismatch_without_cycles;
        st.sum_x_star += p.sum_x_star;
        st.sum_x_plus += p.sum_x_plus;
        st.sum_loops_e23 += p.sum_loops_e23;
        st.sum_multi_e23 += p.sum_multi_e23;
        for (const auto& [v, c] : p.x_star_hist) st.x_star_hist[v] += c;
    }
    return st;
}

StatReport forge_stage_report(const ForgeStageStats& st, const ModelParams& mp, double tol) {
    const double g = 1.0 - mp.gamma_plus;
    const double t = double(st.trials);
    StatReport rep;
    auto se_rate = [&](double p) { return std::sqrt(std::max(0.0, p * (1.0 - p)) / t); };
    rep.add("pr_e2_no_star_cycle", st.p_e2(), g, se_rate(st.p_e2()), tol);
    rep.add("pr_e3_no_plus_cycle", st.p_e3(), std::sqrt(g), se_rate(st.p_e3()), tol);
    rep.add("pr_e2e3_vs_product", st.p_e23(), st.p_e2() * st.p_e3(), se_rate(st.p_e23()), tol);
    rep.add("mean_x_star", st.mean_x_star(), -std::log(g),
            std::sqrt(st.mean_x_star() / t), tol);
    rep.add("mean_x_plus", st.mean_x_plus(), -0.5 * std::log(g),
            std::sqrt(st.mean_x_plus() / t), tol);
    const double e23 = double(st.e23);
    rep.add("mean_loops_given_e23", st.mean_loops_e23(), mp.d / 2.0,
            std::sqrt(st.mean_loops_e23() / e23), tol);
    rep.add("mean_multiedges_given_e23", st.mean_multi_e23(), mp.d * mp.d / 4.0,
            std::sqrt(st.mean_multi_e23() / e23), tol);
    rep.add("pr_e1_given_e23_smoothed", st.p_e1_smoothed(),
            std::exp(-mp.d / 2.0 - mp.d * mp.d / 4.0),
            st.p_e1_smoothed() * std::sqrt((mp.d / 2.0 + mp.d * mp.d / 4.0) / e23), tol);
    rep.add("success_rate_smoothed", st.success_rate_smoothed(), mp.zeta,
            st.success_rate_smoothed() * std::sqrt((mp.d / 2.0 + mp.d * mp.d / 4.0) / e23), tol);
    return rep;
}

StatReport poisson_fit_report(const std::map<std::int64_t, std::int64_t>& hist,
                              std::int64_t total, double p_threshold) {
    double mean = 0.0;
    std::int64_t max_v = 0;
    for (const auto& [v, c] : hist) {
        mean += double(v) * double(c);
        max_v = std::max(max_v, v);
    }
    mean /= double(total);

    // Merge cells with expectation < 5 into the upper tail.
    std::vector<double> expected;
    std::vector<std::int64_t> observed;
    double tail_e = double(total);
    std::int64_t tail_o = total;
    for (std::int64_t v = 0; v <= max_v + 1; ++v) {
        const double e = double(total) * poisson_pmf(mean, v);
        if (e < 5.0 && !expected.empty()) break;
        auto it = hist.find(v);
        const std::int64_t o = it == hist.end() ? 0 : it->second;
        expected.push_back(e);
        observed.push_back(o);
        tail_e -= e;
        tail_o -= o;
    }
    if (tail_e > 0.5) {
        expected.push_back(std::max(tail_e, 1e-9));
        observed.push_back(tail_o);
    }
    StatReport rep;
    double chi = 0.0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const double diff = double(observed[i]) - expected[i];
        chi += diff * diff / expected[i];
    }
    rep.chi_square = chi;
    rep.dof = std::int64_t(expected.size()) - 2;  // mean estimated from the sample
    rep.p_value = rep.dof > 0 ? chi_square_pvalue(chi, rep.dof) : 1.0;
    rep.add_abs("poisson_fit_p_value", rep.p_value, 1.0, 0.0, 1.0);
    rep.lines.back().pass = rep.p_value > p_threshold;
    rep.pass = rep.lines.back().pass;
    return rep;
}

}  // namespace kcore
