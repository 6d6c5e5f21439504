#include "kcore/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

#include "kcore/forge.hpp"
#include "kcore/graph.hpp"
#include "kcore/llt.hpp"
#include "kcore/mc.hpp"
#include "kcore/params.hpp"
#include "kcore/rng.hpp"
#include "kcore/stats.hpp"

namespace kcore::acceptance {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

struct Ctx {
    Options opt;
    std::ostream* out = nullptr;
    std::vector<CriterionResult> results;

    template <typename Fn>
    void criterion(int number, const std::string& name, Fn&& fn) {
        if (opt.only != 0 && opt.only != number) return;
        CriterionResult r;
        r.number = number;
        r.name = name;
        const auto t0 = Clock::now();
        std::ostringstream details;
        try {
            r.pass = fn(details);
        } catch (const std::exception& e) {
            r.pass = false;
            details << "exception: " << e.what();
        }
        r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        r.details = details.str();
        if (out)
            (*out) << (r.pass ? "PASS" : "FAIL") << " criterion " << r.number << ": " << r.name
                   << " [" << fmt(r.seconds) << "s] " << r.details << std::endl;
        results.push_back(std::move(r));
    }
};

// --- 1. Warning Propagation vs peeling on random graphs ---
bool c1_wp_vs_peeling(const Options& opt, std::ostream& det) {
    const Rng root(opt.seed);
    const int cases = 2000;
    int agree = 0;
    for (int i = 0; i < cases; ++i) {
        Rng rng = root.split(std::uint64_t(i));
        const std::int64_t n = 3 + std::int64_t(rng.next_below(198));
        const int k = 3 + int(rng.next_below(3));
        const double d = 1.0 + double(rng.next_below(8));
        const std::int64_t m =
            std::min(n * (n - 1) / 2, std::int64_t(std::llround(d * double(n) / 2.0)));
        Graph g = sample_gnm(n, m, rng);
        WpState wp = wp_run(g, k);
        auto core = peel_core(g, k);
        std::vector<std::uint8_t> in_core(std::size_t(n), 0);
        for (VertexId v : core) in_core[v] = 1;
        bool ok = true;
        for (VertexId v = 0; v < g.num_vertices() && ok; ++v)
            ok = (wp.marks[v] == in_core[v]);
        // Core edges are exactly the edges carrying 1-messages both ways.
        for (const auto& e : g.edges()) {
            if (!ok) break;
            const bool core_edge = in_core[e.first] && in_core[e.second];
            const bool msg_edge = wp.messages[g.slot_of(e.first, e.second)] == 1 &&
                                  wp.messages[g.slot_of(e.second, e.first)] == 1;
            ok = (core_edge == msg_edge);
        }
        if (wp.rounds > std::int64_t(2 * g.num_edges() + 1)) ok = false;
        agree += ok;
    }
    det << agree << "/" << cases << " graphs: WP marks == peeled core, message edges == core edges";
    return agree == cases;
}

// --- 2. Fixed point and threshold ---
bool c2_fixed_point(const Options&, std::ostream& det) {
    double worst_resid = 0.0;
    bool bounds_ok = true;
    for (int k = 3; k <= 6; ++k) {
        const double dk = threshold(k, 1e-10);
        for (double d = dk + 0.1; d <= 10.0; d += 0.1) {
            const ModelParams mp = derive_params(d, k);
            worst_resid = std::max(worst_resid, std::fabs(phi(d, k, mp.p) - mp.p));
            if (mp.p < (double(k) - 2.0 + std::sqrt(double(k) - 2.0)) / d) bounds_ok = false;
            if (mp.gamma_plus >= 1.0) bounds_ok = false;
        }
    }
    // Independent oracle for d_3: 1e-4 grid scan for the first positive fixed
    // point, then bisection inside the bracketing step.
    double lo = 3.0, hi = 0.0;
    for (double d = 3.0; d <= 4.0; d += 1e-4) {
        if (largest_fixed_point(d, 3) > 0.0) { hi = d; break; }
        lo = d;
    }
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (largest_fixed_point(mid, 3) > 0.0 ? hi : lo) = mid;
    }
    const double oracle_d3 = 0.5 * (lo + hi);
    const double d3 = threshold(3, 1e-10);
    det << "max |phi(p)-p| = " << fmt(worst_resid) << ", d_3 = " << d3
        << ", |d_3 - scan| = " << fmt(std::fabs(d3 - oracle_d3))
        << ", Fact-2.2 bounds " << (bounds_ok ? "hold" : "VIOLATED");
    return worst_resid <= 1e-12 && std::fabs(d3 - oracle_d3) <= 1e-6 && bounds_ok;
}

// --- 3. Matrix identities on the (d,k) grid ---
bool c3_matrix_identities(const Options&, std::ostream& det) {
    double worst_block = 0.0, worst_marginal = 0.0;
    for (int k = 3; k <= 6; ++k) {
        const double dk = threshold(k, 1e-10);
        for (double d = dk + 0.25; d <= 10.0 + 1e-9; d += 0.25) {
            const ModelParams mp = derive_params(d, k);
            worst_block = std::max(worst_block, block_identity_check(mp));
            worst_marginal = std::max(worst_marginal, marginal_consistency_check(mp));
        }
    }
    det << "max block residual = " << fmt(worst_block)
        << ", max marginal residual = " << fmt(worst_marginal);
    return worst_block <= 1e-8 && worst_marginal <= 1e-8;
}

// --- 4. Lattice normalization of the limit laws ---
bool c4_llt_normalization(const Options&, std::ostream& det) {
    bool ok = true;
    std::ostringstream parts;
    for (auto [d, k] : {std::pair<double, int>{5.0, 3}, {7.0, 4}}) {
        const std::int64_t n = 100000;
        const auto m = std::int64_t(std::ceil(d * double(n) / 2.0));
        const ModelParams mp = derive_params(d, k);
        const double sc = lattice_sum_core(n, m, mp);
        const double sj = lattice_sum_joint(n, m, mp);
        parts << " (d=" << d << ",k=" << k << "): core " << fmt(sc) << ", joint " << fmt(sj);
        ok = ok && std::fabs(sc - 1.0) <= 0.01 && std::fabs(sj - 1.0) <= 0.01;
    }
    det << "lattice sums" << parts.str();
    return ok;
}

// --- 5. LLT vs Monte Carlo ---
bool c5_llt_vs_mc(const Options& opt, std::ostream& det) {
    LltComparisonConfig cfg;
    std::int64_t n, reps;
    if (opt.quick) {
        n = 20000;
        reps = 20000;
        cfg.mean_tol = 0.20;
        cfg.max_tol = 0.40;
        cfg.cov_tol = 0.10;
    } else {
        n = 100000;
        reps = 100000;
        cfg.mean_tol = 0.10;
        cfg.max_tol = 0.25;
        cfg.cov_tol = 0.05;
    }
    const std::int64_t m = std::int64_t(std::ceil(5.0 * double(n) / 2.0));
    StatReport rep = llt_comparison(n, m, 3, reps, opt.seed, cfg, opt.jobs);
    for (const auto& line : rep.lines)
        det << line.observable << " = " << fmt(line.empirical) << " (ref " << fmt(line.predicted)
            << ", tol " << fmt(line.tolerance) << (line.pass ? ", ok) " : ", FAIL) ");
    return rep.pass;
}

// --- 6/7 share one conditioned run ---
struct ForgeRun {
    ForgeStageStats stats;
    ModelParams params;
    bool ran = false;
};

ForgeRun run_forge_stats(const Options& opt) {
    ForgeRun fr;
    const std::int64_t n = 100000;
    const double d = 5.0;
    const int k = 3;
    const auto m = std::int64_t(std::ceil(d * double(n) / 2.0));
    fr.params = derive_params(d, k);
    const ConditionalTargets targets = centered_targets(n, m, fr.params);
    fr.stats = forge_stage_stats(n, m, k, targets, 10000, opt.seed, opt.jobs);
    fr.ran = true;
    return fr;
}

bool c6_forge_success(const ForgeRun& fr, std::ostream& det) {
    StatReport rep = forge_stage_report(fr.stats, fr.params, 0.05);
    bool ok = true;
    for (const auto& line : rep.lines) {
        if (line.observable == "pr_e2_no_star_cycle" || line.observable == "pr_e3_no_plus_cycle" ||
            line.observable == "pr_e1_given_e23_smoothed" ||
            line.observable == "success_rate_smoothed") {
            det << line.observable << " = " << fmt(line.empirical) << " (ref "
                << fmt(line.predicted) << (line.pass ? ", ok) " : ", FAIL) ");
            ok = ok && line.pass;
        }
    }
    return ok;
}

bool c7_forge_diagnostics(const ForgeRun& fr, std::ostream& det) {
    StatReport rep = forge_stage_report(fr.stats, fr.params, 0.05);
    bool ok = true;
    for (const auto& line : rep.lines) {
        if (line.observable == "mean_x_star" || line.observable == "mean_x_plus" ||
            line.observable == "mean_loops_given_e23" ||
            line.observable == "mean_multiedges_given_e23") {
            det << line.observable << " = " << fmt(line.empirical) << " (ref "
                << fmt(line.predicted) << (line.pass ? ", ok) " : ", FAIL) ");
            ok = ok && line.pass;
        }
    }
    StatReport fit = poisson_fit_report(fr.stats.x_star_hist, fr.stats.trials, 1e-3);
    det << "x_star poisson fit p = " << fmt(fit.p_value);
    return ok && fit.pass;
}

// --- 8. Exact conditional uniformity at desk scale ---
bool c8_conditional_uniformity(const Options& opt, std::ostream& det) {
    const std::int64_t n = 7, m = 10;
    const int k = 3;
    const std::int64_t samples = 1000000;
    GammaCensus census = enumerate_gamma(n, m, k);

    // Chi-square on the largest class outright. The 0.02 TV tolerance is
    // only reachable when cells expect >= ~640 hits (the null expectation of
    // TV is 1/sqrt(2 pi E)), so it is checked on the largest class small
    // enough for that at 1e6 samples.
    const auto key = census.largest_class();
    std::array<std::int64_t, 4> tv_key{};
    std::int64_t tv_size = 0;
    for (const auto& [cls, count] : census.classes)
        if (count > tv_size && count <= samples / 640) { tv_size = count; tv_key = cls; }
    if (tv_size == 0) {
        det << "no class small enough for the TV tolerance";
        return false;
    }

    ConditionalTargets big{key[0], key[1], key[2], key[3]};
    StatReport rep_big = uniformity_test(n, m, k, big, samples, opt.seed, opt.jobs);
    ConditionalTargets small{tv_key[0], tv_key[1], tv_key[2], tv_key[3]};
    StatReport rep_small = uniformity_test(n, m, k, small, samples, opt.seed + 1, opt.jobs);

    det << "census total " << census.total << "; largest class (" << key[0] << "," << key[1]
        << "," << key[2] << "," << key[3] << ") size " << census.classes.at(key)
        << ": chi2 p = " << fmt(rep_big.p_value) << ", TV = " << fmt(rep_big.tv_distance)
        << " (null TV ~ " << fmt(1.0 / std::sqrt(2.0 * M_PI * double(samples) /
                                                 double(census.classes.at(key))))
        << "); TV class (" << tv_key[0] << "," << tv_key[1] << "," << tv_key[2] << ","
        << tv_key[3] << ") size " << tv_size << ": chi2 p = " << fmt(rep_small.p_value)
        << ", TV = " << fmt(rep_small.tv_distance);
    return rep_big.p_value > 1e-3 && rep_small.p_value > 1e-3 &&
           rep_small.tv_distance <= 0.02;
}

// --- 9. u-probability and gamma-count consistency ---
bool c9_u_consistency(const Options&, std::ostream& det) {
    bool ok = true;

    // (a) u_exact sums to 1 over its enumerated support at n=5.
    {
        const ModelParams mp = derive_params(5.0, 3);
        const NVec vn = {2, 1, 2};
        UExact u(vn, mp);
        const auto& f10 = u.family_10().sum_dist();
        const auto& f11 = u.family_11().sum_dist();
        const std::int64_t cap00 = 80, cap01 = 80;
        double sum = 0.0;
        for (std::int64_t m00 = 0; m00 <= cap00; ++m00)
            for (std::int64_t m01 = 0; m01 <= cap01; ++m01)
                for (std::int64_t s10 = f10.lo; s10 <= f10.hi(); ++s10)
                    for (std::int64_t s11 = f11.lo; s11 <= f11.hi(); ++s11)
                        sum += u.at({m00, m01, s10 + 2 * vn[1], s11});
        det << "u_exact support sum = " << fmt(sum);
        ok = ok && std::fabs(sum - 1.0) <= 1e-10;
    }

    // (b) Gaussian u vs exact u at n=200, centred. At (4,3) every degree
    // family has a healthy mean at this size; at (5,3) the 00-family mean is
    // ~2 and the discrete law is far from its Gaussian limit.
    {
        const std::int64_t n = 200;
        const auto m = std::int64_t(std::ceil(4.0 * double(n) / 2.0));
        const ModelParams mp = derive_params(4.0, 3);
        NVec vn = {0, std::llround(double(n) * mp.nu[1]), std::llround(double(n) * mp.nu[2])};
        vn[0] = n - vn[1] - vn[2];
        MVec vm{};
        vm[1] = std::llround(2.0 * double(m) * mp.mu[1]);
        vm[2] = std::max<std::int64_t>(std::llround(2.0 * double(m) * mp.mu[2]), 2 * vn[1]);
        vm[3] = std::llround(2.0 * double(m) * mp.mu[3]);
        vm[0] = 2 * m - vm[1] - vm[2] - vm[3];
        const double ue = u_exact(vn, vm, mp);
        const double ug = u_gaussian(vn, vm, n, m, mp);
        det << "; u_gauss/u_exact = " << fmt(ug / ue);
        ok = ok && std::fabs(ug / ue - 1.0) <= 0.15;
    }

    // (c) The four gamma-count formulas agree at n=1e4.
    {
        const std::int64_t n = 10000;
        const auto m = std::int64_t(std::ceil(5.0 * double(n) / 2.0));
        const ModelParams mp = derive_params(5.0, 3);
        const ConditionalTargets t = centered_targets(n, m, mp);
        const CoreObservable o{t.n_star, t.n_1, t.m_10, t.m_11};
        const double le = log_gamma_count(o, n, m, mp, GammaMode::ExactU);
        const double lg = log_gamma_count(o, n, m, mp, GammaMode::GaussianU);
        const double lc = log_gamma_count(o, n, m, mp, GammaMode::ClosedForm);
        const double lk = log_gamma_count(o, n, m, mp, GammaMode::KlForm);
        const double spread = std::max({le, lg, lc, lk}) - std::min({le, lg, lc, lk});
        det << "; gamma-mode log spread = " << fmt(spread);
        ok = ok && spread <= 0.5;
    }

    // (d) Exact census at n=7 (m=14, i.e. d=4: comfortably supercritical,
    // where the asymptotic constants are already meaningful at desk scale).
    {
        const std::int64_t n = 7, m = 14;
        const int k = 3;
        const ModelParams mp = derive_params(2.0 * double(m) / double(n), k);
        GammaCensus census = enumerate_gamma(n, m, k);
        const auto key = census.largest_class();
        const CoreObservable o{key[0], key[1], key[2], key[3]};
        const double predicted = log_gamma_count(o, n, m, mp, GammaMode::ExactU);
        const double actual = std::log(double(census.classes.at(key)));
        det << "; census log |Gamma| = " << fmt(actual) << " vs formula " << fmt(predicted);
        ok = ok && std::fabs(predicted - actual) <= 1.0;
    }
    return ok;
}

// --- 10. The contraction property of f_k ---
bool c10_contraction(const Options&, std::ostream& det) {
    const std::vector<std::pair<double, int>> pairs = {
        {3.6, 3}, {4.0, 3}, {5.0, 3}, {7.0, 3}, {5.4, 4}, {6.0, 4},
        {8.0, 4}, {7.0, 5}, {8.0, 5}, {9.0, 5}, {8.5, 6}, {10.0, 6}};
    bool ok = true;
    double worst_gap = 1.0, worst_concavity = -1.0;
    for (auto [d, k] : pairs) {
        const ModelParams mp = derive_params(d, k);
        if (std::fabs(contraction_fk(mp, 0.0)) > 1e-15) ok = false;
        std::vector<double> vals;
        for (int i = 1; i <= 100; ++i) {
            const double x = double(i) / 100.0;
            const double f = contraction_fk(mp, x);
            vals.push_back(f);
            if (f >= x) ok = false;
            worst_gap = std::min(worst_gap, x - f);
        }
        for (std::size_t i = 1; i + 1 < vals.size(); ++i) {
            const double second = vals[i + 1] - 2.0 * vals[i] + vals[i - 1];
            worst_concavity = std::max(worst_concavity, second);
            if (second > 1e-9) ok = false;
        }
        for (std::size_t i = 1; i < vals.size(); ++i)
            if (vals[i] <= vals[i - 1]) ok = false;
    }
    det << "12 (d,k) pairs, min (x - f_k(x)) = " << fmt(worst_gap)
        << ", max discrete second difference = " << fmt(worst_concavity);
    return ok;
}

}  // namespace

std::vector<CriterionResult> run_all(const Options& opt, std::ostream& out) {
    Ctx ctx;
    ctx.opt = opt;
    ctx.out = &out;

    ctx.criterion(1, "warning propagation matches peeling", [&](std::ostream& d) {
        return c1_wp_vs_peeling(opt, d);
    });
    ctx.criterion(2, "fixed point and threshold", [&](std::ostream& d) {
        return c2_fixed_point(opt, d);
    });
    ctx.criterion(3, "matrix identities", [&](std::ostream& d) {
        return c3_matrix_identities(opt, d);
    });
    ctx.criterion(4, "limit-law lattice normalization", [&](std::ostream& d) {
        return c4_llt_normalization(opt, d);
    });
    ctx.criterion(5, std::string("limit law vs Monte Carlo") + (opt.quick ? " (quick)" : ""),
                  [&](std::ostream& d) { return c5_llt_vs_mc(opt, d); });

    ForgeRun fr;
    ctx.criterion(6, "conditioned forge success rates", [&](std::ostream& d) {
        fr = run_forge_stats(opt);
        return c6_forge_success(fr, d);
    });
    ctx.criterion(7, "forbidden-cycle / loop / multi-edge statistics", [&](std::ostream& d) {
        if (!fr.ran) fr = run_forge_stats(opt);
        return c7_forge_diagnostics(fr, d);
    });
    ctx.criterion(8, "conditional uniformity (desk scale)", [&](std::ostream& d) {
        return c8_conditional_uniformity(opt, d);
    });
    ctx.criterion(9, "u-probability consistency", [&](std::ostream& d) {
        return c9_u_consistency(opt, d);
    });
    ctx.criterion(10, "contraction property", [&](std::ostream& d) {
        return c10_contraction(opt, d);
    });

    return ctx.results;
}

bool all_passed(const std::vector<CriterionResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return !results.empty();
}

}  // namespace kcore::acceptance
