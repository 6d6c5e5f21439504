#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "kcore/flat_map.hpp"
#include "kcore/forge.hpp"
#include "kcore/graph.hpp"
#include "kcore/llt.hpp"
#include "kcore/params.hpp"
#include "kcore/rng.hpp"

namespace kcore {

// Histogram over the (n_star, n_1, m_10, m_11) observable.
struct EmpiricalDist {
    std::map<std::array<std::int64_t, 4>, std::int64_t> counts;
    std::int64_t total = 0;

    void write_csv(std::ostream& out) const;
};

// One observable comparison within a report.
struct CheckLine {
    std::string observable;
    double empirical = 0.0;
    double predicted = 0.0;
    double stderr_est = 0.0;
    double tolerance = 0.0;  // relative unless stated in the name
    bool pass = false;
};

struct StatReport {
    std::vector<CheckLine> lines;
    double chi_square = 0.0;
    std::int64_t dof = 0;
    double p_value = 1.0;
    double tv_distance = 0.0;
    bool pass = true;

    void add(std::string name, double emp, double pred, double se, double tol);
    void add_abs(std::string name, double emp, double pred, double se, double tol);
};

// Uniform simple graph with n vertices and exactly m edges, by partial
// Fisher-Yates over the C(n,2) pair indices (no rejection).
class GnmSampler {
public:
    void sample(std::int64_t n, std::int64_t m, Rng& rng, std::vector<Edge>& edges);

private:
    FlatIndexMap swapped_;
};

// Pair index <-> (u,v) with 0 <= u < v < n, ordered by u then v.
std::int64_t pair_index(std::int64_t n, VertexId u, VertexId v);
Edge pair_from_index(std::int64_t n, std::int64_t idx);

Graph sample_gnm(std::int64_t n, std::int64_t m, Rng& rng);

// Replicated decompositions of G(n,m): the 4-tuple histogram.
EmpiricalDist mc_core_stats(std::int64_t n, std::int64_t m, int k, std::int64_t reps,
                            std::uint64_t seed, int jobs = 1);

// Exhaustive census of all graphs with n vertices and m edges, keyed by
// (n_star, n_1, m_10, m_11). Edge sets are recorded (as pair-index bitmasks)
// for the optional capture class.
struct GammaCensus {
    std::map<std::array<std::int64_t, 4>, std::int64_t> classes;
    std::int64_t total = 0;
    std::array<std::int64_t, 4> capture_key{};
    std::vector<std::uint64_t> capture_masks;

    std::array<std::int64_t, 4> largest_class() const;
};

GammaCensus enumerate_gamma(std::int64_t n, std::int64_t m, int k,
                            const std::array<std::int64_t, 4>* capture = nullptr);

// Chi-square and TV distance of forge_conditional draws against the uniform
// law on the enumerated class.
StatReport uniformity_test(std::int64_t n, std::int64_t m, int k,
                           const ConditionalTargets& targets, std::int64_t samples,
                           std::uint64_t seed, int jobs = 1);

// Empirical point probabilities of (core order, core size) vs the local
// limit law, aggregated over sigma/3 boxes with >= min_hits hits, plus the
// normalized-pair covariance vs the limit covariance.
struct LltComparisonConfig {
    double mean_tol = 0.10;
    double max_tol = 0.25;
    double cov_tol = 0.05;
    std::int64_t min_hits = 1000;
};
StatReport llt_comparison(std::int64_t n, std::int64_t m, int k, std::int64_t reps,
                          std::uint64_t seed, const LltComparisonConfig& cfg, int jobs = 1);
StatReport llt_comparison(const EmpiricalDist& dist, std::int64_t n, std::int64_t m, int k,
                          const LltComparisonConfig& cfg);

// Stage rates and multigraph diagnostics of the conditional pipeline,
// compared with the analytic limits.
struct ForgeStageStats {
    std::int64_t trials = 0;
    std::int64_t e2 = 0, e3 = 0, e23 = 0, simple_given_e23 = 0, success = 0;
    std::int64_t wp_mismatch_without_cycles = 0;
    std::int64_t sum_x_star = 0, sum_x_plus = 0;
    std::int64_t sum_loops_e23 = 0, sum_multi_e23 = 0;
    std::map<std::int64_t, std::int64_t> x_star_hist;

    double p_e2() const { return double(e2) / double(trials); }
    double p_e3() const { return double(e3) / double(trials); }
    double p_e23() const { return double(e23) / double(trials); }
    double mean_x_star() const { return double(sum_x_star) / double(trials); }
    double mean_x_plus() const { return double(sum_x_plus) / double(trials); }
    double mean_loops_e23() const { return double(sum_loops_e23) / double(e23); }
    double mean_multi_e23() const { return double(sum_multi_e23) / double(e23); }
    // Poisson-smoothed estimators for the rare simplicity event.
    double p_e1_smoothed() const { return std::exp(-mean_loops_e23() - mean_multi_e23()); }
    double success_rate_smoothed() const { return p_e23() * p_e1_smoothed(); }
};

ForgeStageStats forge_stage_stats(std::int64_t n, std::int64_t m, int k,
                                  const ConditionalTargets& targets, std::int64_t trials,
                                  std::uint64_t seed, int jobs = 1);

// The analytic comparison lines for a stage-stats run (needs d > d_k).
StatReport forge_stage_report(const ForgeStageStats& st, const ModelParams& params,
                              double tol = 0.05);

// Poisson goodness of fit for an integer histogram (parameter fitted by the
// sample mean; cells with expectation < 5 merged into the tail).
StatReport poisson_fit_report(const std::map<std::int64_t, std::int64_t>& hist,
                              std::int64_t total, double p_threshold);

}  // namespace kcore
