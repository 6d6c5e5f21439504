#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "kcore/graph.hpp"
#include "kcore/params.hpp"
#include "kcore/rng.hpp"
#include "kcore/sum_sampler.hpp"

namespace kcore {

struct attempts_exhausted_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class VType : std::uint8_t { Zero = 0, Star = 1, One = 2 };

// Vertex types together with the pseudo-degrees of the typed half-edges.
struct Assignment {
    std::int64_t n = 0;
    int k = 0;
    std::vector<VType> type;
    // deg[ab][v] with ab indexed 00,01,10,11
    std::array<std::vector<std::int32_t>, 4> deg;
    std::array<std::int64_t, 3> n_hat{};   // counts of types 0, star, 1
    std::array<std::int64_t, 4> m_hat{};   // half-edge totals per type

    std::int64_t n_plus() const;  // type-0 vertices with d_10 = k-2
};

Assignment sample_assignment(std::int64_t n, const ModelParams& params, Rng& rng);

// Totals admissible for a target edge count: even 00/11 sums, balanced
// 01/10 sums, grand total 2m.
bool parity_ok(const Assignment& a, std::int64_t m);

// Typed multigraph produced by the half-edge matchings. Edges from the
// 01/10 matching are oriented from the 01 endpoint to the 10 endpoint.
struct MultiGraph {
    enum class EdgeType : std::uint8_t { T00, T10, T11 };
    struct MEdge {
        VertexId u, v;  // for T10: u is the 01 (sender) endpoint
        EdgeType type;
    };
    std::int64_t n = 0;
    std::vector<MEdge> edges;
};

MultiGraph match_halfedges(const Assignment& a, Rng& rng);

struct SimplicityReport {
    bool simple = true;
    std::int64_t loops = 0;        // Y: loop edge instances
    std::int64_t multi_pairs = 0;  // Z: unordered pairs of parallel instances
};
SimplicityReport simplicity(const MultiGraph& mg);

// Forbidden-cycle counts measured against the assignment's intended types:
// directed cycles over 01->10 arcs inside N_star, cycles over 00 edges
// inside N_+ (loops and parallel pairs included).
struct MultiGraphCycles {
    std::int64_t x_star = 0;
    std::int64_t x_plus = 0;
};
MultiGraphCycles count_multigraph_cycles(const Assignment& a, const MultiGraph& mg);

// Pseudo-messages on a simple multigraph, returned per directed slot of
// `contracted` (which must be the Graph built from mg's edges).
std::vector<std::uint8_t> pseudo_messages(const Assignment& a, const MultiGraph& mg,
                                          const Graph& contracted);

enum class ForgeStage : std::uint8_t { Success, Parity, NotSimple, WpMismatch };

const char* to_string(ForgeStage s);

struct ForgeResult {
    ForgeStage stage = ForgeStage::Parity;
    Assignment assignment;
    std::optional<Graph> graph;  // set on Success
    std::vector<std::uint8_t> pseudo;  // per slot of graph, set when simple
    std::int64_t loops = 0, multi_pairs = 0;      // Y, Z (when matching ran)
    std::int64_t x_star = 0, x_plus = 0;          // multigraph forbidden cycles
    std::uint64_t attempts = 1;
};

// One unconditional run of the whole pipeline.
ForgeResult forge_once(std::int64_t n, std::int64_t m, const ModelParams& params, Rng& rng);

struct ConditionalTargets {
    std::int64_t n_star = 0;
    std::int64_t n_1 = 0;
    std::int64_t m_10 = 0;
    std::int64_t m_11 = 0;
};

// The centred lattice point: type counts at n*nu, edge counts at 2m*mu,
// with m_11 rounded down to an even integer.
ConditionalTargets centered_targets(std::int64_t n, std::int64_t m, const ModelParams& params);

// Sampler for Forge conditioned on the totals event: the type partition is
// uniform given its counts, the 00/01 degree families are balls-in-boxes,
// and the truncated families are drawn exactly given their sums. Repeated
// attempts then run the matching and acceptance stages unchanged.
//
// The conditional law is free of the lambda rates (they cancel on the event
// that the family sums are fixed), so the sampler needs only (n, m, k) and
// the targets; in particular it works for d below the threshold, where
// derive_params refuses. Rates solving the truncated mean equations are
// still used internally to centre the convolution tables.
class ConditionalForge {
public:
    ConditionalForge(std::int64_t n, std::int64_t m, int k, const ConditionalTargets& targets);
    ConditionalForge(std::int64_t n, std::int64_t m, const ModelParams& params,
                     const ConditionalTargets& targets);

    struct Attempt {
        ForgeStage stage = ForgeStage::NotSimple;
        std::int64_t loops = 0, multi_pairs = 0;
        std::int64_t x_star = 0, x_plus = 0;
        std::optional<Graph> graph;
    };

    // One conditioned draw of the assignment plus matching and checks.
    // Deterministic function of the rng stream.
    Attempt attempt(Rng& rng) const;

    // Repeat attempts until Success; result.attempts records the count.
    ForgeResult sample(Rng& rng, std::uint64_t max_attempts = 1000000000ULL) const;

    // Racing mode: waves of attempts run on `jobs` threads, each attempt on
    // its own substream of `seed`; the lowest successful attempt index wins,
    // so the output is a pure function of the seed at any thread count.
    ForgeResult sample_parallel(std::uint64_t seed, int jobs,
                                std::uint64_t max_attempts = 1000000000ULL) const;

    const ConditionalTargets& targets() const { return targets_; }
    std::int64_t n() const { return n_; }
    std::int64_t m() const { return m_; }
    int k() const { return k_; }

private:
    void draw_assignment_into(Assignment& a, Rng& rng) const;

    std::int64_t n_ = 0, m_ = 0;
    int k_ = 0;
    ConditionalTargets targets_;
    std::int64_t n_0 = 0, m_00 = 0, m_01 = 0, t_10 = 0;
    std::shared_ptr<const IidSumModel> fam_10_;  // sum of Po_{<=k-2} over N_0
    std::shared_ptr<const IidSumModel> fam_11_;  // sum of Po_{>=k} over N_1
};

// Rate r with E[TruncatedPoisson{r, kind, bound}] = target_mean (bisection).
double solve_truncated_mean_rate(TruncKind kind, std::int64_t bound, double target_mean);

ForgeResult forge_conditional(std::int64_t n, std::int64_t m, int k,
                              const ConditionalTargets& targets, Rng& rng,
                              std::uint64_t max_attempts = 1000000000ULL);
ForgeResult forge_conditional(std::int64_t n, std::int64_t m, const ModelParams& params,
                              const ConditionalTargets& targets, Rng& rng,
                              std::uint64_t max_attempts = 1000000000ULL);

}  // namespace kcore
