#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "kcore/params.hpp"
#include "kcore/rng.hpp"

namespace kcore {

struct infeasible_target_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Probability vector on a contiguous integer range [lo, lo+p.size()).
struct IntPmf {
    std::int64_t lo = 0;
    std::vector<double> p;

    std::int64_t hi() const { return lo + std::int64_t(p.size()) - 1; }
    double at(std::int64_t v) const {
        return (v < lo || v > hi()) ? 0.0 : p[std::size_t(v - lo)];
    }
};

IntPmf pmf_table(const TruncatedPoisson& tp);

// Law of the sum of `count` iid copies of a finite-support pmf, organised
// along a binary splitting tree so that a vector can be drawn exactly from
// the conditional distribution given its sum.
//
// Tails below kPrune (relative to the row maximum) are dropped; everything
// downstream therefore samples the law conditioned on staying inside bands
// whose missing mass is far below double rounding. For small counts the
// tables cover the whole support and the law is exact.
class IidSumModel {
public:
    IidSumModel() = default;
    IidSumModel(IntPmf single, std::int64_t count);

    std::int64_t count() const { return count_; }
    const IntPmf& sum_dist() const;
    double log_pmf_of_sum(std::int64_t total) const;

    // Exact draw of all `count` values conditioned on their sum; throws
    // infeasible_target_error when the target has (numerically) zero mass.
    void sample_given_sum(std::int64_t total, Rng& rng, std::vector<std::int32_t>& out) const;

    static constexpr double kPrune = 1e-45;

private:
    const IntPmf& dist_of(std::int64_t size) const;
    void sample_rec(std::int64_t size, std::int64_t total, Rng& rng,
                    std::vector<std::int32_t>& out) const;

    std::int64_t count_ = 0;
    IntPmf single_;
    std::map<std::int64_t, IntPmf> by_size_;
};

// Multinomial occupancy: throw `balls` balls into `boxes` boxes uniformly;
// this is the law of iid Po(rate) box counts conditioned on their sum.
void throw_balls(std::int64_t balls, std::int64_t boxes, Rng& rng,
                 std::vector<std::int32_t>& counts);

}  // namespace kcore
