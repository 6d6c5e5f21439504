#include "kcore/sum_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kcore {

IntPmf pmf_table(const TruncatedPoisson& tp) {
    IntPmf f;
    f.lo = tp.support_min();
    const std::int64_t hi = tp.support_max();
    f.p.resize(std::size_t(hi - f.lo + 1));
    for (std::int64_t v = f.lo; v <= hi; ++v) f.p[std::size_t(v - f.lo)] = tp.pmf(v);
    return f;
}

namespace {

IntPmf convolve(const IntPmf& a, const IntPmf& b) {
    IntPmf c;
    c.lo = a.lo + b.lo;
    c.p.assign(a.p.size() + b.p.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.p.size(); ++i) {
        const double ai = a.p[i];
        if (ai == 0.0) continue;
        for (std::size_t j = 0; j < b.p.size(); ++j) c.p[i + j] += ai * b.p[j];
    }
    // Prune negligible tails so bandwidths stay O(sqrt(count)).
    double mx = 0.0;
    for (double v : c.p) mx = std::max(mx, v);
    const double cut = mx * IidSumModel::kPrune;
    std::size_t first = 0, last = c.p.size();
    while (first < last && c.p[first] < cut) ++first;
    while (last > first && c.p[last - 1] < cut) --last;
    if (first > 0 || last < c.p.size()) {
        c.p = std::vector<double>(c.p.begin() + first, c.p.begin() + last);
        c.lo += std::int64_t(first);
    }
    return c;
}

}  // namespace

IidSumModel::IidSumModel(IntPmf single, std::int64_t count)
    : count_(count), single_(std::move(single)) {
    if (count_ < 0) throw std::invalid_argument("IidSumModel: negative count");
    if (count_ == 0) {
        by_size_[0] = IntPmf{0, {1.0}};
        return;
    }
    // Sizes visited by halving; build their sum distributions bottom-up.
    std::vector<std::int64_t> stack{count_};
    while (!stack.empty()) {
        std::int64_t s = stack.back();
        stack.pop_back();
        if (by_size_.count(s)) continue;
        by_size_[s] = IntPmf{};
        if (s > 1) {
            stack.push_back(s / 2);
            stack.push_back(s - s / 2);
        }
    }
    for (auto& [size, dist] : by_size_) {
        if (size == 1) dist = single_;
        else dist = convolve(by_size_.at(size / 2), by_size_.at(size - size / 2));
    }
}

const IntPmf& IidSumModel::dist_of(std::int64_t size) const { return by_size_.at(size); }

const IntPmf& IidSumModel::sum_dist() const { return by_size_.at(count_); }

double IidSumModel::log_pmf_of_sum(std::int64_t total) const {
    double v = sum_dist().at(total);
    return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
}

void IidSumModel::sample_rec(std::int64_t size, std::int64_t total, Rng& rng,
                             std::vector<std::int32_t>& out) const {
    if (size == 0) return;
    if (size == 1) {
        if (single_.at(total) <= 0.0)
            throw infeasible_target_error("IidSumModel: leaf value outside support");
        out.push_back(std::int32_t(total));
        return;
    }
    const std::int64_t left = size / 2, right = size - left;
    const IntPmf& fl = dist_of(left);
    const IntPmf& fr = dist_of(right);
    const std::int64_t lo = std::max(fl.lo, total - fr.hi());
    const std::int64_t hi = std::min(fl.hi(), total - fr.lo);
    if (lo > hi) throw infeasible_target_error("IidSumModel: target sum has zero mass");
    // The split weights sum to the parent's pmf value (convolution), so no
    // normalisation pass is needed; scanning outward from the proportional
    // mode keeps the expected number of visited terms at O(conditional sd).
    const double w = dist_of(size).at(total);
    if (w <= 0.0) throw infeasible_target_error("IidSumModel: target sum has zero mass");
    const double u = rng.next_double() * w;
    const std::int64_t center = std::clamp(
        std::int64_t(std::llround(double(total) * double(left) / double(size))), lo, hi);
    double cum = 0.0;
    std::int64_t pick = center, last_positive = -1;
    for (std::int64_t r = 0;; ++r) {
        const std::int64_t a = center - r, b = center + r;
        bool in_range = false;
        if (a >= lo) {
            in_range = true;
            const double t = fl.at(a) * fr.at(total - a);
            if (t > 0.0) last_positive = a;
            cum += t;
            if (u <= cum && t > 0.0) { pick = a; break; }
        }
        if (r > 0 && b <= hi) {
            in_range = true;
            const double t = fl.at(b) * fr.at(total - b);
            if (t > 0.0) last_positive = b;
            cum += t;
            if (u <= cum && t > 0.0) { pick = b; break; }
        }
        if (!in_range) {
            // Pruned tails can leave cum a hair short of w; land on the last
            // outcome that carries mass.
            if (last_positive < 0)
                throw infeasible_target_error("IidSumModel: target sum has zero mass");
            pick = last_positive;
            break;
        }
    }
    sample_rec(left, pick, rng, out);
    sample_rec(right, total - pick, rng, out);
}

void IidSumModel::sample_given_sum(std::int64_t total, Rng& rng,
                                   std::vector<std::int32_t>& out) const {
    out.clear();
    out.reserve(std::size_t(count_));
    if (count_ == 0) {
        if (total != 0) throw infeasible_target_error("IidSumModel: empty family, nonzero sum");
        return;
    }
    sample_rec(count_, total, rng, out);
}

void throw_balls(std::int64_t balls, std::int64_t boxes, Rng& rng,
                 std::vector<std::int32_t>& counts) {
    counts.assign(std::size_t(boxes), 0);
    if (boxes == 0) {
        if (balls != 0) throw infeasible_target_error("throw_balls: no boxes for balls");
        return;
    }
    for (std::int64_t i = 0; i < balls; ++i)
        ++counts[std::size_t(rng.next_below(std::uint64_t(boxes)))];
}

}  // namespace kcore
