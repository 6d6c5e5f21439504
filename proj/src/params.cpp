#include "kcore/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kcore {

namespace {

constexpr double kFixedPointFloor = 1e-9;  // below this the iterate is read as p = 0
constexpr int kMaxFixedPointIters = 100000;

}  // namespace

double poisson_log_pmf(double rate, std::int64_t j) {
    if (j < 0) return -std::numeric_limits<double>::infinity();
    if (rate < 0) throw std::domain_error("poisson_log_pmf: negative rate");
    if (rate == 0.0) return j == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return double(j) * std::log(rate) - rate - std::lgamma(double(j) + 1.0);
}

double poisson_pmf(double rate, std::int64_t j) {
    double lp = poisson_log_pmf(rate, j);
    return std::isinf(lp) ? 0.0 : std::exp(lp);
}

double poisson_cdf(double rate, std::int64_t j) {
    if (j < 0) return 0.0;
    if (rate == 0.0) return 1.0;
    // Sum from the smaller side; terms via the stable log-space start.
    double term = std::exp(-rate);
    double sum = term;
    for (std::int64_t i = 1; i <= j; ++i) {
        term *= rate / double(i);
        sum += term;
    }
    if (term == 0.0 && rate > 700.0) {
        // Underflow regime: rebuild around the mode in log space.
        double lsum = -std::numeric_limits<double>::infinity();
        for (std::int64_t i = 0; i <= j; ++i) {
            double lp = poisson_log_pmf(rate, i);
            lsum = std::max(lsum, lp) + std::log1p(std::exp(-std::fabs(lsum - lp)));
        }
        return std::min(1.0, std::exp(lsum));
    }
    return std::min(1.0, sum);
}

double poisson_tail(double rate, std::int64_t j) {
    if (j <= 0) return 1.0;
    if (rate == 0.0) return 0.0;
    double cdf = poisson_cdf(rate, j - 1);
    if (cdf < 0.5) return 1.0 - cdf;
    // For tiny tails, sum upward from j until negligible.
    double term = poisson_pmf(rate, j);
    double sum = term;
    for (std::int64_t i = j + 1; term > 0.0; ++i) {
        term *= rate / double(i);
        sum += term;
        if (term < sum * 1e-18 && double(i) > rate) break;
    }
    return sum;
}

std::int64_t poisson_sample(double rate, Rng& rng) {
    if (rate <= 0.0) return 0;
    double u = rng.next_double();
    double term = std::exp(-rate);
    double cum = term;
    std::int64_t j = 0;
    // rate is O(d) here, so the walk terminates quickly; the cap is paranoia.
    const std::int64_t cap = std::int64_t(rate + 60.0 * std::sqrt(rate) + 60.0);
    while (u > cum && j < cap) {
        ++j;
        term *= rate / double(j);
        cum += term;
    }
    return j;
}

double varphi(std::int64_t ell, double y) {
    return poisson_tail(y, ell - 1);
}

double phi(double d, int k, double x) {
    if (d <= 0) throw std::domain_error("phi: d must be positive");
    if (k < 3) throw std::domain_error("phi: k must be at least 3");
    if (x < 0.0 || x > 1.0) throw std::domain_error("phi: x outside [0,1]");
    return poisson_tail(d * x, k - 1);
}

double largest_fixed_point(double d, int k, double tol) {
    if (d <= 0) throw std::domain_error("largest_fixed_point: d must be positive");
    if (k < 3) throw std::domain_error("largest_fixed_point: k must be at least 3");
    if (tol <= 0) throw std::domain_error("largest_fixed_point: tol must be positive");

    // The iteration x <- phi(x) from 1 decreases monotonically to the largest
    // fixed point.
    double x = 1.0;
    for (int it = 0; it < kMaxFixedPointIters; ++it) {
        double nx = phi(d, k, x);
        double delta = x - nx;
        x = nx;
        if (x < kFixedPointFloor) return 0.0;
        if (delta < 1e-14) break;
    }
    if (x < kFixedPointFloor) return 0.0;

    // Polish by bisection on g(t) = phi(t) - t. The iterate sits just above
    // the fixed point (g <= 0 there); g > 0 just below it when d > d_k.
    double hi = std::min(1.0, x + 1e-12);
    double lo = x;
    double step = std::max(1e-12, 16.0 * tol);
    bool bracketed = false;
    while (lo > kFixedPointFloor && step < 2e-3) {
        lo = std::max(kFixedPointFloor, x - step);
        if (phi(d, k, lo) - lo > 0.0) { bracketed = true; break; }
        step *= 4.0;
    }
    if (!bracketed) return x;  // near-critical tangency; the iterate is the best estimate
    for (int it = 0; it < 200 && hi - lo > tol * 0.5; ++it) {
        double mid = 0.5 * (lo + hi);
        if (phi(d, k, mid) - mid > 0.0) lo = mid; else hi = mid;
    }
    x = 0.5 * (lo + hi);
    // Newton polish: phi'(x) = d * Pr[Po(dx) = k-2]. Drives |phi(p)-p| to
    // machine rounding, which the matrix identities downstream rely on.
    // Steps stay clamped inside the bisection bracket: near d_k a free
    // Newton step can jump across to the lower (unstable) fixed point.
    for (int it = 0; it < 6; ++it) {
        const double g = phi(d, k, x) - x;
        const double gp = d * poisson_pmf(d * x, k - 2) - 1.0;
        if (gp == 0.0) break;
        const double nx = x - g / gp;
        if (!(nx >= lo && nx <= hi)) break;
        if (std::fabs(nx - x) < 1e-17) { x = nx; break; }
        x = nx;
    }
    return x;
}

double threshold(int k, double tol) {
    if (k < 3) throw std::domain_error("threshold: k must be at least 3");
    if (tol <= 0) throw std::domain_error("threshold: tol must be positive");
    double lo = 1.0, hi = 4.0 * double(k);
    while (largest_fixed_point(hi, k) <= 0.0) hi *= 2.0;
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        if (largest_fixed_point(mid, k) > 0.0) hi = mid; else lo = mid;
    }
    return 0.5 * (lo + hi);
}

// ---- TruncatedPoisson ----

double TruncatedPoisson::condition_prob() const {
    switch (kind) {
        case TruncKind::None: return 1.0;
        case TruncKind::AtMost: return poisson_cdf(rate, bound);
        case TruncKind::AtLeast: return poisson_tail(rate, bound);
    }
    return 1.0;
}

double TruncatedPoisson::pmf(std::int64_t ell) const {
    if (ell < 0) return 0.0;
    if (kind == TruncKind::AtMost && ell > bound) return 0.0;
    if (kind == TruncKind::AtLeast && ell < bound) return 0.0;
    double z = condition_prob();
    if (z <= 0.0) throw std::domain_error("TruncatedPoisson: condition has zero probability");
    return poisson_pmf(rate, ell) / z;
}

double TruncatedPoisson::mean() const {
    // E[X; condition] / Pr[condition] using x * pmf(x) = rate * pmf(x-1) at x >= 1.
    double z = condition_prob();
    if (z <= 0.0) throw std::domain_error("TruncatedPoisson: condition has zero probability");
    switch (kind) {
        case TruncKind::None: return rate;
        case TruncKind::AtMost: return rate * poisson_cdf(rate, bound - 1) / z;
        case TruncKind::AtLeast: return rate * poisson_tail(rate, bound - 1) / z;
    }
    return rate;
}

double TruncatedPoisson::variance() const {
    double z = condition_prob();
    if (z <= 0.0) throw std::domain_error("TruncatedPoisson: condition has zero probability");
    double m = mean();
    double fact2 = rate * rate;  // E[X(X-1)] = rate^2 * Pr[shifted condition]
    switch (kind) {
        case TruncKind::None: fact2 = rate * rate; break;
        case TruncKind::AtMost: fact2 = rate * rate * poisson_cdf(rate, bound - 2) / z; break;
        case TruncKind::AtLeast: fact2 = rate * rate * poisson_tail(rate, bound - 2) / z; break;
    }
    return fact2 + m - m * m;
}

std::int64_t TruncatedPoisson::support_min() const {
    return kind == TruncKind::AtLeast ? bound : 0;
}

std::int64_t TruncatedPoisson::support_max() const {
    if (kind == TruncKind::AtMost) return bound;
    std::int64_t u = std::int64_t(rate + 12.0 * std::sqrt(rate + 1.0) + 16.0);
    if (kind == TruncKind::AtLeast) u = std::max(u, bound);
    while (poisson_tail(rate, u + 1) >= 1e-16 * condition_prob()) u += 8;
    return u;
}

std::int64_t TruncatedPoisson::sample(Rng& rng) const {
    double z = condition_prob();
    if (z <= 0.0) throw std::domain_error("TruncatedPoisson: condition has zero probability");
    const std::int64_t lo = support_min();
    double u = rng.next_double() * z;
    double term = poisson_pmf(rate, lo);
    double cum = term;
    std::int64_t j = lo;
    const std::int64_t hi = support_max() + 64;
    while (u > cum && j < hi) {
        ++j;
        if (kind == TruncKind::AtMost && j > bound) { j = bound; break; }
        term *= rate / double(j);
        cum += term;
    }
    return j;
}

// ---- ModelParams ----

ModelParams derive_params(double d, int k, double tol) {
    if (k < 3) throw std::domain_error("derive_params: k must be at least 3");
    ModelParams mp;
    mp.d = d;
    mp.k = k;
    mp.p = largest_fixed_point(d, k, tol);
    if (mp.p <= 0.0)
        throw degenerate_params_error(
            "derive_params: d <= d_k, the core is empty and q is undefined");

    const double p = mp.p;
    const double dp = d * p;
    // q = d^{k-1} p^{k-2} e^{-dp} / (k-1)!  (log-space for large k)
    mp.q = std::exp(double(k - 1) * std::log(d) + double(k - 2) * std::log(p) - dp -
                    std::lgamma(double(k)));
    // q_bar in its closed rational form, so the derived matrices satisfy
    // their algebraic identities to rounding; the series evaluation of
    // Pr[Po(dp)=k-2 | Po(dp)<=k-2] agrees to ~1e-12 (tested).
    mp.q_bar = double(k - 1) * mp.q / ((1.0 - p) * d);
    mp.nu = {1.0 - p, p * mp.q, p * (1.0 - mp.q)};
    mp.mu = {(1.0 - p) * (1.0 - p), p * (1.0 - p), p * (1.0 - p), p * p};
    mp.lambda = {d * (1.0 - p), d * (1.0 - p), dp, dp};
    mp.gamma_plus = double(k - 1) * mp.q;
    mp.zeta = std::pow(1.0 - mp.gamma_plus, 1.5) * std::exp(-d / 2.0 - d * d / 4.0);
    return mp;
}

double contraction_fk(const ModelParams& params, double x) {
    const double d = params.d;
    const int k = params.k;
    const double p = params.p;
    const double y = d * (1.0 - p) * x;
    double sum = 0.0;
    for (int j = 0; j <= k - 2; ++j)
        sum += poisson_pmf(d * p, j) * varphi(k - j, y);
    return sum / (1.0 - p);
}

}  // namespace kcore
