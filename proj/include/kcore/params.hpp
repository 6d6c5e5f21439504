#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "kcore/rng.hpp"

namespace kcore {

// Thrown by derive_params (and everything downstream) when d <= d_k, where
// the core is empty and q, zeta and the limit matrices are undefined.
struct degenerate_params_error : std::domain_error {
    using std::domain_error::domain_error;
};

// ---- Poisson basics (log-space, safe for large rates/indices) ----

double poisson_log_pmf(double rate, std::int64_t j);
double poisson_pmf(double rate, std::int64_t j);
double poisson_cdf(double rate, std::int64_t j);   // Pr[Po(rate) <= j], j < 0 -> 0
double poisson_tail(double rate, std::int64_t j);  // Pr[Po(rate) >= j], j <= 0 -> 1

// Draw from Po(rate) by inverse-CDF walk (rates here are O(d)).
std::int64_t poisson_sample(double rate, Rng& rng);

// Pr[Po(y) >= ell-1]; the one-variable tail that phi is built from.
double varphi(std::int64_t ell, double y);

// phi_{d,k}(x) = Pr[Po(dx) >= k-1]. Monotone nondecreasing in x.
double phi(double d, int k, double x);

// Largest fixed point of phi_{d,k}, 0 when d is below the k-core threshold.
double largest_fixed_point(double d, int k, double tol = 1e-12);

// k-core threshold d_k = inf{d > 0 : p(d,k) > 0}, by bisection in d.
double threshold(int k, double tol = 1e-10);

// ---- Truncated Poisson: Po(rate) conditioned on a one-sided range ----

enum class TruncKind : std::uint8_t { None, AtMost, AtLeast };

struct TruncatedPoisson {
    double rate = 0.0;
    TruncKind kind = TruncKind::None;
    std::int64_t bound = 0;  // the t in Po_{<=t} / Po_{>=t}; ignored for None

    double condition_prob() const;           // Pr[condition]
    double pmf(std::int64_t ell) const;      // 0 outside the condition
    double mean() const;
    double variance() const;
    // Support upper end: least u with Pr[X > u] < 1e-16 (exact top for AtMost).
    std::int64_t support_min() const;
    std::int64_t support_max() const;
    // Inverse-CDF walk over the truncated support.
    std::int64_t sample(Rng& rng) const;
};

// ---- Model constants of the (d,k) supercritical regime ----

struct ModelParams {
    double d = 0.0;
    int k = 0;
    double p = 0.0;      // largest fixed point of phi_{d,k}
    double q = 0.0;      // Pr[Po(dp)=k-1 | Po(dp)>=k-1]
    double q_bar = 0.0;  // Pr[Po(dp)=k-2 | Po(dp)<=k-2]
    std::array<double, 3> nu{};      // (nu_0, nu_star, nu_1)
    std::array<double, 4> mu{};      // (mu_00, mu_01, mu_10, mu_11)
    std::array<double, 4> lambda{};  // (lambda_00, lambda_01, lambda_10, lambda_11)
    double zeta = 0.0;       // (1-(k-1)q)^{3/2} exp(-d/2-d^2/4)
    double gamma_plus = 0.0; // (k-1)q, the mean degree of the near-critical layer

    double one_minus_gamma() const { return 1.0 - gamma_plus; }

    TruncatedPoisson deg_00() const { return {lambda[0], TruncKind::None, 0}; }
    TruncatedPoisson deg_01() const { return {lambda[1], TruncKind::None, 0}; }
    TruncatedPoisson deg_10() const { return {lambda[2], TruncKind::AtMost, std::int64_t(k) - 2}; }
    TruncatedPoisson deg_11() const { return {lambda[3], TruncKind::AtLeast, std::int64_t(k)}; }
};

// Fill every constant from (d,k). Throws degenerate_params_error when p = 0.
ModelParams derive_params(double d, int k, double tol = 1e-12);

// f_k(x) = sum_{j<=k-2} Po(dp){j}/(1-p) * varphi_{k-j}(d(1-p)x); the
// branching-process contraction, f_k(x) < x on (0,1] for d > d_k.
double contraction_fk(const ModelParams& params, double x);

}  // namespace kcore
