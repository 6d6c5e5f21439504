#include <cmath>

#include "doctest.h"
#include "kcore/params.hpp"
#include "kcore/rng.hpp"

using namespace kcore;

namespace {

// Independent series oracle: Pr[Po(rate) >= j] with a plain 30+ term
// factorial series (no shared code with poisson_tail's shortcuts).
double tail_series(double rate, int j, int terms = 60) {
    double below = 0.0, fact = 1.0;
    for (int i = 0; i < j; ++i) {
        if (i > 0) fact *= i;
        below += std::pow(rate, i) / fact * std::exp(-rate);
    }
    (void)terms;
    return 1.0 - below;
}

}  // namespace

TEST_CASE("phi basics and series oracle") {
    CHECK(phi(5, 3, 0.0) == doctest::Approx(0.0));
    CHECK(phi(5, 3, 1.0) == doctest::Approx(1.0 - 6.0 * std::exp(-5.0)).epsilon(1e-14));
    // k=4, d=4, x=0.5: rate 2, Pr[Po(2) >= 3]
    const double oracle = tail_series(2.0, 3);
    CHECK(phi(4, 4, 0.5) == doctest::Approx(oracle).epsilon(1e-13));
    CHECK_THROWS_AS(phi(5, 3, -0.1), std::domain_error);
    CHECK_THROWS_AS(phi(5, 3, 1.1), std::domain_error);
    CHECK_THROWS_AS(phi(-1, 3, 0.5), std::domain_error);
    CHECK_THROWS_AS(phi(5, 2, 0.5), std::domain_error);
}

TEST_CASE("phi is monotone in x") {
    Rng rng(7);
    for (int rep = 0; rep < 200; ++rep) {
        const double d = 0.5 + 9.5 * rng.next_double();
        const int k = 3 + int(rng.next_below(4));
        double x = rng.next_double(), y = rng.next_double();
        if (x > y) std::swap(x, y);
        CHECK(phi(d, k, x) <= phi(d, k, y) + 1e-15);
    }
}

TEST_CASE("largest fixed point") {
    CHECK(largest_fixed_point(1.0, 3) == 0.0);
    CHECK(largest_fixed_point(50.0, 3) > 0.999);

    const double p = largest_fixed_point(5.0, 3);
    CHECK(p > 0.8);
    CHECK(p < 1.0);
    CHECK(std::fabs(phi(5, 3, p) - p) <= 1e-12);

    // Oracle: scan for the sign change of phi(x)-x from above, refine by
    // bisection, independent of the iterate-then-polish production path.
    double hi = 1.0, lo = 0.0;
    for (double x = 1.0; x >= 0.0; x -= 1e-4) {
        if (phi(5, 3, x) - x >= 0.0) { lo = x; hi = x + 1e-4; break; }
    }
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (phi(5, 3, mid) - mid >= 0.0 ? lo : hi) = mid;
    }
    CHECK(p == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-10));
}

TEST_CASE("largest fixed point is nondecreasing in d") {
    for (int k = 3; k <= 5; ++k) {
        double prev = 0.0;
        for (double d = 1.0; d <= 10.0; d += 0.25) {
            const double p = largest_fixed_point(d, k);
            CHECK(p >= prev - 1e-12);
            prev = p;
        }
    }
}

TEST_CASE("threshold") {
    const double d3 = threshold(3, 1e-10);
    CHECK(d3 == doctest::Approx(3.35).epsilon(0.01));
    CHECK(threshold(4, 1e-8) > d3);
    // Definition of the infimum up to tolerance.
    CHECK(largest_fixed_point(d3 + 1e-3, 3) > 0.0);
    CHECK(largest_fixed_point(d3 - 1e-3, 3) == 0.0);
}

TEST_CASE("derive_params identities") {
    CHECK_THROWS_AS(derive_params(1.0, 3), degenerate_params_error);

    const ModelParams mp = derive_params(5.0, 3);
    CHECK(mp.nu[0] + mp.nu[1] + mp.nu[2] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(mp.mu[0] + mp.mu[1] + mp.mu[2] + mp.mu[3] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(mp.mu[1] == mp.mu[2]);
    CHECK(mp.lambda[0] == mp.lambda[1]);
    CHECK(mp.lambda[2] == mp.lambda[3]);
    CHECK(mp.lambda[0] == doctest::Approx(5.0 * (1.0 - mp.p)).epsilon(1e-14));
    CHECK(mp.lambda[2] == doctest::Approx(5.0 * mp.p).epsilon(1e-14));

    // q = Pr[Po(dp) = k-1] / Pr[Po(dp) >= k-1], both sides by direct series.
    const double dp = 5.0 * mp.p;
    const double lhs = std::pow(dp, 2) * std::exp(-dp) / 2.0;
    const double rhs = tail_series(dp, 2);
    CHECK(mp.q == doctest::Approx(lhs / rhs).epsilon(1e-12));

    // q_bar: closed rational form vs the conditional-probability series.
    const double pmf_k2 = dp * std::exp(-dp);
    const double cdf_k2 = std::exp(-dp) * (1.0 + dp);
    CHECK(mp.q_bar == doctest::Approx(pmf_k2 / cdf_k2).epsilon(1e-10));

    // Just above the threshold subcriticality holds; the dp lower bound
    // needs a little more room (it fails in a hair-thin band over d_k).
    const double d3 = threshold(3);
    const ModelParams near = derive_params(d3 + 0.01, 3);
    CHECK(near.gamma_plus < 1.0);
    const ModelParams clear = derive_params(d3 + 0.1, 3);
    CHECK(clear.p >= (3.0 - 2.0 + std::sqrt(1.0)) / clear.d);
}

TEST_CASE("model invariants across a (d,k) grid") {
    for (int k = 3; k <= 6; ++k) {
        const double dk = threshold(k, 1e-8);
        for (double d = dk + 0.2; d <= 10.0; d += 0.4) {
            const ModelParams mp = derive_params(d, k);
            CHECK(std::fabs(phi(d, k, mp.p) - mp.p) <= 1e-12);
            CHECK(std::fabs(mp.nu[0] + mp.nu[1] + mp.nu[2] - 1.0) <= 1e-10);
            CHECK(std::fabs(mp.mu[0] + mp.mu[1] + mp.mu[2] + mp.mu[3] - 1.0) <= 1e-10);
            CHECK(std::fabs(mp.q_bar - (k - 1) * mp.q / ((1.0 - mp.p) * d)) <= 1e-10);
            CHECK(mp.p >= (double(k) - 2.0 + std::sqrt(double(k) - 2.0)) / d);
            CHECK(mp.gamma_plus < 1.0);
            CHECK(mp.zeta > 0.0);
            CHECK(mp.zeta <= 1.0);
        }
    }
}

TEST_CASE("truncated poisson pmf") {
    const ModelParams mp = derive_params(5.0, 3);
    const TruncatedPoisson at_most = mp.deg_10();
    CHECK(at_most.pmf(mp.k - 1) == 0.0);  // outside support

    const TruncatedPoisson plain{2.0, TruncKind::None, 0};
    CHECK(plain.pmf(0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));

    // Mean of Po_{>=k}(dp) equals dp/(1-q).
    const TruncatedPoisson at_least = mp.deg_11();
    CHECK(at_least.mean() == doctest::Approx(5.0 * mp.p / (1.0 - mp.q)).epsilon(1e-12));

    for (const TruncatedPoisson& tp : {plain, at_most, at_least}) {
        double sum = 0.0;
        for (std::int64_t j = tp.support_min(); j <= tp.support_max(); ++j) sum += tp.pmf(j);
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }

    const TruncatedPoisson impossible{0.0, TruncKind::AtLeast, 3};
    CHECK_THROWS_AS(impossible.pmf(3), std::domain_error);
}

TEST_CASE("truncated poisson sampling matches its mean") {
    const ModelParams mp = derive_params(5.0, 3);
    Rng rng(11);
    for (const TruncatedPoisson& tp : {mp.deg_10(), mp.deg_11(), mp.deg_00()}) {
        const std::int64_t reps = 1000000;
        double sum = 0.0;
        for (std::int64_t i = 0; i < reps; ++i) sum += double(tp.sample(rng));
        const double mean = sum / double(reps);
        const double se = std::sqrt(tp.variance() / double(reps));
        CHECK(std::fabs(mean - tp.mean()) <= 5.0 * se);
    }
}

TEST_CASE("contraction f_k") {
    const ModelParams mp = derive_params(5.0, 3);
    CHECK(contraction_fk(mp, 0.0) == doctest::Approx(0.0));
    const double f1 = contraction_fk(mp, 1.0);
    CHECK(f1 <= 1.0 - std::exp(-mp.d * (1.0 - mp.p)) + 1e-12);
    CHECK(f1 < 1.0);
    for (int i = 1; i <= 10; ++i) {
        const double x = double(i) / 10.0;
        CHECK(contraction_fk(mp, x) < x);
    }
}
