#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "kcore/linalg.hpp"
#include "kcore/params.hpp"
#include "kcore/sum_sampler.hpp"

namespace kcore {

// Count vectors: vn = (n_0, n_star, n_1), vm = (m_00, m_01, m_10, m_11).
using NVec = std::array<std::int64_t, 3>;
using MVec = std::array<std::int64_t, 4>;

// The (n_star, n_1, m_10, m_11) observable and its centred deviation vector
// (n_star/n - pq, n_1/n - p(1-q), m_10/(2m) - p(1-p), m_11/(2m) - p^2).
struct CoreObservable {
    std::int64_t n_star = 0, n_1 = 0, m_10 = 0, m_11 = 0;
};
std::vector<double> delta_nm(const CoreObservable& o, std::int64_t n, std::int64_t m,
                             const ModelParams& params);

// 4x4 matrix of the joint limit law (covariance of sqrt(n) * delta_nm),
// entries transcribed as polynomials in (d,k,p,q), prefactor included.
Mat q4_matrix(const ModelParams& params);

// 2x2 matrix of the core order/size limit law (precision of the normalised
// pair); equals the inverse of the (n_1, m_11) block of q4_matrix.
Mat q2_matrix(const ModelParams& params);

// The corresponding transcribed 2x2 polynomial display. It reproduces
// d * (submatrix of q4) and is kept for regression against the source
// polynomials; q2_matrix is the matrix the limit law actually uses.
Mat q2_matrix_transcribed(const ModelParams& params);

Mat sigma_matrix(const ModelParams& params);  // 4x4 diagonal
Mat l_matrix(const ModelParams& params);      // 4x3
Mat t_matrix();                               // 7x4 integer matrix
Mat block_matrix(const ModelParams& params);  // the 7x7 two-block form

// max |Q^{-1} - T* B T| over entries: the numerical stand-in for the
// computer-algebra verification of the block identity.
double block_identity_check(const ModelParams& params);

// max |inverse(q2) - (n_1,m_11) submatrix of q4|: the projection identity
// between the joint and marginal laws.
double marginal_consistency_check(const ModelParams& params);

// det(Q) = 2 d^2 p q (1-q) det(Sigma) / zeta^2, relative error.
double det_identity_check(const ModelParams& params);

Mat clt_covariance(const ModelParams& params);  // q2^{-1}

// Point probabilities of the limit laws. The evaluator forms cache the
// matrix work; the free functions build a fresh evaluator per call.
class JointLaw {
public:
    JointLaw(std::int64_t n, std::int64_t m, const ModelParams& params);
    double at(const CoreObservable& o) const;

private:
    std::int64_t n_, m_;
    ModelParams params_;
    Mat precision_;
    double prefactor_;
};

class CoreLaw {
public:
    CoreLaw(std::int64_t n, std::int64_t m, const ModelParams& params);
    double at(std::int64_t x, std::int64_t y) const;

private:
    std::int64_t n_, m_;
    ModelParams params_;
    Mat precision_;
    double prefactor_;
};

double llt_joint_probability(const CoreObservable& o, std::int64_t n, std::int64_t m,
                             const ModelParams& params);
double llt_core_probability(std::int64_t x, std::int64_t y, std::int64_t n, std::int64_t m,
                            const ModelParams& params);

// Lattice sums of the two laws over +-window_mult*sqrt(n) windows around
// the centred point (m_11 stepping by 2). Near-exact adaptive summation.
double lattice_sum_core(std::int64_t n, std::int64_t m, const ModelParams& params,
                        double window_mult = 8.0);
double lattice_sum_joint(std::int64_t n, std::int64_t m, const ModelParams& params,
                         double window_mult = 8.0);

// Generic pruned lattice sum of prefactor * exp(-1/2 <P(x-mu),(x-mu)>) over
// an axis-aligned box with per-coordinate step sizes. `adaptive` collapses
// whole suffix blocks to closed form when their mass sits inside the box.
double gaussian_lattice_sum(const Mat& precision, const std::vector<double>& mean,
                            const std::vector<double>& step,
                            const std::vector<std::int64_t>& lo,
                            const std::vector<std::int64_t>& hi, double prefactor,
                            bool adaptive = true);

double entropy(const std::vector<double>& rho);
double kl(const std::vector<double>& rho, const std::vector<double>& rho_prime);

// Exact law of the degree totals given the type counts: the four families
// are independent; 00 and 01 totals are Poisson, the truncated families are
// iid sums evaluated by convolution.
class UExact {
public:
    UExact(const NVec& vn, const ModelParams& params);
    double log_at(const MVec& vm) const;
    double at(const MVec& vm) const;
    const IidSumModel& family_10() const { return fam_10_; }
    const IidSumModel& family_11() const { return fam_11_; }

private:
    NVec vn_;
    ModelParams params_;
    double rate_00_, rate_01_;
    std::int64_t base_10_;
    IidSumModel fam_10_, fam_11_;
};

double u_exact(const NVec& vn, const MVec& vm, const ModelParams& params);

// Gaussian local approximation of the same law.
double u_gaussian(const NVec& vn, const MVec& vm, std::int64_t n, std::int64_t m,
                  const ModelParams& params);

enum class GammaMode { ExactU, GaussianU, ClosedForm, KlForm };

// Natural log of the asymptotic number of graphs with the given core
// parameters, under the selected formula.
double log_gamma_count(const CoreObservable& o, std::int64_t n, std::int64_t m,
                       const ModelParams& params, GammaMode mode);

double log_binomial(std::int64_t n, std::int64_t k);
double log_double_factorial_odd(std::int64_t m);  // ln((m-1)!!) for even m >= 0

}  // namespace kcore
