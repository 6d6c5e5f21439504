#include "kcore/llt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kcore {

std::vector<double> delta_nm(const CoreObservable& o, std::int64_t n, std::int64_t m,
                             const ModelParams& mp) {
    const double nn = double(n), mm2 = 2.0 * double(m);
    return {double(o.n_star) / nn - mp.p * mp.q,
            double(o.n_1) / nn - mp.p * (1.0 - mp.q),
            double(o.m_10) / mm2 - mp.p * (1.0 - mp.p),
            double(o.m_11) / mm2 - mp.p * mp.p};
}

// Entries of the joint limit matrix as polynomials in (d,k,p,q), templated
// over the float type: the identity checks re-evaluate them in quad
// precision (their inverses reach ~1e8, so absolute 1e-8 residuals need it).
template <typename F>
std::array<F, 16> q4_entries(F d, F k, F p, F q) {
    const F p2 = p * p, p3 = p2 * p, p4 = p3 * p;
    const F q2 = q * q, q3 = q2 * q, q4 = q3 * q;
    const F k2 = k * k, d2 = d * d, d3 = d2 * d;

    const F Q11 =
        -(F(1) / d) *
        ((d * k2 - 2 * d * k + d) * p2 * q4 +
         (2 * (d2 * k - d2) * p3 - (2 * d * k2 - d2 + (d2 - 2 * d) * k) * p2 +
          (d * k2 - 2 * d * k + d) * p) * q3 -
         d * p * q +
         ((d3 + 2 * d2) * p4 - (d3 + 2 * (d2 + 2 * d) * k - 4 * d) * p3 +
          ((d + 2) * k2 - d2 + 2 * (d2 - 2) * k + 2) * p2 -
          (d * k2 - 2 * d * k + d) * p) * q2);

    const F Q12 =
        (k2 - 2 * k + 1) * p2 * q4 +
        (2 * (d * k - d) * p3 - ((d - 2) * k + 2 * k2 - d) * p2 + (k2 - 2 * k + 1) * p) * q3 +
        ((d2 + 2 * d) * p4 - (d2 + 2 * (d + 1) * k - 2) * p3 +
         ((2 * d + 1) * k + k2 - d - 1) * p2 - (k2 - k) * p) * q2 +
        (d * p3 - (d + k) * p2 + (k - 1) * p) * q;

    const F Q13 =
        -(F(1) / d) *
        ((2 * (d * k - d) * p4 + 2 * ((d + 2) * k - k2 - d - 1) * p3 - 3 * (d * k - d) * p2 +
          ((d - 2) * k + k2 - d + 1) * p) * q2 +
         (2 * (d2 + d) * p4 - (3 * d2 + 2 * (d + 1) * k + 2 * d - 2) * p3 +
          (d2 + (3 * d + 2) * k - 2) * p2 - ((d + 1) * k - 1) * p) * q);

    const F Q14 =
        (F(2) / d) * (((d * k - d) * p4 + ((d + 2) * k - k2 - d - 1) * p3) * q2 +
                      ((d2 + d) * p4 - (d2 + (d + 1) * k - 1) * p3 + (d * k - d) * p2) * q);

    const F Q22 =
        -(k2 - 2 * k + 1) * p2 * q4 -
        (2 * (d * k - d) * p3 - ((d - 2) * k + 2 * k2 - d) * p2 + (k2 - 2 * k + 1) * p) * q3 -
        ((d2 + 2 * d) * p4 - (d2 + 2 * d * k) * p3 + (2 * (d + 1) * k + k2 - d - 2) * p2 -
         (k2 - 1) * p) * q2 -
        p2 - (2 * d * p3 - 2 * (d + k) * p2 + (2 * k - 1) * p) * q + p;

    const F Q23 =
        2 * p3 +
        (2 * (k - 1) * p4 + 2 * (k - 1) * p3 - 3 * (k - 1) * p2 + (k - 1) * p) * q2 - 3 * p2 +
        (2 * (d + 1) * p4 - (3 * d + 2 * k + 2) * p3 + (d + 3 * k) * p2 - k * p) * q + p;

    const F Q24 = -2 * p3 - 2 * ((k - 1) * p4 + (k - 1) * p3) * q2 + 2 * p2 -
                  2 * ((d + 1) * p4 - (d + k) * p3 + (k - 1) * p2) * q;

    const F Q33 =
        -(F(1) / d) *
        (2 * (2 * d + 1) * p4 - 4 * (2 * d + 1) * p3 + (5 * d + 3) * p2 +
         (2 * (k2 - 2 * k + 1) * p4 - 2 * (k2 - 2 * k + 1) * p2 + (k2 - 2 * k + 1) * p) * q2 -
         (d + 1) * p + (4 * (k - 1) * p4 - 4 * (k - 1) * p3 + (k - 1) * p2) * q);

    const F Q34 =
        (F(2) / d) * ((k2 - 2 * k + 1) * p4 * q2 + (2 * d + 1) * p4 - (3 * d + 1) * p3 +
                      d * p2 + (2 * (k - 1) * p4 - (k - 1) * p3) * q);

    const F Q44 = -(F(2) / d) * (2 * (k - 1) * p4 * q + (2 * d + 1) * p4 - 2 * d * p3 +
                                 ((k2 - 2 * k + 1) * p4 + (k2 - 2 * k + 1) * p2) * q2 - p2);

    const F s = F(1) - (k - 1) * q;
    const F w = F(1) / (s * s);
    return {Q11 * w, Q12 * w, Q13 * w, Q14 * w, Q12 * w, Q22 * w, Q23 * w, Q24 * w,
            Q13 * w, Q23 * w, Q33 * w, Q34 * w, Q14 * w, Q24 * w, Q34 * w, Q44 * w};
}

template <typename F>
std::array<F, 4> q2_transcribed_entries(F d, F k, F p, F q) {
    const F p2 = p * p, p3 = p2 * p, p4 = p3 * p;
    const F q2 = q * q, q3 = q2 * q, q4 = q3 * q;
    const F k2 = k * k, d2 = d * d, d3 = d2 * d;

    const F A11 =
        -(d * k2 - 2 * d * k + d) * p2 * q4 -
        (2 * (d2 * k - d2) * p3 - (2 * d * k2 - d2 + (d2 - 2 * d) * k) * p2 +
         (d * k2 - 2 * d * k + d) * p) * q3 -
        d * p2 -
        ((d3 + 2 * d2) * p4 - (d3 + 2 * d2 * k) * p3 +
         (d * k2 - d2 + 2 * (d2 + d) * k - 2 * d) * p2 - (d * k2 - d) * p) * q2 +
        d * p - (2 * d2 * p3 - 2 * (d2 + d * k) * p2 + (2 * d * k - d) * p) * q;

    const F A12 = -2 * d * p3 + 2 * d * p2 -
                  2 * ((d * k - d) * p4 + (d * k - d) * p3) * q2 -
                  2 * ((d2 + d) * p4 - (d2 + d * k) * p3 + (d * k - d) * p2) * q;

    const F A22 = -4 * (k - 1) * p4 * q - 2 * (2 * d + 1) * p4 + 4 * d * p3 -
                  2 * ((k2 - 2 * k + 1) * p4 + (k2 - 2 * k + 1) * p2) * q2 + 2 * p2;

    const F s = F(1) - (k - 1) * q;
    const F w = F(1) / (s * s);
    return {A11 * w, A12 * w, A12 * w, A22 * w};
}

// Sigma diagonal and L entries, same templating.
template <typename F>
std::array<F, 4> sigma_entries(F d, F k, F p, F q, F qb) {
    return {(1 - p) * (1 - p) / d, p * (1 - p) / d,
            p * (1 - p) * (F(1) + qb * (d * p * (F(1) - qb) - (k - 1))) / d,
            p * p * (F(1) - d * p / (F(1) - q) + d * (p + (1 - p) * qb)) / d};
}

template <typename F>
std::array<F, 12> l_entries(F d, F k, F p, F q, F qb) {
    return {1 - p, 0, 0,
            0, 1 - p, 1 - p,
            p * (1 - qb), (k - 1) / d, 0,
            0, 0, p / (1 - q)};
}

Mat q4_matrix(const ModelParams& mp) {
    auto e = q4_entries<long double>(mp.d, (long double)(mp.k), mp.p, mp.q);
    Mat q(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) q(i, j) = e[std::size_t(4 * i + j)];
    return q;
}

Mat q2_matrix_transcribed(const ModelParams& mp) {
    auto e = q2_transcribed_entries<long double>(mp.d, (long double)(mp.k), mp.p, mp.q);
    return Mat(2, 2, {e[0], e[1], e[2], e[3]});
}

// The transcribed 2x2 display equals d times the (n_1, m_11) block of the
// joint covariance, not that block's inverse; the limit law needs the
// precision matrix, so q2_matrix inverts the projected covariance.
Mat q2_matrix(const ModelParams& mp) {
    Mat sub = q4_matrix(mp).submatrix({1, 3}, {1, 3});
    return sub.inverse();
}

Mat sigma_matrix(const ModelParams& mp) {
    auto e = sigma_entries<long double>(mp.d, (long double)(mp.k), mp.p, mp.q, mp.q_bar);
    Mat s(4, 4);
    for (int i = 0; i < 4; ++i) s(i, i) = e[std::size_t(i)];
    return s;
}

Mat l_matrix(const ModelParams& mp) {
    auto e = l_entries<long double>(mp.d, (long double)(mp.k), mp.p, mp.q, mp.q_bar);
    Mat l(4, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) l(i, j) = e[std::size_t(3 * i + j)];
    return l;
}

Mat t_matrix() {
    return Mat(7, 4,
               {-1, -1, 0, 0,
                 1,  0, 0, 0,
                 0,  1, 0, 0,
                 0,  0, -2, -1,
                 0,  0, 1, 0,
                 0,  0, 1, 0,
                 0,  0, 0, 1});
}

Mat block_matrix(const ModelParams& mp) {
    Mat sigma_inv = sigma_matrix(mp).inverse();
    Mat l = l_matrix(mp);
    Mat lt_si = l.transpose() * sigma_inv;      // 3x4
    Mat upper_left = lt_si * l;                  // 3x3
    for (int i = 0; i < 3; ++i) upper_left(i, i) += 1.0L / (long double)(mp.nu[std::size_t(i)]);
    Mat lower_right = sigma_inv;                 // 4x4
    for (int i = 0; i < 4; ++i)
        lower_right(i, i) -= (long double)(mp.d) / 2.0L / (long double)(mp.mu[std::size_t(i)]);
    Mat b(7, 7);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b(i, j) = upper_left(i, j);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            b(i, 3 + j) = -lt_si(i, j);
            b(3 + j, i) = -lt_si(i, j);
        }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) b(3 + i, 3 + j) = lower_right(i, j);
    return b;
}

namespace {

// Quad-precision kernel for the identity checks. The identities are
// algebraic in free (d,k,p,q) with q_bar = (k-1)q/((1-p)d), so input
// rounding is irrelevant -- only arithmetic precision limits the residual,
// and Q^{-1} carries ~1e8 entries at the far end of the grid.
using f128 = __float128;

f128 qabs(f128 x) { return x < 0 ? -x : x; }

// In-place Gauss-Jordan inverse of an n x n matrix.
void qinvert(std::vector<f128>& a, int n) {
    std::vector<f128> inv(std::size_t(n) * std::size_t(n), f128(0));
    for (int i = 0; i < n; ++i) inv[std::size_t(n * i + i)] = 1;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        f128 best = qabs(a[std::size_t(n * col + col)]);
        for (int r = col + 1; r < n; ++r)
            if (qabs(a[std::size_t(n * r + col)]) > best) {
                best = qabs(a[std::size_t(n * r + col)]);
                piv = r;
            }
        if (best == 0) throw std::runtime_error("identity check: singular matrix");
        if (piv != col)
            for (int j = 0; j < n; ++j) {
                std::swap(a[std::size_t(n * piv + j)], a[std::size_t(n * col + j)]);
                std::swap(inv[std::size_t(n * piv + j)], inv[std::size_t(n * col + j)]);
            }
        const f128 dv = a[std::size_t(n * col + col)];
        for (int j = 0; j < n; ++j) {
            a[std::size_t(n * col + j)] /= dv;
            inv[std::size_t(n * col + j)] /= dv;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const f128 f = a[std::size_t(n * r + col)];
            if (f == 0) continue;
            for (int j = 0; j < n; ++j) {
                a[std::size_t(n * r + j)] -= f * a[std::size_t(n * col + j)];
                inv[std::size_t(n * r + j)] -= f * inv[std::size_t(n * col + j)];
            }
        }
    }
    a = std::move(inv);
}

}  // namespace

double block_identity_check(const ModelParams& mp) {
    const f128 d = mp.d, k = mp.k, p = mp.p, q = mp.q;
    const f128 qb = (k - 1) * q / ((1 - p) * d);

    auto q4 = q4_entries<f128>(d, k, p, q);
    std::vector<f128> lhs(q4.begin(), q4.end());
    qinvert(lhs, 4);

    auto sg = sigma_entries<f128>(d, k, p, q, qb);
    auto lv = l_entries<f128>(d, k, p, q, qb);
    const f128 nu[3] = {1 - p, p * q, p * (1 - q)};
    const f128 mu[4] = {(1 - p) * (1 - p), p * (1 - p), p * (1 - p), p * p};

    // B = [[L* S^-1 L + diag(nu)^-1, -L* S^-1], [-S^-1 L, S^-1 - d/2 diag(mu)^-1]]
    f128 b[7][7] = {};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            f128 s = 0;
            for (int r = 0; r < 4; ++r) s += lv[std::size_t(3 * r + i)] * lv[std::size_t(3 * r + j)] / sg[std::size_t(r)];
            b[i][j] = s + (i == j ? 1 / nu[i] : f128(0));
        }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            const f128 v = -lv[std::size_t(3 * j + i)] / sg[std::size_t(j)];
            b[i][3 + j] = v;
            b[3 + j][i] = v;
        }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            b[3 + i][3 + j] = (i == j ? 1 / sg[std::size_t(i)] - d / 2 / mu[i] : f128(0));

    // T* B T with the fixed integer matrix.
    const int t[7][4] = {{-1, -1, 0, 0}, {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, -2, -1},
                         {0, 0, 1, 0},  {0, 0, 1, 0}, {0, 0, 0, 1}};
    f128 rhs[4][4] = {};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            f128 s = 0;
            for (int a = 0; a < 7; ++a) {
                if (t[a][i] == 0) continue;
                for (int c = 0; c < 7; ++c)
                    if (t[c][j] != 0) s += f128(t[a][i]) * b[a][c] * f128(t[c][j]);
            }
            rhs[i][j] = s;
        }
    f128 worst = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            worst = std::max<f128>(worst, qabs(lhs[std::size_t(4 * i + j)] - rhs[i][j]));
    return double(worst);
}

double marginal_consistency_check(const ModelParams& mp) {
    // Two independent transcriptions of the same block: the 2x2 display
    // equals d times the (n_1, m_11) block of the 4x4 matrix.
    const f128 d = mp.d, k = mp.k, p = mp.p, q = mp.q;
    auto q4 = q4_entries<f128>(d, k, p, q);
    auto a2 = q2_transcribed_entries<f128>(d, k, p, q);
    const f128 sub[4] = {q4[5] * d, q4[7] * d, q4[13] * d, q4[15] * d};
    f128 worst = 0;
    for (int i = 0; i < 4; ++i) worst = std::max<f128>(worst, qabs(a2[std::size_t(i)] - sub[i]));
    return double(worst);
}

double det_identity_check(const ModelParams& mp) {
    const double lhs = q4_matrix(mp).det();
    const double s = 1.0 - mp.gamma_plus;
    const double rhs = 2.0 * mp.d * mp.d * mp.p * mp.q * (1.0 - mp.q) *
                       sigma_matrix(mp).det() / (s * s * s);
    return std::fabs(lhs - rhs) / std::fabs(rhs);
}

Mat clt_covariance(const ModelParams& mp) { return q2_matrix(mp).inverse(); }

JointLaw::JointLaw(std::int64_t n, std::int64_t m, const ModelParams& params)
    : n_(n), m_(m), params_(params) {
    Mat q = q4_matrix(params);
    precision_ = q.inverse();
    prefactor_ = 1.0 / (2.0 * std::pow(M_PI * params.d * double(n), 2.0) * std::sqrt(q.det()));
}

double JointLaw::at(const CoreObservable& o) const {
    if (o.m_11 % 2 != 0) return 0.0;
    auto delta = delta_nm(o, n_, m_, params_);
    const double expo = -0.5 * double(n_) * quad_form(precision_, delta);
    return expo < -1400.0 ? 0.0 : prefactor_ * std::exp(expo);
}

CoreLaw::CoreLaw(std::int64_t n, std::int64_t m, const ModelParams& params)
    : n_(n), m_(m), params_(params), precision_(q2_matrix(params)) {
    prefactor_ = std::sqrt(precision_.det()) / (M_PI * params.d * double(n));
}

double CoreLaw::at(std::int64_t x, std::int64_t y) const {
    std::vector<double> z = {double(x) / double(n_) - params_.p * (1.0 - params_.q),
                             double(y) / double(m_) - params_.p * params_.p};
    const double expo = -0.5 * double(n_) * quad_form(precision_, z);
    return expo < -1400.0 ? 0.0 : prefactor_ * std::exp(expo);
}

double llt_joint_probability(const CoreObservable& o, std::int64_t n, std::int64_t m,
                             const ModelParams& mp) {
    return JointLaw(n, m, mp).at(o);
}

double llt_core_probability(std::int64_t x, std::int64_t y, std::int64_t n, std::int64_t m,
                            const ModelParams& mp) {
    return CoreLaw(n, m, mp).at(x, y);
}

// ---- adaptive Gaussian lattice summation ----

namespace {

struct LatticeSummer {
    const Mat& prec;
    const std::vector<double>& mean;
    const std::vector<std::int64_t>& lo;
    const std::vector<std::int64_t>& hi;
    bool adaptive;
    std::size_t dim;
    // Per suffix level i: inverse of P[i:,i:] and its total lattice mass.
    std::vector<Mat> suffix_cov;
    std::vector<double> suffix_mass;
    std::vector<double> x;  // current point

    LatticeSummer(const Mat& p, const std::vector<double>& mu,
                  const std::vector<std::int64_t>& l, const std::vector<std::int64_t>& h,
                  bool ad)
        : prec(p), mean(mu), lo(l), hi(h), adaptive(ad), dim(mu.size()), x(mu) {
        suffix_cov.resize(dim);
        suffix_mass.resize(dim);
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < dim; ++i) idx.push_back(i);
        for (std::size_t i = 0; i < dim; ++i) {
            std::vector<std::size_t> tail(idx.begin() + std::ptrdiff_t(i), idx.end());
            Mat pss = prec.submatrix(tail, tail);
            suffix_cov[i] = pss.inverse();
            const double r = double(dim - i);
            suffix_mass[i] = std::pow(2.0 * M_PI, r / 2.0) / std::sqrt(pss.det());
        }
    }

    double quad_at() const {
        std::vector<double> c(dim);
        for (std::size_t j = 0; j < dim; ++j) c[j] = x[j] - mean[j];
        return quad_form(prec, c);
    }

    // Conditional mean of coordinates [i, dim) given x[0..i).
    void conditional_mean(std::size_t i, std::vector<double>& out) const {
        out.assign(dim - i, 0.0);
        for (std::size_t a = 0; a < dim - i; ++a) out[a] = mean[i + a];
        if (i == 0) return;
        // m_s = mu_s - C_i * P[s,prefix] (x_prefix - mu_prefix)
        std::vector<double> v(dim - i, 0.0);
        for (std::size_t a = 0; a < dim - i; ++a)
            for (std::size_t b = 0; b < i; ++b)
                v[a] += prec(i + a, b) * (x[b] - mean[b]);
        for (std::size_t a = 0; a < dim - i; ++a) {
            double corr = 0.0;
            for (std::size_t b = 0; b < dim - i; ++b) corr += suffix_cov[i](a, b) * v[b];
            out[a] -= corr;
        }
    }

    double run(std::size_t i) {
        std::vector<double> cm;
        conditional_mean(i, cm);
        const Mat& cov = suffix_cov[i];
        {
            // Branch bound: the quadratic at the conditional mode times the
            // unconstrained suffix mass majorizes the branch contribution.
            std::vector<double> save(x.begin() + std::ptrdiff_t(i), x.end());
            for (std::size_t a = 0; a < dim - i; ++a) x[i + a] = cm[a];
            const double qmode = quad_at();
            for (std::size_t a = 0; a < dim - i; ++a) x[i + a] = save[a];
            if (qmode > 400.0) return 0.0;
        }
        if (adaptive) {
            bool inside = true;
            for (std::size_t a = 0; a < dim - i; ++a) {
                const double sd = std::sqrt(double(cov(a, a)));
                if (cm[a] - 6.5 * sd < double(lo[i + a]) - 0.5 ||
                    cm[a] + 6.5 * sd > double(hi[i + a]) + 0.5) {
                    inside = false;
                    break;
                }
            }
            if (inside) {
                // Whole conditional block lies inside the window: closed form.
                std::vector<double> save(x.begin() + std::ptrdiff_t(i), x.end());
                for (std::size_t a = 0; a < dim - i; ++a) x[i + a] = cm[a];
                const double q = quad_at();
                for (std::size_t a = 0; a < dim - i; ++a) x[i + a] = save[a];
                return std::exp(-0.5 * q) * suffix_mass[i];
            }
        }
        const double sd = std::sqrt(cov(0, 0));
        const auto from = std::max(lo[i], std::int64_t(std::ceil(cm[0] - 8.5 * sd)));
        const auto to = std::min(hi[i], std::int64_t(std::floor(cm[0] + 8.5 * sd)));
        double total = 0.0;
        for (std::int64_t v = from; v <= to; ++v) {
            x[i] = double(v);
            if (i + 1 == dim) {
                const double q = quad_at();
                if (q < 1400.0) total += std::exp(-0.5 * q);
            } else {
                total += run(i + 1);
            }
        }
        x[i] = mean[i];
        return total;
    }
};

}  // namespace

double gaussian_lattice_sum(const Mat& precision, const std::vector<double>& mean,
                            const std::vector<double>& step,
                            const std::vector<std::int64_t>& lo,
                            const std::vector<std::int64_t>& hi, double prefactor,
                            bool adaptive) {
    // Work in step units: coordinate j takes integer values in [lo_j, hi_j],
    // real value = t * step_j.
    const std::size_t s = mean.size();
    Mat p0(s, s);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) p0(i, j) = precision(i, j) * step[i] * step[j];

    // Sum the tightest window (in marginal sigmas) outermost, so the wide
    // trailing blocks collapse to closed form instead of being enumerated.
    Mat cov0 = p0.inverse();
    std::vector<std::size_t> order(s);
    for (std::size_t i = 0; i < s; ++i) order[i] = i;
    std::vector<double> ratio(s);
    for (std::size_t i = 0; i < s; ++i) {
        const double sd = std::sqrt(double(cov0(i, i)));
        ratio[i] = double(hi[i] - lo[i]) / (sd > 0 ? sd : 1.0);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ratio[a] < ratio[b]; });

    Mat p(s, s);
    std::vector<double> mu(s);
    std::vector<std::int64_t> plo(s), phi(s);
    for (std::size_t i = 0; i < s; ++i) {
        mu[i] = mean[order[i]] / step[order[i]];
        plo[i] = lo[order[i]];
        phi[i] = hi[order[i]];
        for (std::size_t j = 0; j < s; ++j) p(i, j) = p0(order[i], order[j]);
    }
    LatticeSummer summer(p, mu, plo, phi, adaptive);
    return prefactor * summer.run(0);
}

double lattice_sum_core(std::int64_t n, std::int64_t m, const ModelParams& mp,
                        double window_mult) {
    Mat prec = q2_matrix(mp);
    const double nn = double(n), mm = double(m);
    Mat scaled(2, 2);
    std::vector<double> scale = {1.0 / nn, 1.0 / mm};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) scaled(i, j) = nn * prec(i, j) * scale[std::size_t(i)] *
                                                   scale[std::size_t(j)];
    std::vector<double> mean = {nn * mp.p * (1.0 - mp.q), mm * mp.p * mp.p};
    const auto w = std::int64_t(std::ceil(window_mult * std::sqrt(nn)));
    std::vector<std::int64_t> lo = {std::llround(mean[0]) - w, std::llround(mean[1]) - w};
    std::vector<std::int64_t> hi = {std::llround(mean[0]) + w, std::llround(mean[1]) + w};
    const double pref = std::sqrt(prec.det()) / (M_PI * mp.d * nn);
    return gaussian_lattice_sum(scaled, mean, {1.0, 1.0}, lo, hi, pref);
}

double lattice_sum_joint(std::int64_t n, std::int64_t m, const ModelParams& mp,
                         double window_mult) {
    Mat q = q4_matrix(mp);
    Mat prec = q.inverse();
    const double nn = double(n), mm2 = 2.0 * double(m);
    std::vector<double> scale = {1.0 / nn, 1.0 / nn, 1.0 / mm2, 1.0 / mm2};
    Mat scaled(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            scaled(i, j) = nn * prec(i, j) * scale[std::size_t(i)] * scale[std::size_t(j)];
    std::vector<double> mean = {nn * mp.p * mp.q, nn * mp.p * (1.0 - mp.q),
                                mm2 * mp.p * (1.0 - mp.p), mm2 * mp.p * mp.p};
    const auto w = std::int64_t(std::ceil(window_mult * std::sqrt(nn)));
    // m_11 runs over even integers: step 2 from an even origin.
    std::vector<double> step = {1.0, 1.0, 1.0, 2.0};
    std::vector<std::int64_t> lo(4), hi(4);
    for (int i = 0; i < 3; ++i) {
        lo[std::size_t(i)] = std::llround(mean[std::size_t(i)]) - w;
        hi[std::size_t(i)] = std::llround(mean[std::size_t(i)]) + w;
    }
    std::int64_t c11 = std::llround(mean[3]);
    if (c11 % 2 != 0) --c11;
    lo[3] = (c11 - w) / 2;
    hi[3] = (c11 + w) / 2;
    const double pref = 1.0 / (2.0 * std::pow(M_PI * mp.d * nn, 2.0) * std::sqrt(q.det()));
    return gaussian_lattice_sum(scaled, mean, step, lo, hi, pref);
}

double entropy(const std::vector<double>& rho) {
    double sum = 0.0, h = 0.0;
    for (double r : rho) {
        if (r < 0.0 || r > 1.0) throw std::domain_error("entropy: entry outside [0,1]");
        sum += r;
        if (r > 0.0) h -= r * std::log(r);
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw std::domain_error("entropy: not normalised");
    return h;
}

double kl(const std::vector<double>& rho, const std::vector<double>& rho_prime) {
    if (rho.size() != rho_prime.size()) throw std::domain_error("kl: size mismatch");
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) { s1 += rho[i]; s2 += rho_prime[i]; }
    if (std::fabs(s1 - 1.0) > 1e-9 || std::fabs(s2 - 1.0) > 1e-9)
        throw std::domain_error("kl: not normalised");
    double div = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
        if (rho[i] == 0.0) continue;  // 0 ln 0 = 0 ln(0/0) = 0
        if (rho_prime[i] == 0.0) return std::numeric_limits<double>::infinity();
        div += rho[i] * std::log(rho[i] / rho_prime[i]);
    }
    return div;
}

// ---- exact and Gaussian u ----

UExact::UExact(const NVec& vn, const ModelParams& params)
    : vn_(vn),
      params_(params),
      rate_00_(double(vn[0]) * params.lambda[0]),
      rate_01_(double(vn[1] + vn[2]) * params.lambda[1]),
      base_10_(std::int64_t(params.k - 1) * vn[1]),
      fam_10_(pmf_table(params.deg_10()), vn[0]),
      fam_11_(pmf_table(params.deg_11()), vn[2]) {}

double UExact::log_at(const MVec& vm) const {
    double lp = poisson_log_pmf(rate_00_, vm[0]) + poisson_log_pmf(rate_01_, vm[1]);
    lp += fam_10_.log_pmf_of_sum(vm[2] - base_10_);
    lp += fam_11_.log_pmf_of_sum(vm[3]);
    return lp;
}

double UExact::at(const MVec& vm) const {
    double lp = log_at(vm);
    return std::isinf(lp) ? 0.0 : std::exp(lp);
}

double u_exact(const NVec& vn, const MVec& vm, const ModelParams& params) {
    return UExact(vn, params).at(vm);
}

double u_gaussian(const NVec& vn, const MVec& vm, std::int64_t n, std::int64_t m,
                  const ModelParams& mp) {
    const double nn = double(n), mm2 = 2.0 * double(m);
    std::vector<double> dn = {double(vn[0]) / nn - mp.nu[0], double(vn[1]) / nn - mp.nu[1],
                              double(vn[2]) / nn - mp.nu[2]};
    std::vector<double> dm = {double(vm[0]) / mm2 - mp.mu[0], double(vm[1]) / mm2 - mp.mu[1],
                              double(vm[2]) / mm2 - mp.mu[2], double(vm[3]) / mm2 - mp.mu[3]};
    Mat sigma = sigma_matrix(mp);
    Mat sigma_inv = sigma.inverse();
    Mat l = l_matrix(mp);
    Mat lt_si = l.transpose() * sigma_inv;
    Mat b(7, 7);
    Mat ul = lt_si * l;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b(i, j) = ul(i, j);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            b(i, 3 + j) = -lt_si(i, j);
            b(3 + j, i) = -lt_si(i, j);
        }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) b(3 + i, 3 + j) = sigma_inv(i, j);
    std::vector<double> v = {dn[0], dn[1], dn[2], dm[0], dm[1], dm[2], dm[3]};
    const double expo = -0.5 * nn * quad_form(b, v);
    const double pref =
        1.0 / (std::pow(2.0 * M_PI * nn, 2.0) * std::pow(mp.d, 4.0) * std::sqrt(sigma.det()));
    return pref * std::exp(expo);
}

double log_binomial(std::int64_t n, std::int64_t k) {
    if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
    return std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
           std::lgamma(double(n - k) + 1.0);
}

double log_double_factorial_odd(std::int64_t m) {
    if (m < 0 || m % 2 != 0) throw std::domain_error("log_double_factorial_odd: m must be even");
    const double half = double(m) / 2.0;
    return std::lgamma(double(m) + 1.0) - half * std::log(2.0) - std::lgamma(half + 1.0);
}

double log_gamma_count(const CoreObservable& o, std::int64_t n, std::int64_t m,
                       const ModelParams& mp, GammaMode mode) {
    if (o.m_11 % 2 != 0) throw std::invalid_argument("log_gamma_count: m_11 must be even");
    const NVec vn = {n - o.n_star - o.n_1, o.n_star, o.n_1};
    const MVec vm = {2 * m - 2 * o.m_10 - o.m_11, o.m_10, o.m_10, o.m_11};
    if (vn[0] < 0 || vm[0] < 0 || vm[0] % 2 != 0)
        throw std::invalid_argument("log_gamma_count: infeasible counts");

    const double nn = double(n);
    switch (mode) {
        case GammaMode::ExactU:
        case GammaMode::GaussianU: {
            double log_u;
            if (mode == GammaMode::ExactU) {
                log_u = UExact(vn, mp).log_at(vm);
            } else {
                double u = u_gaussian(vn, vm, n, m, mp);
                log_u = u > 0.0 ? std::log(u) : -std::numeric_limits<double>::infinity();
            }
            double log_eta = std::lgamma(nn + 1.0);
            for (int i = 0; i < 3; ++i)
                log_eta += double(vn[std::size_t(i)]) * std::log(mp.nu[std::size_t(i)]) -
                           std::lgamma(double(vn[std::size_t(i)]) + 1.0);
            const double log_kappa = log_double_factorial_odd(vm[0]) +
                                     log_double_factorial_odd(vm[3]) +
                                     std::lgamma(double(vm[1]) + 1.0);
            double log_lambda = 0.0;
            for (int i = 0; i < 4; ++i)
                log_lambda += double(vm[std::size_t(i)]) * std::log(mp.lambda[std::size_t(i)]);
            return std::log(mp.zeta) + mp.d * nn + log_eta + log_kappa - log_lambda + log_u;
        }
        case GammaMode::ClosedForm: {
            Mat q = q4_matrix(mp);
            auto delta = delta_nm(o, n, m, mp);
            const double expo = -0.5 * nn * quad_form(q.inverse(), delta);
            const double log_pref = -std::log(2.0 * M_PI * M_PI * mp.d * mp.d * nn * nn *
                                              std::sqrt(q.det()));
            return log_pref + expo + log_binomial(n * (n - 1) / 2, m);
        }
        case GammaMode::KlForm: {
            const double log_u = UExact(vn, mp).log_at(vm);
            std::vector<double> rho_n(3), rho_m(4);
            for (int i = 0; i < 3; ++i) rho_n[std::size_t(i)] = double(vn[std::size_t(i)]) / nn;
            for (int i = 0; i < 4; ++i)
                rho_m[std::size_t(i)] = double(vm[std::size_t(i)]) / (2.0 * double(m));
            std::vector<double> nu(mp.nu.begin(), mp.nu.end());
            std::vector<double> mu(mp.mu.begin(), mp.mu.end());
            const double expo = -nn * kl(rho_n, nu) + double(m) * kl(rho_m, mu) + mp.d / 2.0 +
                                mp.d * mp.d / 4.0;
            const double log_pref = 0.5 * std::log(2.0) + std::log(mp.d * mp.zeta) -
                                    0.5 * std::log(mp.p * mp.q * (1.0 - mp.q));
            return log_pref + log_u + expo + log_binomial(n * (n - 1) / 2, m);
        }
    }
    throw std::logic_error("log_gamma_count: unknown mode");
}

}  // namespace kcore
