#include "kcore/linalg.hpp"

#include <cmath>

namespace kcore {

namespace {

// The 4x4 matrices feeding the identity checks are ill-conditioned (their
// inverses carry ~1e5 entries); extended precision throughout keeps the
// checks comfortably below their 1e-8 budgets.
using ld = long double;

std::vector<ld> widen(const Mat& m) {
    std::vector<ld> a(m.rows() * m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) a[i * m.cols() + j] = ld(m(i, j));
    return a;
}

}  // namespace

Mat Mat::inverse() const {
    if (rows_ != cols_) throw std::invalid_argument("Mat::inverse: not square");
    const std::size_t n = rows_;
    std::vector<ld> a = widen(*this);
    std::vector<ld> inv(n * n, 0.0L);
    for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0L;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        ld best = std::fabs(a[col * n + col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            ld v = std::fabs(a[r * n + col]);
            if (v > best) { best = v; piv = r; }
        }
        if (best == 0.0L) throw std::runtime_error("Mat::inverse: singular matrix");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a[piv * n + j], a[col * n + j]);
                std::swap(inv[piv * n + j], inv[col * n + j]);
            }
        }
        const ld dvsr = a[col * n + col];
        for (std::size_t j = 0; j < n; ++j) { a[col * n + j] /= dvsr; inv[col * n + j] /= dvsr; }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const ld f = a[r * n + col];
            if (f == 0.0L) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a[r * n + j] -= f * a[col * n + j];
                inv[r * n + j] -= f * inv[col * n + j];
            }
        }
    }
    Mat out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = inv[i * n + j];
    return out;
}

double Mat::det() const {
    if (rows_ != cols_) throw std::invalid_argument("Mat::det: not square");
    const std::size_t n = rows_;
    std::vector<ld> a = widen(*this);
    ld d = 1.0L;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        ld best = std::fabs(a[col * n + col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            ld v = std::fabs(a[r * n + col]);
            if (v > best) { best = v; piv = r; }
        }
        if (best == 0.0L) return 0.0;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[piv * n + j], a[col * n + j]);
            d = -d;
        }
        d *= a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const ld f = a[r * n + col] / a[col * n + col];
            if (f == 0.0L) continue;
            for (std::size_t j = col; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
        }
    }
    return double(d);
}

double quad_form(const Mat& a, const std::vector<double>& x) {
    ld s = 0.0L;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        ld row = 0.0L;
        for (std::size_t j = 0; j < a.cols(); ++j) row += ld(a(i, j)) * ld(x[j]);
        s += row * ld(x[i]);
    }
    return double(s);
}

}  // namespace kcore
