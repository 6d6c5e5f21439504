#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace kcore {

// Small dense matrix (row-major). All matrices in this project are at most
// 7x7, so a pivoted Gauss-Jordan is plenty.
class Mat {
public:
    using value_type = long double;

    Mat() : rows_(0), cols_(0) {}
    Mat(std::size_t r, std::size_t c, value_type fill = 0.0L)
        : rows_(r), cols_(c), a_(r * c, fill) {}
    Mat(std::size_t r, std::size_t c, std::initializer_list<value_type> vals)
        : rows_(r), cols_(c), a_(vals) {
        if (a_.size() != r * c) throw std::invalid_argument("Mat: bad initializer size");
    }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Mat diag(const std::vector<double>& d) {
        Mat m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    value_type& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    value_type operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    Mat transpose() const {
        Mat t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Mat operator*(const Mat& b) const {
        if (cols_ != b.rows_) throw std::invalid_argument("Mat: dimension mismatch");
        Mat c(rows_, b.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const value_type aik = (*this)(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    Mat operator+(const Mat& b) const {
        Mat c = *this;
        for (std::size_t i = 0; i < a_.size(); ++i) c.a_[i] += b.a_[i];
        return c;
    }
    Mat operator-(const Mat& b) const {
        Mat c = *this;
        for (std::size_t i = 0; i < a_.size(); ++i) c.a_[i] -= b.a_[i];
        return c;
    }
    Mat operator*(value_type s) const {
        Mat c = *this;
        for (auto& x : c.a_) x *= s;
        return c;
    }

    std::vector<double> operator*(const std::vector<double>& v) const {
        if (cols_ != v.size()) throw std::invalid_argument("Mat: dimension mismatch");
        std::vector<double> r(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            value_type acc = 0.0L;
            for (std::size_t j = 0; j < cols_; ++j) acc += (*this)(i, j) * v[j];
            r[i] = double(acc);
        }
        return r;
    }

    Mat submatrix(const std::vector<std::size_t>& ri, const std::vector<std::size_t>& ci) const {
        Mat s(ri.size(), ci.size());
        for (std::size_t i = 0; i < ri.size(); ++i)
            for (std::size_t j = 0; j < ci.size(); ++j) s(i, j) = (*this)(ri[i], ci[j]);
        return s;
    }

    // Inverse via Gauss-Jordan with partial pivoting.
    Mat inverse() const;
    // Determinant via LU with partial pivoting.
    double det() const;

    double max_abs_diff(const Mat& b) const {
        value_type m = 0.0L;
        for (std::size_t i = 0; i < a_.size(); ++i) {
            value_type d = a_[i] - b.a_[i];
            if (d < 0) d = -d;
            if (d > m) m = d;
        }
        return double(m);
    }

private:
    std::size_t rows_, cols_;
    std::vector<value_type> a_;
};

double quad_form(const Mat& a, const std::vector<double>& x);  // <Ax, x>

}  // namespace kcore
