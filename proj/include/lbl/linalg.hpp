#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace lbl {

using Vec = std::vector<double>;

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

/// Dense row-major matrix of doubles. Dimensions are fixed at construction;
/// every binary operation checks conformability. `from_data` additionally
/// rejects non-finite entries.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

    static Matrix from_data(std::size_t rows, std::size_t cols, Vec data) {
        check(data.size() == rows * cols, "Matrix::from_data: size mismatch");
        check(all_finite(data), "Matrix::from_data: non-finite entry");
        Matrix m(rows, cols);
        m.a_ = std::move(data);
        return m;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return a_.size(); }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    double* data() { return a_.data(); }
    const double* data() const { return a_.data(); }
    double* row(std::size_t i) { return a_.data() + i * cols_; }
    const double* row(std::size_t i) const { return a_.data() + i * cols_; }

    Vec& storage() { return a_; }
    const Vec& storage() const { return a_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    Vec a_;
};

// ---- elementwise helpers ------------------------------------------------

inline void axpy(Matrix& y, double alpha, const Matrix& x) {
    check(y.same_shape(x), "axpy: shape mismatch");
    double* yd = y.data();
    const double* xd = x.data();
    for (std::size_t i = 0; i < y.size(); ++i) yd[i] += alpha * xd[i];
}

inline void scale_inplace(Matrix& m, double alpha) {
    for (double* p = m.data(); p != m.data() + m.size(); ++p) *p *= alpha;
}

inline double frobenius_dist(const Matrix& a, const Matrix& b) {
    check(a.same_shape(b), "frobenius_dist: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// ---- products ------------------------------------------------------------

/// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    check(a.cols() == b.rows(), "matmul: inner dimension mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = ai[k];
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

/// C = A * B^T  (the hot path: batch-rows times weight-rows)
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check(a.cols() == b.cols(), "matmul_nt: inner dimension mismatch");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double* ci = c.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
            ci[j] = s;
        }
    }
    return c;
}

/// C = A^T * B
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check(a.rows() == b.rows(), "matmul_tn: inner dimension mismatch");
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* ak = a.row(k);
        const double* bk = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ak[i];
            double* ci = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline Vec matvec(const Matrix& a, const Vec& x) {
    check(a.cols() == x.size(), "matvec: dimension mismatch");
    Vec y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
        y[i] = s;
    }
    return y;
}

inline Vec matvec_t(const Matrix& a, const Vec& x) {
    check(a.rows() == x.size(), "matvec_t: dimension mismatch");
    Vec y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) y[j] += ai[j] * x[i];
    }
    return y;
}

inline double dot(const Vec& a, const Vec& b) {
    check(a.size() == b.size(), "dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

// ---- factorizations -------------------------------------------------------

/// Householder QR of a square matrix. Sign convention: the diagonal of R is
/// forced positive (matching Q columns negated), making Q a deterministic
/// function of the input.
inline void qr_square(const Matrix& a, Matrix& q, Matrix& r) {
    check(a.rows() == a.cols(), "qr_square: matrix must be square");
    const std::size_t n = a.rows();
    r = a;
    q = Matrix::identity(n);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        double nrm = 0.0;
        for (std::size_t i = k; i < n; ++i) nrm += r(i, k) * r(i, k);
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) continue;
        Vec v(n - k, 0.0);
        const double alpha = r(k, k) >= 0 ? -nrm : nrm;
        v[0] = r(k, k) - alpha;
        for (std::size_t i = k + 1; i < n; ++i) v[i - k] = r(i, k);
        double vnorm2 = 0.0;
        for (double x : v) vnorm2 += x * x;
        if (vnorm2 == 0.0) continue;
        // R <- (I - 2vv^T/v^Tv) R ; Q <- Q (I - 2vv^T/v^Tv)
        for (std::size_t j = k; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < n; ++i) s += v[i - k] * r(i, j);
            s *= 2.0 / vnorm2;
            for (std::size_t i = k; i < n; ++i) r(i, j) -= s * v[i - k];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k; j < n; ++j) s += q(i, j) * v[j - k];
            s *= 2.0 / vnorm2;
            for (std::size_t j = k; j < n; ++j) q(i, j) -= s * v[j - k];
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (r(k, k) < 0.0) {
            for (std::size_t j = 0; j < n; ++j) r(k, j) = -r(k, j);
            for (std::size_t i = 0; i < n; ++i) q(i, k) = -q(i, k);
        }
    }
}

/// Cholesky factor L (lower) of a symmetric positive definite matrix.
/// Throws on non-PD input.
inline Matrix cholesky(const Matrix& a) {
    check(a.rows() == a.cols(), "cholesky: matrix must be square");
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0) throw std::runtime_error("cholesky: matrix not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

/// Solve A x = b via a precomputed Cholesky factor L (A = L L^T).
inline Vec cholesky_solve(const Matrix& l, const Vec& b) {
    const std::size_t n = l.rows();
    check(b.size() == n, "cholesky_solve: dimension mismatch");
    Vec y(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = y[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
        x[i] = s / l(i, i);
    }
    return x;
}

inline double cholesky_logdet(const Matrix& l) {
    double s = 0.0;
    for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

/// Inverse of a small SPD matrix via Cholesky.
inline Matrix spd_inverse(const Matrix& a) {
    const Matrix l = cholesky(a);
    const std::size_t n = a.rows();
    Matrix inv(n, n);
    Vec e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        Vec col = cholesky_solve(l, e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
        e[j] = 0.0;
    }
    return inv;
}

/// 1-norm condition number of an SPD matrix (exact, via explicit inverse).
inline double spd_cond_1norm(const Matrix& a) {
    auto norm1 = [](const Matrix& m) {
        double best = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m.rows(); ++i) s += std::abs(m(i, j));
            best = std::max(best, s);
        }
        return best;
    };
    return norm1(a) * norm1(spd_inverse(a));
}

/// Solve a general square system A x = b by Gaussian elimination with
/// partial pivoting.
inline Vec solve_linear(Matrix a, Vec b) {
    check(a.rows() == a.cols() && a.rows() == b.size(), "solve_linear: dimension mismatch");
    const std::size_t n = a.rows();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (std::abs(a(piv, k)) < 1e-14) throw std::runtime_error("solve_linear: singular matrix");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
            b[i] -= f * b[k];
        }
    }
    Vec x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

/// Least-squares coefficients of Y on X via normal equations with ridge
/// damping 1e-8 on the diagonal. X is N x p (caller includes any intercept
/// column), Y is N x q; returns p x q coefficients. Throws if the damped
/// normal matrix is still not factorizable.
inline Matrix solve_ols(const Matrix& x, const Matrix& y) {
    check(x.rows() == y.rows(), "solve_ols: row count mismatch");
    check(x.rows() > x.cols(), "solve_ols: underdetermined system");
    Matrix xtx = matmul_tn(x, x);
    for (std::size_t i = 0; i < xtx.rows(); ++i) xtx(i, i) += 1e-8;
    Matrix l;
    try {
        l = cholesky(xtx);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("solve_ols: rank-deficient beyond damping tolerance");
    }
    Matrix xty = matmul_tn(x, y);
    Matrix beta(x.cols(), y.cols());
    Vec col(x.cols());
    for (std::size_t j = 0; j < y.cols(); ++j) {
        for (std::size_t i = 0; i < x.cols(); ++i) col[i] = xty(i, j);
        Vec b = cholesky_solve(l, col);
        for (std::size_t i = 0; i < x.cols(); ++i) beta(i, j) = b[i];
    }
    return beta;
}

}  // namespace lbl
