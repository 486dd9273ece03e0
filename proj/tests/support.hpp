// Test-only oracles, independent of the implementation paths they check.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lbl/gaussian.hpp"
#include "lbl/linalg.hpp"
#include "lbl/rng.hpp"

namespace testutil {

using lbl::Matrix;
using lbl::Vec;

// ---- dense multivariate Gaussian machinery (oracle side) -------------------

struct Mvn {
    Vec mean;
    Matrix cov;
    Matrix chol;  // lower factor of cov

    Mvn(Vec mu, Matrix sigma) : mean(std::move(mu)), cov(std::move(sigma)) {
        chol = lbl::cholesky(cov);
    }

    std::size_t dim() const { return mean.size(); }

    Vec draw(lbl::Rng& rng) const {
        Vec eps(dim());
        for (double& v : eps) v = rng.normal();
        Vec x = mean;
        for (std::size_t i = 0; i < dim(); ++i)
            for (std::size_t j = 0; j <= i; ++j) x[i] += chol(i, j) * eps[j];
        return x;
    }

    double log_pdf(const Vec& x) const {
        Vec d(dim());
        for (std::size_t i = 0; i < dim(); ++i) d[i] = x[i] - mean[i];
        // solve L y = d, quad = |y|^2
        Vec y(dim());
        for (std::size_t i = 0; i < dim(); ++i) {
            double s = d[i];
            for (std::size_t k = 0; k < i; ++k) s -= chol(i, k) * y[k];
            y[i] = s / chol(i, i);
        }
        double quad = 0.0;
        for (double v : y) quad += v * v;
        const double logdet = lbl::cholesky_logdet(chol);
        return -0.5 * (static_cast<double>(dim()) * lbl::kLn2Pi + logdet + quad);
    }

    double entropy() const {
        return 0.5 * (static_cast<double>(dim()) * (lbl::kLn2Pi + 1.0) +
                      lbl::cholesky_logdet(chol));
    }
};

// random SPD covariance with moderate conditioning
inline Matrix random_spd(std::size_t n, lbl::Rng& rng, double jitter = 0.5) {
    Matrix a(n, n);
    for (double& v : a.storage()) v = rng.normal();
    Matrix s = lbl::matmul_tn(a, a);
    for (std::size_t i = 0; i < n; ++i) s(i, i) += jitter;
    return s;
}

// conditional distribution Z2 | Z1 = z1 of a jointly Gaussian vector
struct GaussianConditional {
    Matrix gain;       // S21 S11^-1
    Vec offset;        // mu2 - gain mu1 (zero means here)
    Matrix cov;        // Schur complement
    Matrix cov_chol;

    GaussianConditional(const Matrix& joint, std::size_t d1, std::size_t d2) {
        Matrix s11(d1, d1), s21(d2, d1), s22(d2, d2);
        for (std::size_t i = 0; i < d1; ++i)
            for (std::size_t j = 0; j < d1; ++j) s11(i, j) = joint(i, j);
        for (std::size_t i = 0; i < d2; ++i)
            for (std::size_t j = 0; j < d1; ++j) s21(i, j) = joint(d1 + i, j);
        for (std::size_t i = 0; i < d2; ++i)
            for (std::size_t j = 0; j < d2; ++j) s22(i, j) = joint(d1 + i, d1 + j);
        gain = lbl::matmul(s21, lbl::spd_inverse(s11));
        offset = Vec(d2, 0.0);
        Matrix reduction = lbl::matmul(gain, lbl::transpose(s21));
        cov = s22;
        for (std::size_t i = 0; i < d2; ++i)
            for (std::size_t j = 0; j < d2; ++j) cov(i, j) -= reduction(i, j);
        cov_chol = lbl::cholesky(cov);
    }

    double log_pdf(const Vec& z1, const Vec& z2) const {
        Vec mu = lbl::matvec(gain, z1);
        for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += offset[i];
        Vec d(z2.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = z2[i] - mu[i];
        Vec y(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            double s = d[i];
            for (std::size_t k = 0; k < i; ++k) s -= cov_chol(i, k) * y[k];
            y[i] = s / cov_chol(i, i);
        }
        double quad = 0.0;
        for (double v : y) quad += v * v;
        return -0.5 * (static_cast<double>(d.size()) * lbl::kLn2Pi +
                       lbl::cholesky_logdet(cov_chol) + quad);
    }
};

// Monte-Carlo estimate of the variational MI bound
//   E[log p(z2|z1)] + H(Z2)
// for a given (possibly perturbed) conditional; returns (value, std_error).
inline std::pair<double, double> mi_bound_mc(const Matrix& joint, std::size_t d1, std::size_t d2,
                                             const GaussianConditional& predictor,
                                             std::size_t n_samples, lbl::Rng& rng) {
    Mvn joint_dist(Vec(d1 + d2, 0.0), joint);
    Matrix s22(d2, d2);
    for (std::size_t i = 0; i < d2; ++i)
        for (std::size_t j = 0; j < d2; ++j) s22(i, j) = joint(d1 + i, d1 + j);
    const double h2 = Mvn(Vec(d2, 0.0), s22).entropy();

    double sum = 0.0, sum2 = 0.0;
    Vec z1(d1), z2(d2);
    for (std::size_t k = 0; k < n_samples; ++k) {
        Vec z = joint_dist.draw(rng);
        for (std::size_t i = 0; i < d1; ++i) z1[i] = z[i];
        for (std::size_t i = 0; i < d2; ++i) z2[i] = z[d1 + i];
        const double lp = predictor.log_pdf(z1, z2);
        sum += lp;
        sum2 += lp * lp;
    }
    const double n = static_cast<double>(n_samples);
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    return {mean + h2, std::sqrt(var / n)};
}

// ---- finite-difference gradient checking -----------------------------------

// Relative error between analytic gradients and central differences with
// common random numbers: the loss closure must be deterministic for a fixed
// parameter vector.
template <typename LossFn>
double max_grad_rel_error(const std::vector<Matrix*>& params,
                          const std::vector<Matrix>& analytic, LossFn&& loss, double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& w = *params[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double orig = w.data()[i];
            w.data()[i] = orig + h;
            const double lp = loss();
            w.data()[i] = orig - h;
            const double lm = loss();
            w.data()[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = analytic[p].data()[i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

}  // namespace testutil
