#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "lbl/linalg.hpp"
#include "lbl/rng.hpp"

namespace lbl {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;
inline constexpr double kLn2Pi = 1.8378770664093454835606594728112;

inline double clamp_log_var(double lv) { return std::clamp(lv, kLogVarMin, kLogVarMax); }

/// Diagonal Gaussian: mean vector plus per-dimension log-variance.
/// Log-variances are clamped to [-10, 10] at construction, which bounds
/// precisions in PoE fusion and keeps NLL terms finite.
struct DiagGaussian {
    Vec mean;
    Vec log_var;

    DiagGaussian() = default;
    DiagGaussian(Vec mu, Vec lv) : mean(std::move(mu)), log_var(std::move(lv)) {
        check(!mean.empty(), "DiagGaussian: dimension must be >= 1");
        check(mean.size() == log_var.size(), "DiagGaussian: field dimension mismatch");
        check(all_finite(mean) && all_finite(log_var), "DiagGaussian: non-finite entry");
        for (double& v : log_var) v = clamp_log_var(v);
    }

    static DiagGaussian standard(std::size_t d) { return DiagGaussian(Vec(d, 0.0), Vec(d, 0.0)); }

    std::size_t dim() const { return mean.size(); }

    Vec variance() const {
        Vec v(log_var.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(log_var[i]);
        return v;
    }
};

/// Negative log-density of x under g:
///   sum_i [ ln(2*pi)/2 + log_var_i/2 + (x_i - mu_i)^2 / (2 exp(log_var_i)) ]
inline double gaussian_nll(const DiagGaussian& g, const Vec& x) {
    check(x.size() == g.dim(), "gaussian_nll: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - g.mean[i];
        s += 0.5 * (kLn2Pi + g.log_var[i]) + d * d / (2.0 * std::exp(g.log_var[i]));
    }
    return s;
}

/// KL(g || N(0, I)) = sum_i [ mu_i^2 + exp(lv_i) - lv_i - 1 ] / 2
inline double kl_to_standard(const DiagGaussian& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.dim(); ++i) {
        const double lv = g.log_var[i];
        s += g.mean[i] * g.mean[i] + std::exp(lv) - lv - 1.0;
    }
    return 0.5 * s;
}

/// Closed-form KL between diagonal Gaussians, KL(g1 || g2).
inline double kl_diag(const DiagGaussian& g1, const DiagGaussian& g2) {
    check(g1.dim() == g2.dim(), "kl_diag: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < g1.dim(); ++i) {
        const double dm = g1.mean[i] - g2.mean[i];
        const double l1 = g1.log_var[i], l2 = g2.log_var[i];
        s += l2 - l1 + (std::exp(l1) + dm * dm) * std::exp(-l2) - 1.0;
    }
    return 0.5 * s;
}

/// Product of Experts fusion: per-dimension precisions add, means are
/// precision-weighted averages. Equals the normalized pointwise product of
/// the two densities.
inline DiagGaussian poe_fuse(const DiagGaussian& g1, const DiagGaussian& g2) {
    check(g1.dim() == g2.dim(), "poe_fuse: dimension mismatch");
    const std::size_t d = g1.dim();
    Vec mean(d), lv(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double p1 = std::exp(-g1.log_var[i]);
        const double p2 = std::exp(-g2.log_var[i]);
        const double var = 1.0 / (p1 + p2);
        mean[i] = var * (p1 * g1.mean[i] + p2 * g2.mean[i]);
        lv[i] = std::log(var);
    }
    return DiagGaussian(std::move(mean), std::move(lv));
}

/// Reparameterized sample: mu + exp(log_var/2) * eps, eps ~ N(0, I).
inline Vec sample(const DiagGaussian& g, Rng& rng) {
    Vec z(g.dim());
    for (std::size_t i = 0; i < z.size(); ++i)
        z[i] = g.mean[i] + std::exp(0.5 * g.log_var[i]) * rng.normal();
    return z;
}

/// E[(Z - z*)^T Q (Z - z*)] for Z ~ g:
///   (mu - z*)^T Q (mu - z*) + tr(Q diag(exp(log_var)))
inline double expected_quadratic_cost(const DiagGaussian& g, const Matrix& q, const Vec& z_star) {
    check(q.rows() == g.dim() && q.cols() == g.dim(), "expected_quadratic_cost: Q dimension mismatch");
    check(z_star.size() == g.dim(), "expected_quadratic_cost: z* dimension mismatch");
    Vec d(g.dim());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = g.mean[i] - z_star[i];
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        s += q(i, i) * std::exp(g.log_var[i]);
        for (std::size_t j = 0; j < d.size(); ++j) s += d[i] * q(i, j) * d[j];
    }
    return s;
}

/// Analytic mutual information of a jointly Gaussian pair (Z1, Z2) with
/// joint covariance cov_joint partitioned at d1:
///   I = ln( det(S11) det(S22) / det(S) ) / 2
/// Rejects covariances with 1-norm condition number above 1e12.
inline double gaussian_mutual_information(const Matrix& cov_joint, std::size_t d1, std::size_t d2) {
    check(cov_joint.rows() == d1 + d2 && cov_joint.cols() == d1 + d2,
          "gaussian_mutual_information: covariance shape mismatch");
    if (spd_cond_1norm(cov_joint) > 1e12)
        throw std::runtime_error("gaussian_mutual_information: covariance ill-conditioned");
    Matrix s11(d1, d1), s22(d2, d2);
    for (std::size_t i = 0; i < d1; ++i)
        for (std::size_t j = 0; j < d1; ++j) s11(i, j) = cov_joint(i, j);
    for (std::size_t i = 0; i < d2; ++i)
        for (std::size_t j = 0; j < d2; ++j) s22(i, j) = cov_joint(d1 + i, d1 + j);
    const double ld_full = cholesky_logdet(cholesky(cov_joint));
    const double ld_1 = cholesky_logdet(cholesky(s11));
    const double ld_2 = cholesky_logdet(cholesky(s22));
    return 0.5 * (ld_1 + ld_2 - ld_full);
}

}  // namespace lbl
