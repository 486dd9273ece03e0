#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>

#include "lbl/env.hpp"
#include "lbl/models.hpp"

namespace lbl {

/// Coefficient of determination over all entries:
///   1 - sum |target - pred|^2 / sum |target - mean(target)|^2
/// with the mean taken per output dimension. Rejects constant targets.
inline double r2(const Matrix& pred, const Matrix& target) {
    check(pred.same_shape(target), "r2: shape mismatch");
    check(target.rows() >= 2, "r2: need at least two rows");
    const std::size_t n = target.rows(), d = target.cols();
    Vec mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += target(i, j);
    for (double& v : mean) v /= static_cast<double>(n);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double r = target(i, j) - pred(i, j);
            const double c = target(i, j) - mean[j];
            ss_res += r * r;
            ss_tot += c * c;
        }
    }
    check(ss_tot > 0.0, "r2: constant target");
    return 1.0 - ss_res / ss_tot;
}

/// OLS probe with intercept, fit once on training latents and frozen.
struct LinearProbe {
    Matrix beta;  // (p+1) x q, first row is the intercept

    static LinearProbe fit(const Matrix& latents, const Matrix& targets) {
        check(latents.rows() == targets.rows(), "LinearProbe::fit: row mismatch");
        Matrix x(latents.rows(), latents.cols() + 1);
        for (std::size_t i = 0; i < latents.rows(); ++i) {
            x(i, 0) = 1.0;
            for (std::size_t j = 0; j < latents.cols(); ++j) x(i, j + 1) = latents(i, j);
        }
        LinearProbe p;
        p.beta = solve_ols(x, targets);
        return p;
    }

    Matrix predict(const Matrix& latents) const {
        check(latents.cols() + 1 == beta.rows(), "LinearProbe::predict: dimension mismatch");
        Matrix out(latents.rows(), beta.cols());
        for (std::size_t i = 0; i < latents.rows(); ++i) {
            for (std::size_t j = 0; j < beta.cols(); ++j) {
                double s = beta(0, j);
                for (std::size_t k = 0; k < latents.cols(); ++k)
                    s += latents(i, k) * beta(k + 1, j);
                out(i, j) = s;
            }
        }
        return out;
    }
};

struct ProbeReport {
    ModelKind kind = ModelKind::Vae;
    double sigma = 0.0;
    double signal_r2_train = 0.0, signal_r2_test = 0.0;
    std::optional<double> noise_r2_train, noise_r2_test;  // absent when sigma = 0
    double train_seconds = 0.0, eval_seconds = 0.0;
    bool degenerate_latents = false;
};

namespace detail {

// Drop the final row: predictive models are probed on latents from x_t
// against the next-step ground truth.
inline Matrix head_rows(const Matrix& m, std::size_t n) {
    Matrix out(n, m.cols());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
    return out;
}

inline Matrix tail_rows(const Matrix& m, std::size_t n) {
    const std::size_t off = m.rows() - n;
    Matrix out(n, m.cols());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(off + i, j);
    return out;
}

inline bool zero_variance_everywhere(const Matrix& latents) {
    for (std::size_t j = 0; j < latents.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < latents.rows(); ++i) mean += latents(i, j);
        mean /= static_cast<double>(latents.rows());
        double var = 0.0;
        for (std::size_t i = 0; i < latents.rows(); ++i) {
            const double d = latents(i, j) - mean;
            var += d * d;
        }
        if (var / static_cast<double>(latents.rows()) > 1e-20) return false;
    }
    return true;
}

}  // namespace detail

/// Linear-probe evaluation with the temporal alignment rules: the VAE latent
/// at t is probed against (s_t, d_t); every predictive model's latent at t is
/// probed against (s_{t+1}, d_{t+1}). Probes are fit on the training split
/// only and scored frozen on both splits.
inline ProbeReport evaluate(const Model& model, const Trajectory& traj_train,
                            const Trajectory& traj_test) {
    const auto t0 = std::chrono::steady_clock::now();
    ProbeReport rep;
    rep.kind = model_kind(model);
    rep.sigma = traj_train.sigma;

    const bool is_vae = rep.kind == ModelKind::Vae;

    Matrix lat_train = extract_probe_latent(model, traj_train.x);
    Matrix lat_test = extract_probe_latent(model, traj_test.x);

    Matrix sig_train, sig_test, noi_train, noi_test;
    if (is_vae) {
        sig_train = traj_train.s;
        sig_test = traj_test.s;
        noi_train = traj_train.d;
        noi_test = traj_test.d;
    } else {
        lat_train = detail::head_rows(lat_train, lat_train.rows() - 1);
        lat_test = detail::head_rows(lat_test, lat_test.rows() - 1);
        sig_train = detail::tail_rows(traj_train.s, lat_train.rows());
        sig_test = detail::tail_rows(traj_test.s, lat_test.rows());
        noi_train = detail::tail_rows(traj_train.d, lat_train.rows());
        noi_test = detail::tail_rows(traj_test.d, lat_test.rows());
    }

    if (detail::zero_variance_everywhere(lat_train)) {
        rep.degenerate_latents = true;
        rep.signal_r2_train = rep.signal_r2_test = std::nan("");
        rep.eval_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rep;
    }

    LinearProbe sig_probe = LinearProbe::fit(lat_train, sig_train);
    rep.signal_r2_train = r2(sig_probe.predict(lat_train), sig_train);
    rep.signal_r2_test = r2(sig_probe.predict(lat_test), sig_test);

    if (traj_train.sigma > 0.0) {
        LinearProbe noi_probe = LinearProbe::fit(lat_train, noi_train);
        rep.noise_r2_train = r2(noi_probe.predict(lat_train), noi_train);
        rep.noise_r2_test = r2(noi_probe.predict(lat_test), noi_test);
    }
    rep.eval_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace lbl
