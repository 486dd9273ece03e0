#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lbl/gaussian.hpp"
#include "lbl/linalg.hpp"
#include "lbl/rng.hpp"

namespace lbl {

inline constexpr std::size_t kLatentDim = 4;

/// Bias-free linear layer; forward on row batches is X * W^T.
struct LinearMap {
    Matrix w;  // out_dim x in_dim

    LinearMap() = default;
    LinearMap(std::size_t out_dim, std::size_t in_dim) : w(out_dim, in_dim) {}

    static LinearMap random(std::size_t out_dim, std::size_t in_dim, Rng& rng) {
        LinearMap m(out_dim, in_dim);
        const double std = 1.0 / std::sqrt(static_cast<double>(in_dim));
        for (double& v : m.w.storage()) v = std * rng.normal();
        return m;
    }

    Matrix forward(const Matrix& x) const { return matmul_nt(x, w); }
    Vec forward(const Vec& x) const { return matvec(w, x); }

    std::size_t in_dim() const { return w.cols(); }
    std::size_t out_dim() const { return w.rows(); }
};

struct TrainConfig {
    double lr = 1e-3;
    std::size_t steps = 6000;
    double ema_tau = 0.99;
    double beta = 0.01;
    double gamma = 0.1;
    double vicreg_inv = 25.0;
    double vicreg_var = 25.0;
    double vicreg_cov = 1.0;
    std::uint64_t seed = 111;
};

struct LossResult {
    double loss = 0.0;
    std::vector<Matrix> grads;  // aligned with trainable()
    std::vector<std::pair<std::string, double>> terms;
};

namespace detail {

// zero-initialized gradient set matching a list of parameter shapes
inline std::vector<Matrix> zero_like(const std::vector<Matrix*>& params) {
    std::vector<Matrix> g;
    g.reserve(params.size());
    for (const Matrix* p : params) g.emplace_back(p->rows(), p->cols());
    return g;
}

// clamp log-variances; mask[i] = 1 where the raw value is inside the clamp
// range (gradient passes), 0 where it saturated.
inline void clamp_with_mask(const Matrix& raw, Matrix& eff, Matrix& mask) {
    eff = raw;
    mask = Matrix(raw.rows(), raw.cols(), 1.0);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        double v = raw.data()[i];
        if (v < kLogVarMin) {
            eff.data()[i] = kLogVarMin;
            mask.data()[i] = 0.0;
        } else if (v > kLogVarMax) {
            eff.data()[i] = kLogVarMax;
            mask.data()[i] = 0.0;
        }
    }
}

inline Matrix draw_normal(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.storage()) v = rng.normal();
    return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// VAE: probabilistic encoder (two heads) + deterministic decoder, ELBO loss.
// ---------------------------------------------------------------------------
struct VaeModel {
    LinearMap enc_mu, enc_logvar, dec;
    double beta = 0.01;

    VaeModel() = default;
    VaeModel(std::size_t obs_dim, std::size_t latent_dim, std::uint64_t seed, double beta_ = 0.01)
        : beta(beta_) {
        Rng rng = substream(seed, 0x564145ULL);  // "VAE"
        enc_mu = LinearMap::random(latent_dim, obs_dim, rng);
        enc_logvar = LinearMap(latent_dim, obs_dim);
        dec = LinearMap::random(obs_dim, latent_dim, rng);
    }

    std::vector<Matrix*> trainable() { return {&enc_mu.w, &enc_logvar.w, &dec.w}; }
};

inline LossResult vae_loss_and_grad(VaeModel& m, const Matrix& x, Rng& rng) {
    const std::size_t n = x.rows();
    check(n >= 1, "vae_loss_and_grad: empty batch");
    const std::size_t dz = m.enc_mu.out_dim();
    const double inv_n = 1.0 / static_cast<double>(n);

    Matrix mu = m.enc_mu.forward(x);
    Matrix lv_raw = m.enc_logvar.forward(x);
    Matrix lv, lv_mask;
    detail::clamp_with_mask(lv_raw, lv, lv_mask);
    Matrix eps = detail::draw_normal(n, dz, rng);

    Matrix z(n, dz);
    for (std::size_t i = 0; i < z.size(); ++i)
        z.data()[i] = mu.data()[i] + std::exp(0.5 * lv.data()[i]) * eps.data()[i];

    Matrix xhat = m.dec.forward(z);

    double recon = 0.0, kl = 0.0;
    Matrix dxhat(n, x.cols());
    for (std::size_t i = 0; i < xhat.size(); ++i) {
        const double r = xhat.data()[i] - x.data()[i];
        recon += r * r;
        dxhat.data()[i] = 2.0 * r * inv_n;
    }
    recon *= inv_n;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const double l = lv.data()[i];
        kl += 0.5 * (mu.data()[i] * mu.data()[i] + std::exp(l) - l - 1.0);
    }
    kl *= inv_n;

    Matrix gz = matmul(dxhat, m.dec.w);  // N x dz
    Matrix dmu(n, dz), dlv(n, dz);
    for (std::size_t i = 0; i < gz.size(); ++i) {
        dmu.data()[i] = gz.data()[i] + m.beta * inv_n * mu.data()[i];
        const double l = lv.data()[i];
        dlv.data()[i] = lv_mask.data()[i] *
                        (gz.data()[i] * eps.data()[i] * 0.5 * std::exp(0.5 * l) +
                         m.beta * inv_n * 0.5 * (std::exp(l) - 1.0));
    }

    LossResult out;
    out.loss = recon + m.beta * kl;
    out.terms = {{"recon", recon}, {"kl", kl}};
    out.grads.push_back(matmul_tn(dmu, x));
    out.grads.push_back(matmul_tn(dlv, x));
    out.grads.push_back(matmul_tn(dxhat, z));
    return out;
}

// ---------------------------------------------------------------------------
// AR: deterministic bottleneck predicting the next observation in pixel space.
// ---------------------------------------------------------------------------
struct ArModel {
    LinearMap enc, pred;

    ArModel() = default;
    ArModel(std::size_t obs_dim, std::size_t latent_dim, std::uint64_t seed) {
        Rng rng = substream(seed, 0x4152ULL);  // "AR"
        enc = LinearMap::random(latent_dim, obs_dim, rng);
        pred = LinearMap::random(obs_dim, latent_dim, rng);
    }

    std::vector<Matrix*> trainable() { return {&enc.w, &pred.w}; }
};

inline LossResult ar_loss_and_grad(ArModel& m, const Matrix& x_t, const Matrix& x_next) {
    check(x_t.rows() == x_next.rows(), "ar_loss_and_grad: misaligned batch sizes");
    const std::size_t n = x_t.rows();
    const double inv_n = 1.0 / static_cast<double>(n);

    Matrix z = m.enc.forward(x_t);
    Matrix p = m.pred.forward(z);

    double mse = 0.0;
    Matrix dp(p.rows(), p.cols());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = p.data()[i] - x_next.data()[i];
        mse += r * r;
        dp.data()[i] = 2.0 * r * inv_n;
    }
    mse *= inv_n;

    Matrix gz = matmul(dp, m.pred.w);

    LossResult out;
    out.loss = mse;
    out.terms = {{"mse", mse}};
    out.grads.push_back(matmul_tn(gz, x_t));
    out.grads.push_back(matmul_tn(dp, z));
    return out;
}

// ---------------------------------------------------------------------------
// JEPA: deterministic latent predictor trained with a VICReg loss against an
// EMA target encoder.
// ---------------------------------------------------------------------------
struct JepaModel {
    LinearMap enc, pred, target_enc;  // target_enc never receives gradients
    double coef_inv = 25.0, coef_var = 25.0, coef_cov = 1.0;

    JepaModel() = default;
    JepaModel(std::size_t obs_dim, std::size_t latent_dim, std::uint64_t seed) {
        Rng rng = substream(seed, 0x4a455041ULL);  // "JEPA"
        enc = LinearMap::random(latent_dim, obs_dim, rng);
        pred = LinearMap::random(latent_dim, latent_dim, rng);
        target_enc = enc;
    }

    std::vector<Matrix*> trainable() { return {&enc.w, &pred.w}; }
};

inline LossResult jepa_loss_and_grad(JepaModel& m, const Matrix& x_t, const Matrix& x_next) {
    check(x_t.rows() == x_next.rows(), "jepa_loss_and_grad: misaligned batch sizes");
    const std::size_t n = x_t.rows();
    check(n >= 2, "jepa_loss_and_grad: batch size must be >= 2");
    const std::size_t dz = m.enc.out_dim();
    const double inv_n = 1.0 / static_cast<double>(n);

    Matrix z = m.enc.forward(x_t);
    Matrix p = m.pred.forward(z);
    Matrix tgt = m.target_enc.forward(x_next);  // stop-gradient

    // invariance: mean over batch of |p - tgt|^2 / dz
    double inv = 0.0;
    Matrix dp(n, dz);
    const double inv_scale = m.coef_inv * 2.0 * inv_n / static_cast<double>(dz);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = p.data()[i] - tgt.data()[i];
        inv += r * r;
        dp.data()[i] = inv_scale * r;
    }
    inv *= inv_n / static_cast<double>(dz);

    // variance hinge and covariance penalty on the online embeddings z
    Vec mean(dz, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dz; ++j) mean[j] += z(i, j);
    for (double& v : mean) v *= inv_n;

    Matrix y(n, dz);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dz; ++j) y(i, j) = z(i, j) - mean[j];

    const double inv_nm1 = 1.0 / static_cast<double>(n - 1);
    Vec var(dz, 0.0), stddev(dz);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dz; ++j) var[j] += y(i, j) * y(i, j);
    double var_term = 0.0;
    Vec hinge_active(dz, 0.0);
    for (std::size_t j = 0; j < dz; ++j) {
        var[j] *= inv_nm1;
        stddev[j] = std::sqrt(var[j] + 1e-4);
        if (stddev[j] < 1.0) {
            var_term += 1.0 - stddev[j];
            hinge_active[j] = 1.0;
        }
    }
    var_term /= static_cast<double>(dz);

    Matrix cov = matmul_tn(y, y);
    scale_inplace(cov, inv_nm1);
    double cov_term = 0.0;
    for (std::size_t j = 0; j < dz; ++j)
        for (std::size_t k = 0; k < dz; ++k)
            if (j != k) cov_term += cov(j, k) * cov(j, k);
    cov_term /= static_cast<double>(dz);

    // gradient wrt z: predictor path + hinge + covariance. Both regularizer
    // gradients have zero column mean, so the centering term drops out.
    Matrix gz = matmul(dp, m.pred.w);
    for (std::size_t j = 0; j < dz; ++j) {
        if (hinge_active[j] == 0.0) continue;
        const double c = -m.coef_var * inv_nm1 / (static_cast<double>(dz) * stddev[j]);
        for (std::size_t i = 0; i < n; ++i) gz(i, j) += c * y(i, j);
    }
    const double cov_scale = m.coef_cov * 4.0 * inv_nm1 / static_cast<double>(dz);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dz; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < dz; ++k)
                if (k != j) s += cov(j, k) * y(i, k);
            gz(i, j) += cov_scale * s;
        }
    }

    LossResult out;
    out.loss = m.coef_inv * inv + m.coef_var * var_term + m.coef_cov * cov_term;
    out.terms = {{"inv", m.coef_inv * inv},
                 {"var", m.coef_var * var_term},
                 {"cov", m.coef_cov * cov_term}};
    out.grads.push_back(matmul_tn(gz, x_t));
    out.grads.push_back(matmul_tn(dp, z));
    return out;
}

// ---------------------------------------------------------------------------
// VJEPA: probabilistic predictor trained by NLL of a sampled target plus a
// KL regularizer on the target distribution. target_mu is EMA-only;
// target_logvar is trained by gradient (asymmetric update).
// ---------------------------------------------------------------------------
struct VJepaModel {
    LinearMap enc;                    // D_x -> D_z
    LinearMap pred_mu, pred_logvar;   // D_z -> D_z
    LinearMap target_mu;              // D_x -> D_z, EMA of enc
    LinearMap target_logvar;          // D_x -> D_z, gradient-trained
    double beta = 0.01;

    VJepaModel() = default;
    VJepaModel(std::size_t obs_dim, std::size_t latent_dim, std::uint64_t seed, double beta_ = 0.01)
        : beta(beta_) {
        Rng rng = substream(seed, 0x564a4550ULL);  // "VJEP"
        enc = LinearMap::random(latent_dim, obs_dim, rng);
        pred_mu = LinearMap::random(latent_dim, latent_dim, rng);
        pred_logvar = LinearMap(latent_dim, latent_dim);
        target_mu = enc;
        target_logvar = LinearMap(latent_dim, obs_dim);
    }

    std::vector<Matrix*> trainable() {
        return {&enc.w, &pred_mu.w, &pred_logvar.w, &target_logvar.w};
    }
};

namespace detail {

// Shared VJEPA loss core over an explicit predictor-input batch. For the
// plain model zp == z == enc(x_t); the controlled variant appends actions.
// grad_zp receives the back-propagated gradient wrt zp (predictor path only).
struct VJepaCore {
    double nll = 0.0;
    double kl = 0.0;
    Matrix d_pred_mu_w, d_pred_logvar_w, d_target_logvar_w;
    Matrix grad_zp;  // N x dz_pred_in contribution through the predictor heads
};

inline VJepaCore vjepa_core(const LinearMap& pred_mu, const LinearMap& pred_logvar,
                            const LinearMap& target_mu, const LinearMap& target_logvar,
                            const Matrix& zp, const Matrix& x_next, double beta, Rng& rng) {
    const std::size_t n = zp.rows();
    const std::size_t dz = pred_mu.out_dim();
    const double inv_n = 1.0 / static_cast<double>(n);

    Matrix pmu = pred_mu.forward(zp);
    Matrix plv_raw = pred_logvar.forward(zp);
    Matrix plv, plv_mask;
    clamp_with_mask(plv_raw, plv, plv_mask);

    Matrix tmu = target_mu.forward(x_next);
    Matrix tlv_raw = target_logvar.forward(x_next);
    Matrix tlv, tlv_mask;
    clamp_with_mask(tlv_raw, tlv, tlv_mask);

    Matrix eps = draw_normal(n, dz, rng);
    Matrix zt(n, dz);
    for (std::size_t i = 0; i < zt.size(); ++i)
        zt.data()[i] = tmu.data()[i] + std::exp(0.5 * tlv.data()[i]) * eps.data()[i];

    VJepaCore core;
    Matrix dpmu(n, dz), dplv(n, dz), dtlv(n, dz);
    for (std::size_t i = 0; i < zt.size(); ++i) {
        const double lp = plv.data()[i];
        const double prec = std::exp(-lp);
        const double r = zt.data()[i] - pmu.data()[i];
        core.nll += 0.5 * (kLn2Pi + lp) + 0.5 * r * r * prec;
        dpmu.data()[i] = -r * prec * inv_n;
        dplv.data()[i] = plv_mask.data()[i] * 0.5 * (1.0 - r * r * prec) * inv_n;
        const double dzt = r * prec * inv_n;
        const double lt = tlv.data()[i];
        dtlv.data()[i] = tlv_mask.data()[i] *
                         (dzt * eps.data()[i] * 0.5 * std::exp(0.5 * lt) +
                          beta * inv_n * 0.5 * (std::exp(lt) - 1.0));
        core.kl += 0.5 * (tmu.data()[i] * tmu.data()[i] + std::exp(lt) - lt - 1.0);
    }
    core.nll *= inv_n;
    core.kl *= inv_n;

    core.d_pred_mu_w = matmul_tn(dpmu, zp);
    core.d_pred_logvar_w = matmul_tn(dplv, zp);
    core.d_target_logvar_w = matmul_tn(dtlv, x_next);
    core.grad_zp = matmul(dpmu, pred_mu.w);
    Matrix via_plv = matmul(dplv, pred_logvar.w);
    axpy(core.grad_zp, 1.0, via_plv);
    return core;
}

}  // namespace detail

inline LossResult vjepa_loss_and_grad(VJepaModel& m, const Matrix& x_t, const Matrix& x_next,
                                      Rng& rng) {
    check(x_t.rows() == x_next.rows(), "vjepa_loss_and_grad: misaligned batch sizes");
    Matrix z = m.enc.forward(x_t);
    auto core = detail::vjepa_core(m.pred_mu, m.pred_logvar, m.target_mu, m.target_logvar, z,
                                   x_next, m.beta, rng);
    LossResult out;
    out.loss = core.nll + m.beta * core.kl;
    out.terms = {{"nll", core.nll}, {"kl", core.kl}};
    out.grads.push_back(matmul_tn(core.grad_zp, x_t));
    out.grads.push_back(std::move(core.d_pred_mu_w));
    out.grads.push_back(std::move(core.d_pred_logvar_w));
    out.grads.push_back(std::move(core.d_target_logvar_w));
    return out;
}

// ---------------------------------------------------------------------------
// BJEPA: VJEPA plus a learnable static prior, with a KL term pulling the
// dynamics expert toward the prior.
// ---------------------------------------------------------------------------
struct BJepaModel {
    LinearMap enc;
    LinearMap pred_mu, pred_logvar;
    LinearMap target_mu;
    LinearMap target_logvar;
    Matrix prior_mu;      // 1 x D_z, learnable, init zero
    Matrix prior_logvar;  // 1 x D_z, learnable, init zero
    double beta = 0.01;
    double gamma = 0.1;

    BJepaModel() = default;
    BJepaModel(std::size_t obs_dim, std::size_t latent_dim, std::uint64_t seed,
               double beta_ = 0.01, double gamma_ = 0.1)
        : beta(beta_), gamma(gamma_) {
        Rng rng = substream(seed, 0x424a4550ULL);  // "BJEP"
        enc = LinearMap::random(latent_dim, obs_dim, rng);
        pred_mu = LinearMap::random(latent_dim, latent_dim, rng);
        pred_logvar = LinearMap(latent_dim, latent_dim);
        target_mu = enc;
        target_logvar = LinearMap(latent_dim, obs_dim);
        prior_mu = Matrix(1, latent_dim);
        prior_logvar = Matrix(1, latent_dim);
    }

    DiagGaussian prior() const {
        return DiagGaussian(prior_mu.storage(), prior_logvar.storage());
    }

    std::vector<Matrix*> trainable() {
        return {&enc.w, &pred_mu.w, &pred_logvar.w, &target_logvar.w, &prior_mu, &prior_logvar};
    }
};

inline LossResult bjepa_loss_and_grad(BJepaModel& m, const Matrix& x_t, const Matrix& x_next,
                                      Rng& rng) {
    check(x_t.rows() == x_next.rows(), "bjepa_loss_and_grad: misaligned batch sizes");
    const std::size_t n = x_t.rows();
    const std::size_t dz = m.pred_mu.out_dim();
    const double inv_n = 1.0 / static_cast<double>(n);

    Matrix z = m.enc.forward(x_t);

    LossResult out;
    if (m.gamma == 0.0) {
        auto core = detail::vjepa_core(m.pred_mu, m.pred_logvar, m.target_mu, m.target_logvar, z,
                                       x_next, m.beta, rng);
        out.loss = core.nll + m.beta * core.kl;
        out.terms = {{"nll", core.nll}, {"kl", core.kl}, {"prior_kl", 0.0}};
        out.grads.push_back(matmul_tn(core.grad_zp, x_t));
        out.grads.push_back(std::move(core.d_pred_mu_w));
        out.grads.push_back(std::move(core.d_pred_logvar_w));
        out.grads.push_back(std::move(core.d_target_logvar_w));
        out.grads.emplace_back(1, dz);
        out.grads.emplace_back(1, dz);
        return out;
    }

    // recompute the predictor heads once; the core consumes the same values
    Matrix pmu = m.pred_mu.forward(z);
    Matrix plv_raw = m.pred_logvar.forward(z);
    Matrix plv, plv_mask;
    detail::clamp_with_mask(plv_raw, plv, plv_mask);

    Matrix pm_raw = m.prior_mu, pl_raw = m.prior_logvar;
    Matrix pl, pl_mask;
    detail::clamp_with_mask(pl_raw, pl, pl_mask);

    double prior_kl = 0.0;
    Matrix dpmu_extra(n, dz), dplv_extra(n, dz);
    Matrix dpm(1, dz), dpl(1, dz);
    const double g_scale = m.gamma * inv_n;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dz; ++j) {
            const double lp = plv(i, j);
            const double lq = pl(0, j);
            const double dm = pmu(i, j) - pm_raw(0, j);
            const double elp = std::exp(lp), emlq = std::exp(-lq);
            prior_kl += 0.5 * (lq - lp + (elp + dm * dm) * emlq - 1.0);
            dpmu_extra(i, j) += g_scale * dm * emlq;
            dplv_extra(i, j) += plv_mask(i, j) * g_scale * 0.5 * (elp * emlq - 1.0);
            dpm(0, j) += -g_scale * dm * emlq;
            dpl(0, j) += pl_mask(0, j) * g_scale * 0.5 * (1.0 - (elp + dm * dm) * emlq);
        }
    }
    prior_kl *= inv_n;

    auto core = detail::vjepa_core(m.pred_mu, m.pred_logvar, m.target_mu, m.target_logvar, z,
                                   x_next, m.beta, rng);

    out.loss = core.nll + m.beta * core.kl + m.gamma * prior_kl;
    out.terms = {{"nll", core.nll}, {"kl", core.kl}, {"prior_kl", prior_kl}};

    // fold the prior-KL contributions into the predictor-head paths
    Matrix d_pmu_w = matmul_tn(dpmu_extra, z);
    axpy(d_pmu_w, 1.0, core.d_pred_mu_w);
    Matrix d_plv_w = matmul_tn(dplv_extra, z);
    axpy(d_plv_w, 1.0, core.d_pred_logvar_w);
    Matrix gz = matmul(dpmu_extra, m.pred_mu.w);
    Matrix gz2 = matmul(dplv_extra, m.pred_logvar.w);
    axpy(gz, 1.0, gz2);
    axpy(gz, 1.0, core.grad_zp);

    out.grads.push_back(matmul_tn(gz, x_t));
    out.grads.push_back(std::move(d_pmu_w));
    out.grads.push_back(std::move(d_plv_w));
    out.grads.push_back(std::move(core.d_target_logvar_w));
    out.grads.push_back(std::move(dpm));
    out.grads.push_back(std::move(dpl));
    return out;
}

// ---------------------------------------------------------------------------
// EMA updates and inference utilities
// ---------------------------------------------------------------------------

inline void ema_update(Matrix& target, const Matrix& online, double tau) {
    check(target.same_shape(online), "ema_update: shape mismatch");
    check(tau >= 0.0 && tau <= 1.0, "ema_update: tau must lie in [0,1]");
    for (std::size_t i = 0; i < target.size(); ++i)
        target.data()[i] = tau * target.data()[i] + (1.0 - tau) * online.data()[i];
}

inline void apply_ema(JepaModel& m, double tau) { ema_update(m.target_enc.w, m.enc.w, tau); }
inline void apply_ema(VJepaModel& m, double tau) { ema_update(m.target_mu.w, m.enc.w, tau); }
inline void apply_ema(BJepaModel& m, double tau) { ema_update(m.target_mu.w, m.enc.w, tau); }

/// PoE fusion of the dynamics expert at latent z with an arbitrary prior;
/// with a near-flat prior this returns the dynamics expert unchanged.
inline DiagGaussian bjepa_infer(const BJepaModel& m, const Vec& z, const DiagGaussian& prior) {
    Vec mu = m.pred_mu.forward(z);
    Vec lv = m.pred_logvar.forward(z);
    return poe_fuse(DiagGaussian(std::move(mu), std::move(lv)), prior);
}

// ---------------------------------------------------------------------------
// Model variant + probe-latent extraction
// ---------------------------------------------------------------------------

enum class ModelKind { Vae, Ar, Jepa, VJepa, BJepa };

inline const char* kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Vae: return "vae";
        case ModelKind::Ar: return "ar";
        case ModelKind::Jepa: return "jepa";
        case ModelKind::VJepa: return "vjepa";
        case ModelKind::BJepa: return "bjepa";
    }
    return "?";
}

inline ModelKind kind_from_name(const std::string& s) {
    if (s == "vae") return ModelKind::Vae;
    if (s == "ar") return ModelKind::Ar;
    if (s == "jepa") return ModelKind::Jepa;
    if (s == "vjepa") return ModelKind::VJepa;
    if (s == "bjepa") return ModelKind::BJepa;
    throw std::invalid_argument("unknown model kind: " + s);
}

using Model = std::variant<VaeModel, ArModel, JepaModel, VJepaModel, BJepaModel>;

inline Model make_model(ModelKind kind, std::size_t obs_dim, std::size_t latent_dim,
                        const TrainConfig& cfg) {
    switch (kind) {
        case ModelKind::Vae: return VaeModel(obs_dim, latent_dim, cfg.seed, cfg.beta);
        case ModelKind::Ar: return ArModel(obs_dim, latent_dim, cfg.seed);
        case ModelKind::Jepa: {
            JepaModel m(obs_dim, latent_dim, cfg.seed);
            m.coef_inv = cfg.vicreg_inv;
            m.coef_var = cfg.vicreg_var;
            m.coef_cov = cfg.vicreg_cov;
            return m;
        }
        case ModelKind::VJepa: return VJepaModel(obs_dim, latent_dim, cfg.seed, cfg.beta);
        case ModelKind::BJepa: return BJepaModel(obs_dim, latent_dim, cfg.seed, cfg.beta, cfg.gamma);
    }
    throw std::logic_error("make_model: unreachable");
}

inline ModelKind model_kind(const Model& m) {
    return static_cast<ModelKind>(m.index());
}

inline Matrix extract_probe_latent(const VaeModel& m, const Matrix& x) {
    return m.enc_mu.forward(x);
}
inline Matrix extract_probe_latent(const ArModel& m, const Matrix& x) {
    return m.enc.forward(x);
}
inline Matrix extract_probe_latent(const JepaModel& m, const Matrix& x) {
    return m.pred.forward(m.enc.forward(x));
}
inline Matrix extract_probe_latent(const VJepaModel& m, const Matrix& x) {
    return m.pred_mu.forward(m.enc.forward(x));
}
inline Matrix extract_probe_latent(const BJepaModel& m, const Matrix& x) {
    Matrix z = m.enc.forward(x);
    Matrix pmu = m.pred_mu.forward(z);
    Matrix plv = m.pred_logvar.forward(z);
    const std::size_t dz = pmu.cols();
    Matrix out(pmu.rows(), dz);
    for (std::size_t i = 0; i < pmu.rows(); ++i) {
        for (std::size_t j = 0; j < dz; ++j) {
            const double p_dyn = std::exp(-clamp_log_var(plv(i, j)));
            const double p_pri = std::exp(-clamp_log_var(m.prior_logvar(0, j)));
            out(i, j) = (p_dyn * pmu(i, j) + p_pri * m.prior_mu(0, j)) / (p_dyn + p_pri);
        }
    }
    return out;
}

inline Matrix extract_probe_latent(const Model& m, const Matrix& x) {
    return std::visit([&x](const auto& mm) { return extract_probe_latent(mm, x); }, m);
}

inline std::vector<Matrix*> trainable(Model& m) {
    return std::visit([](auto& mm) { return mm.trainable(); }, m);
}

}  // namespace lbl
