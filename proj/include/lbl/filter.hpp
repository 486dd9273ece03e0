#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "lbl/gaussian.hpp"
#include "lbl/models.hpp"

namespace lbl {

/// Weighted latent particles. Weights are kept normalized; ESS = 1/sum(w^2).
struct ParticleSet {
    Matrix particles;  // M x D_z
    Vec weights;       // M, non-negative, sums to 1
    std::size_t step = 0;

    std::size_t count() const { return particles.rows(); }
    std::size_t dim() const { return particles.cols(); }

    double ess() const {
        double s = 0.0;
        for (double w : weights) s += w * w;
        return 1.0 / s;
    }

    Vec mean() const {
        Vec m(dim(), 0.0);
        for (std::size_t k = 0; k < count(); ++k)
            for (std::size_t j = 0; j < dim(); ++j) m[j] += weights[k] * particles(k, j);
        return m;
    }

    Vec variance() const {
        const Vec m = mean();
        Vec v(dim(), 0.0);
        for (std::size_t k = 0; k < count(); ++k)
            for (std::size_t j = 0; j < dim(); ++j) {
                const double d = particles(k, j) - m[j];
                v[j] += weights[k] * d * d;
            }
        return v;
    }
};

/// Particles drawn from the reference prior N(0, I), uniform weights.
inline ParticleSet pf_init(std::size_t m, std::size_t dz, Rng& rng) {
    ParticleSet ps;
    ps.particles = Matrix(m, dz);
    for (double& v : ps.particles.storage()) v = rng.normal();
    ps.weights = Vec(m, 1.0 / static_cast<double>(m));
    return ps;
}

/// Bootstrap proposal: push every particle through the predictive
/// distribution p(z' | z). Weights are untouched.
inline ParticleSet pf_predict(const ParticleSet& ps, const VJepaModel& model, Rng& rng) {
    ParticleSet out = ps;
    const std::size_t dz = ps.dim();
    Vec z(dz);
    for (std::size_t k = 0; k < ps.count(); ++k) {
        for (std::size_t j = 0; j < dz; ++j) z[j] = ps.particles(k, j);
        DiagGaussian pred(model.pred_mu.forward(z), model.pred_logvar.forward(z));
        Vec zn = sample(pred, rng);
        for (std::size_t j = 0; j < dz; ++j) out.particles(k, j) = zn[j];
    }
    out.step = ps.step + 1;
    return out;
}

/// Latent-space pseudo-likelihood update: each weight is multiplied by
/// q(z | x_next) / p_ref(z) with p_ref = N(0, I), computed in log space with
/// max-subtraction. Throws if every ratio underflows.
inline ParticleSet pf_update(const ParticleSet& ps, const VJepaModel& model, const Vec& x_next) {
    ParticleSet out = ps;
    const std::size_t dz = ps.dim();
    DiagGaussian q(model.target_mu.forward(x_next), model.target_logvar.forward(x_next));
    const DiagGaussian ref = DiagGaussian::standard(dz);

    Vec logw(ps.count());
    double max_lw = -std::numeric_limits<double>::infinity();
    Vec z(dz);
    for (std::size_t k = 0; k < ps.count(); ++k) {
        for (std::size_t j = 0; j < dz; ++j) z[j] = ps.particles(k, j);
        const double lr = -gaussian_nll(q, z) + gaussian_nll(ref, z);
        logw[k] = std::log(ps.weights[k]) + lr;
        max_lw = std::max(max_lw, logw[k]);
    }
    if (!std::isfinite(max_lw))
        throw std::runtime_error("pf_update: degenerate weight update (all ratios underflowed)");
    double sum = 0.0;
    for (std::size_t k = 0; k < ps.count(); ++k) {
        out.weights[k] = std::exp(logw[k] - max_lw);
        sum += out.weights[k];
    }
    for (double& w : out.weights) w /= sum;
    return out;
}

/// Systematic resampling, triggered only when ESS < M/2; output weights are
/// uniform and the particle multiset follows the input weights.
inline ParticleSet pf_resample(const ParticleSet& ps, Rng& rng) {
    const std::size_t m = ps.count();
    if (ps.ess() >= static_cast<double>(m) / 2.0) return ps;
    ParticleSet out;
    out.step = ps.step;
    out.particles = Matrix(m, ps.dim());
    out.weights = Vec(m, 1.0 / static_cast<double>(m));
    const double u0 = rng.uniform() / static_cast<double>(m);
    double cum = ps.weights[0];
    std::size_t i = 0;
    for (std::size_t k = 0; k < m; ++k) {
        const double u = u0 + static_cast<double>(k) / static_cast<double>(m);
        while (cum < u && i + 1 < m) cum += ps.weights[++i];
        for (std::size_t j = 0; j < ps.dim(); ++j) out.particles(k, j) = ps.particles(i, j);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Kalman reference filter
// ---------------------------------------------------------------------------

/// Scalar Kalman filter: predict mu <- a mu, p <- a^2 p + q, then the
/// standard correction against measurement y with noise variance r.
struct Kalman1D {
    double a = 1.0, q = 1.0, r = 1.0;
    double mu = 0.0, p = 1.0;

    void predict() {
        mu = a * mu;
        p = a * a * p + q;
    }

    void correct(double y) {
        const double k = p / (p + r);
        mu += k * (y - mu);
        p *= 1.0 - k;
    }
};

/// 1-D demo system whose VJEPA heads realize exact linear-Gaussian dynamics
/// and a constant-variance pseudo-measurement. Observations are 2-D with a
/// constant 1 in the second slot so the bias-free target heads can emit a
/// fixed offset: q(z|x) = N(alpha*x_obs, s2). The weight ratio
/// q(z|x)/N(z;0,1) then equals (up to a constant) a Gaussian factor with
///   s_eff^2 = s2/(1-s2),  y_eff = alpha*x_obs/(1-s2),
/// which is what the matched Kalman filter corrects against.
struct FilterDemoSystem {
    double a = 0.8;        // latent transition
    double alpha = 0.7;    // measurement-head gain
    double s2 = 0.5;       // measurement-head variance (must be < 1)
    double obs_noise = 1.0;

    VJepaModel model() const {
        VJepaModel m;
        m.enc = LinearMap(1, 2);
        m.enc.w(0, 0) = 1.0;
        m.pred_mu = LinearMap(1, 1);
        m.pred_mu.w(0, 0) = a;
        m.pred_logvar = LinearMap(1, 1);  // zero weight: unit process noise
        m.target_mu = LinearMap(1, 2);
        m.target_mu.w(0, 0) = alpha;
        m.target_logvar = LinearMap(1, 2);
        m.target_logvar.w(0, 1) = std::log(s2);
        return m;
    }

    Kalman1D matched_kalman() const {
        Kalman1D kf;
        kf.a = a;
        kf.q = 1.0;
        kf.r = s2 / (1.0 - s2);
        kf.mu = 0.0;
        kf.p = 1.0;  // matches the particle init from N(0, 1)
        return kf;
    }

    double effective_measurement(double x_obs) const { return alpha * x_obs / (1.0 - s2); }
};

struct FilterDemoRow {
    std::size_t t = 0;
    double true_z = 0.0;
    double pf_mean = 0.0, pf_var = 0.0;
    double kf_mean = 0.0, kf_var = 0.0;
    double ess = 0.0;
};

/// Run the full SIR filter and the matched Kalman filter side by side on a
/// fresh realization of the demo system.
inline std::vector<FilterDemoRow> run_filter_demo(const FilterDemoSystem& sys, std::size_t steps,
                                                  std::size_t num_particles, std::uint64_t seed) {
    VJepaModel model = sys.model();
    Kalman1D kf = sys.matched_kalman();

    Rng env_rng = substream(seed, 0x46454e56ULL);  // "FENV"
    Rng pf_rng = substream(seed, 0x504152ULL);     // "PAR"

    ParticleSet ps = pf_init(num_particles, 1, pf_rng);
    double z = env_rng.normal();

    std::vector<FilterDemoRow> rows;
    for (std::size_t t = 0; t < steps; ++t) {
        z = sys.a * z + env_rng.normal();
        const double x_obs = z + sys.obs_noise * env_rng.normal();
        const Vec x = {x_obs, 1.0};

        ps = pf_predict(ps, model, pf_rng);
        ps = pf_update(ps, model, x);
        ps = pf_resample(ps, pf_rng);

        kf.predict();
        kf.correct(sys.effective_measurement(x_obs));

        FilterDemoRow row;
        row.t = t;
        row.true_z = z;
        row.pf_mean = ps.mean()[0];
        row.pf_var = ps.variance()[0];
        row.kf_mean = kf.mu;
        row.kf_var = kf.p;
        row.ess = ps.ess();
        rows.push_back(row);
    }
    return rows;
}

inline void write_filter_demo_csv(const std::vector<FilterDemoRow>& rows, std::ostream& os) {
    os << "t,true_z,pf_mean,pf_var,kf_mean,kf_var,ess\n";
    os.precision(17);
    for (const auto& r : rows)
        os << r.t << "," << r.true_z << "," << r.pf_mean << "," << r.pf_var << "," << r.kf_mean
           << "," << r.kf_var << "," << r.ess << "\n";
}

}  // namespace lbl
