#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "lbl/env.hpp"
#include "lbl/gaussian.hpp"
#include "lbl/models.hpp"
#include "lbl/optim.hpp"
#include "lbl/probe.hpp"

namespace lbl {

/// Action-conditioned probabilistic latent dynamics. The mean head reads the
/// concatenation [z; u]; the log-variance head reads only z, which makes the
/// predictive covariance action-independent by construction (the Theorem-3
/// regime). With a prior attached it doubles as the controlled BJEPA
/// dynamics expert.
struct ControlledDynamics {
    LinearMap enc;            // D_x -> D_z
    LinearMap pred_mu;        // (D_z + D_u) -> D_z
    LinearMap pred_logvar;    // D_z -> D_z
    LinearMap target_mu;      // D_x -> D_z, EMA of enc
    LinearMap target_logvar;  // D_x -> D_z, gradient-trained
    std::size_t action_dim = 0;
    double beta = 0.01;

    ControlledDynamics() = default;
    ControlledDynamics(std::size_t obs_dim, std::size_t latent_dim, std::size_t action_dim_,
                       std::uint64_t seed, double beta_ = 0.01)
        : action_dim(action_dim_), beta(beta_) {
        Rng rng = substream(seed, 0x4354524cULL);  // "CTRL"
        enc = LinearMap::random(latent_dim, obs_dim, rng);
        pred_mu = LinearMap::random(latent_dim, latent_dim + action_dim_, rng);
        pred_logvar = LinearMap(latent_dim, latent_dim);
        target_mu = enc;
        target_logvar = LinearMap(latent_dim, obs_dim);
    }

    std::size_t latent_dim() const { return enc.out_dim(); }

    std::vector<Matrix*> trainable() {
        return {&enc.w, &pred_mu.w, &pred_logvar.w, &target_logvar.w};
    }

    Vec mean_next(const Vec& z, const Vec& u) const {
        Vec zu(z.size() + u.size());
        std::copy(z.begin(), z.end(), zu.begin());
        std::copy(u.begin(), u.end(), zu.begin() + z.size());
        return pred_mu.forward(zu);
    }

    DiagGaussian predictive(const Vec& z, const Vec& u) const {
        return DiagGaussian(mean_next(z, u), pred_logvar.forward(z));
    }
};

/// VJEPA loss on (x_t, u_t, x_{t+1}) triples with the action-conditioned
/// predictor; mirrors the uncontrolled loss otherwise.
inline LossResult controlled_vjepa_loss_and_grad(ControlledDynamics& m, const Matrix& x_t,
                                                 const Matrix& u_t, const Matrix& x_next,
                                                 Rng& rng) {
    check(x_t.rows() == x_next.rows() && x_t.rows() == u_t.rows(),
          "controlled_vjepa_loss_and_grad: misaligned batch sizes");
    const std::size_t n = x_t.rows();
    const std::size_t dz = m.latent_dim();
    const double inv_n = 1.0 / static_cast<double>(n);

    Matrix z = m.enc.forward(x_t);
    Matrix zu(n, dz + m.action_dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dz; ++j) zu(i, j) = z(i, j);
        for (std::size_t j = 0; j < m.action_dim; ++j) zu(i, dz + j) = u_t(i, j);
    }

    Matrix pmu = m.pred_mu.forward(zu);
    Matrix plv_raw = m.pred_logvar.forward(z);
    Matrix plv, plv_mask;
    detail::clamp_with_mask(plv_raw, plv, plv_mask);
    Matrix tmu = m.target_mu.forward(x_next);
    Matrix tlv_raw = m.target_logvar.forward(x_next);
    Matrix tlv, tlv_mask;
    detail::clamp_with_mask(tlv_raw, tlv, tlv_mask);

    Matrix eps = detail::draw_normal(n, dz, rng);
    double nll = 0.0, kl = 0.0;
    Matrix dpmu(n, dz), dplv(n, dz), dtlv(n, dz);
    for (std::size_t i = 0; i < pmu.size(); ++i) {
        const double lt = tlv.data()[i];
        const double zt = tmu.data()[i] + std::exp(0.5 * lt) * eps.data()[i];
        const double lp = plv.data()[i];
        const double prec = std::exp(-lp);
        const double r = zt - pmu.data()[i];
        nll += 0.5 * (kLn2Pi + lp) + 0.5 * r * r * prec;
        dpmu.data()[i] = -r * prec * inv_n;
        dplv.data()[i] = plv_mask.data()[i] * 0.5 * (1.0 - r * r * prec) * inv_n;
        dtlv.data()[i] = tlv_mask.data()[i] *
                         (r * prec * inv_n * eps.data()[i] * 0.5 * std::exp(0.5 * lt) +
                          m.beta * inv_n * 0.5 * (std::exp(lt) - 1.0));
        kl += 0.5 * (tmu.data()[i] * tmu.data()[i] + std::exp(lt) - lt - 1.0);
    }
    nll *= inv_n;
    kl *= inv_n;

    // z receives gradient through the first dz columns of pred_mu and
    // through pred_logvar
    Matrix gz = matmul(dplv, m.pred_logvar.w);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dz; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < dz; ++k) s += dpmu(i, k) * m.pred_mu.w(k, j);
            gz(i, j) += s;
        }

    LossResult out;
    out.loss = nll + m.beta * kl;
    out.terms = {{"nll", nll}, {"kl", kl}};
    out.grads.push_back(matmul_tn(gz, x_t));
    out.grads.push_back(matmul_tn(dpmu, zu));
    out.grads.push_back(matmul_tn(dplv, z));
    out.grads.push_back(matmul_tn(dtlv, x_next));
    return out;
}

/// Full-batch training of the controlled dynamics on a controlled trajectory.
inline std::vector<LossRecord> train_controlled(ControlledDynamics& m, const Trajectory& traj,
                                                const TrainConfig& cfg) {
    check(traj.u.rows() + 1 == traj.length(), "train_controlled: trajectory has no actions");
    const std::size_t n = traj.length() - 1;
    Matrix x_t(n, kObsDim), x_next(n, kObsDim);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t i = 0; i < kObsDim; ++i) {
            x_t(t, i) = traj.x(t, i);
            x_next(t, i) = traj.x(t + 1, i);
        }
    std::vector<Matrix*> params = m.trainable();
    AdamState adam(params, cfg.lr);
    std::vector<LossRecord> curve;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        Rng rng = substream(cfg.seed, 0x535445ULL, step);
        LossResult r = controlled_vjepa_loss_and_grad(m, x_t, traj.u, x_next, rng);
        if (!std::isfinite(r.loss)) throw TrainAbort(step, r);
        adam_step(params, r.grads, adam);
        ema_update(m.target_mu.w, m.enc.w, cfg.ema_tau);
        curve.push_back({step, r.loss, std::move(r.terms)});
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

struct PlanConfig {
    std::size_t horizon = 5;
    std::size_t num_samples = 128;
    std::size_t action_dim = 2;
    double proposal_std = 1.0;
    double lambda = 0.01;  // control cost weight
    Vec z_goal;
    std::size_t opt_iterations = 200;
    double step_size = 0.05;

    void validate() const {
        check(horizon >= 1, "PlanConfig: horizon must be >= 1");
        check(num_samples >= 1, "PlanConfig: num_samples must be >= 1");
        check(lambda >= 0.0, "PlanConfig: lambda must be >= 0");
    }
};

/// Scalar energy over latent states with analytic gradient.
struct EnergyPrior {
    std::function<double(const Vec&)> energy;
    std::function<Vec(const Vec&)> grad;
};

inline EnergyPrior quadratic_energy(Vec z_star, double weight = 1.0) {
    EnergyPrior e;
    e.energy = [z_star, weight](const Vec& z) {
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double d = z[i] - z_star[i];
            s += d * d;
        }
        return weight * s;
    };
    e.grad = [z_star, weight](const Vec& z) {
        Vec g(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) g[i] = 2.0 * weight * (z[i] - z_star[i]);
        return g;
    };
    return e;
}

using ActionSequence = std::vector<Vec>;

/// Stochastic rollout cost of one candidate action sequence:
///   sum_k |z_{k+1} - z_goal|^2 + lambda |u_k|^2,  z_{k+1} ~ p(.|z_k, u_k)
inline double mpc_rollout_cost(const ControlledDynamics& m, const Vec& z0,
                               const ActionSequence& useq, const PlanConfig& cfg, Rng& rng) {
    Vec z = z0;
    double cost = 0.0;
    for (const Vec& u : useq) {
        z = sample(m.predictive(z, u), rng);
        double zc = 0.0, uc = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double d = z[i] - cfg.z_goal[i];
            zc += d * d;
        }
        for (double v : u) uc += v * v;
        cost += zc + cfg.lambda * uc;
    }
    return cost;
}

/// Evaluate explicit candidates; returns (costs, argmin). Ties go to the
/// lowest index. Each candidate rolls out on its own RNG substream.
inline std::pair<std::vector<double>, std::size_t> mpc_evaluate_candidates(
    const ControlledDynamics& m, const Vec& z0, const std::vector<ActionSequence>& candidates,
    const PlanConfig& cfg, std::uint64_t seed) {
    std::vector<double> costs(candidates.size());
    std::size_t best = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        Rng rng = substream(seed, 0x4d5043ULL, i);  // "MPC"
        costs[i] = mpc_rollout_cost(m, z0, candidates[i], cfg, rng);
        if (costs[i] < costs[best]) best = i;
    }
    return {costs, best};
}

/// Sampling-based latent MPC: draw M Gaussian action sequences, roll each
/// through the stochastic dynamics, return the first action of the cheapest.
inline Vec vjepa_mpc(const ControlledDynamics& m, const Vec& z0, const PlanConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<ActionSequence> candidates(cfg.num_samples);
    for (auto& seq : candidates) {
        seq.resize(cfg.horizon);
        for (auto& u : seq) {
            u.resize(cfg.action_dim);
            for (double& v : u) v = cfg.proposal_std * rng.normal();
        }
    }
    const std::uint64_t rollout_seed = rng.next_u64();
    auto [costs, best] = mpc_evaluate_candidates(m, z0, candidates, cfg, rollout_seed);
    return candidates[best].front();
}

struct GradientMpcResult {
    ActionSequence actions;
    double objective = 0.0;
    std::vector<double> accepted_objectives;  // best-so-far trace, non-increasing
    bool aborted = false;
};

namespace detail {

inline double gradient_mpc_objective(const ControlledDynamics& m, const Vec& z0,
                                     const ActionSequence& u, const EnergyPrior& prior,
                                     double lambda, std::vector<Vec>& zs) {
    zs.assign(1, z0);
    double j = 0.0;
    for (const Vec& uk : u) {
        zs.push_back(m.mean_next(zs.back(), uk));
        double uc = 0.0;
        for (double v : uk) uc += v * v;
        j += prior.energy(zs.back()) + lambda * uc;
    }
    return j;
}

}  // namespace detail

/// Gradient-based MPC on the deterministic mean rollout (the dynamics
/// expert), with a task energy at each predicted state. Backpropagates through
/// the linear mean dynamics; if the objective rises for 10 consecutive
/// iterations the step size is halved, and after 5 halvings the search stops.
inline GradientMpcResult bjepa_gradient_mpc(const ControlledDynamics& m, const Vec& z0,
                                            const EnergyPrior& prior, const PlanConfig& cfg,
                                            ActionSequence init = {}) {
    cfg.validate();
    const std::size_t dz = m.latent_dim();
    const std::size_t du = m.action_dim;
    ActionSequence u = init.empty() ? ActionSequence(cfg.horizon, Vec(du, 0.0)) : std::move(init);
    check(u.size() == cfg.horizon, "bjepa_gradient_mpc: init horizon mismatch");

    // split W_mu = [A | B]
    Matrix a(dz, dz), b(dz, du);
    for (std::size_t i = 0; i < dz; ++i) {
        for (std::size_t j = 0; j < dz; ++j) a(i, j) = m.pred_mu.w(i, j);
        for (std::size_t j = 0; j < du; ++j) b(i, j) = m.pred_mu.w(i, dz + j);
    }

    std::vector<Vec> zs;
    double j = detail::gradient_mpc_objective(m, z0, u, prior, cfg.lambda, zs);

    GradientMpcResult res;
    res.actions = u;
    res.objective = j;
    res.accepted_objectives.push_back(j);

    double alpha = cfg.step_size;
    double prev_j = j;
    int consecutive_increases = 0;
    int halvings = 0;

    for (std::size_t it = 0; it < cfg.opt_iterations; ++it) {
        // backward recursion: g_k = dE(z_k) + A^T g_{k+1}
        std::vector<Vec> g(cfg.horizon + 1, Vec(dz, 0.0));
        g[cfg.horizon] = prior.grad(zs[cfg.horizon]);
        for (std::size_t k = cfg.horizon; k-- > 1;) {
            g[k] = prior.grad(zs[k]);
            Vec back = matvec_t(a, g[k + 1]);
            for (std::size_t i = 0; i < dz; ++i) g[k][i] += back[i];
        }
        for (std::size_t k = 0; k < cfg.horizon; ++k) {
            Vec du_k = matvec_t(b, g[k + 1]);
            for (std::size_t i = 0; i < du; ++i)
                u[k][i] -= alpha * (du_k[i] + 2.0 * cfg.lambda * u[k][i]);
        }

        const double j_new = detail::gradient_mpc_objective(m, z0, u, prior, cfg.lambda, zs);
        if (j_new > prev_j) {
            if (++consecutive_increases >= 10) {
                alpha *= 0.5;
                consecutive_increases = 0;
                if (++halvings > 5) {
                    res.aborted = true;
                    break;
                }
            }
        } else {
            consecutive_increases = 0;
        }
        if (j_new < res.objective) {
            res.objective = j_new;
            res.actions = u;
            res.accepted_objectives.push_back(j_new);
        }
        prev_j = j_new;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Theorem-3 property check
// ---------------------------------------------------------------------------

struct MapCheckEntry {
    double expected_cost = 0.0;  // analytic E[c(Z,u)]
    double mean_cost = 0.0;      // c(mu(u), u)
    double mc_cost = 0.0;        // Monte-Carlo estimate (when requested)
};

struct MapCheckReport {
    std::vector<MapCheckEntry> entries;
    std::size_t argmin_expected = 0;
    std::size_t argmin_mean = 0;
    double diff_spread = 0.0;  // max - min of (expected - mean)
    bool consistent = false;   // same argmin and spread < 1e-9
};

/// For each candidate action compares the analytic expected quadratic cost
/// against the cost at the predictive mean. Under action-independent
/// covariance the two differ by the constant tr(Q Sigma) and share argmins.
inline MapCheckReport map_equals_sampling_check(const ControlledDynamics& m, const Vec& z_t,
                                                const std::vector<Vec>& candidates, const Matrix& q,
                                                const Vec& z_star, double lambda = 0.0,
                                                std::size_t m_mc = 0, std::uint64_t mc_seed = 0) {
    check(!candidates.empty(), "map_equals_sampling_check: no candidates");
    MapCheckReport rep;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const Vec& u = candidates[c];
        DiagGaussian pred = m.predictive(z_t, u);
        double uc = 0.0;
        for (double v : u) uc += v * v;
        MapCheckEntry e;
        e.expected_cost = expected_quadratic_cost(pred, q, z_star) + lambda * uc;
        Vec dm(pred.dim());
        for (std::size_t i = 0; i < dm.size(); ++i) dm[i] = pred.mean[i] - z_star[i];
        double quad = 0.0;
        for (std::size_t i = 0; i < dm.size(); ++i)
            for (std::size_t j = 0; j < dm.size(); ++j) quad += dm[i] * q(i, j) * dm[j];
        e.mean_cost = quad + lambda * uc;
        if (m_mc > 0) {
            Rng rng = substream(mc_seed, 0x4d43ULL, c);
            double acc = 0.0;
            for (std::size_t k = 0; k < m_mc; ++k) {
                Vec z = sample(pred, rng);
                double s = 0.0;
                for (std::size_t i = 0; i < z.size(); ++i)
                    for (std::size_t jj = 0; jj < z.size(); ++jj)
                        s += (z[i] - z_star[i]) * q(i, jj) * (z[jj] - z_star[jj]);
                acc += s + lambda * uc;
            }
            e.mc_cost = acc / static_cast<double>(m_mc);
        }
        const double diff = e.expected_cost - e.mean_cost;
        lo = std::min(lo, diff);
        hi = std::max(hi, diff);
        if (!rep.entries.empty() &&
            e.expected_cost < rep.entries[rep.argmin_expected].expected_cost)
            rep.argmin_expected = c;
        if (!rep.entries.empty() && e.mean_cost < rep.entries[rep.argmin_mean].mean_cost)
            rep.argmin_mean = c;
        rep.entries.push_back(e);
    }
    rep.diff_spread = hi - lo;
    rep.consistent = rep.argmin_expected == rep.argmin_mean && rep.diff_spread < 1e-9;
    return rep;
}

// ---------------------------------------------------------------------------
// Closed-loop demonstration
// ---------------------------------------------------------------------------

struct ClosedLoopResult {
    double mpc_mean_dist = 0.0;
    double baseline_mean_dist = 0.0;
    std::vector<Vec> decoded_signals;
};

/// Runs MPC (or the zero-action baseline) for `steps` steps on the controlled
/// environment from a fixed seed; both arms see identical disturbances. The
/// tracked quantity is the probe-decoded signal versus the goal.
inline ClosedLoopResult run_closed_loop(const EnvParams& env, double sigma,
                                        const ControlledDynamics& model, const LinearProbe& probe,
                                        const Vec& goal_signal, std::size_t steps,
                                        PlanConfig cfg, std::uint64_t seed, bool use_mpc) {
    // latent-space goal: invert the (intercept, weights) probe at the goal
    const std::size_t dz = model.latent_dim();
    Matrix w(probe.beta.rows() - 1, probe.beta.cols());
    for (std::size_t i = 1; i < probe.beta.rows(); ++i)
        for (std::size_t j = 0; j < probe.beta.cols(); ++j) w(i - 1, j) = probe.beta(i, j);
    Vec rhs(goal_signal.size());
    for (std::size_t j = 0; j < rhs.size(); ++j) rhs[j] = goal_signal[j] - probe.beta(0, j);
    cfg.z_goal = solve_linear(transpose(w), rhs);
    check(cfg.z_goal.size() == dz, "run_closed_loop: latent goal dimension mismatch");

    EnvStepper stepper(env, sigma, seed);
    Rng plan_rng = substream(seed, 0x504c414eULL);  // "PLAN"

    ClosedLoopResult res;
    double dist_sum = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        Vec x = stepper.observe();
        Vec z = model.enc.forward(x);
        Matrix zr(1, dz);
        for (std::size_t i = 0; i < dz; ++i) zr(0, i) = z[i];
        Matrix dec = probe.predict(zr);
        Vec decoded(dec.cols());
        for (std::size_t i = 0; i < dec.cols(); ++i) decoded[i] = dec(0, i);
        res.decoded_signals.push_back(decoded);
        double d2 = 0.0;
        for (std::size_t i = 0; i < decoded.size(); ++i) {
            const double d = decoded[i] - goal_signal[i];
            d2 += d * d;
        }
        dist_sum += std::sqrt(d2);

        Vec u(model.action_dim, 0.0);
        if (use_mpc) u = vjepa_mpc(model, z, cfg, plan_rng);
        stepper.advance(u);
    }
    const double mean_dist = dist_sum / static_cast<double>(steps);
    if (use_mpc)
        res.mpc_mean_dist = mean_dist;
    else
        res.baseline_mean_dist = mean_dist;
    return res;
}

}  // namespace lbl
