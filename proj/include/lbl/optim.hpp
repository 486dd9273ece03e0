#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbl/env.hpp"
#include "lbl/models.hpp"

namespace lbl {

/// Adam with bias correction. One slot pair (m, v) per parameter tensor,
/// shapes fixed at construction.
struct AdamState {
    std::vector<Matrix> m, v;
    std::size_t t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(const std::vector<Matrix*>& params, double lr_) : lr(lr_) {
        for (const Matrix* p : params) {
            m.emplace_back(p->rows(), p->cols());
            v.emplace_back(p->rows(), p->cols());
        }
    }
};

inline void adam_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
                      AdamState& st) {
    check(params.size() == grads.size() && params.size() == st.m.size(),
          "adam_step: parameter/gradient count mismatch");
    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k];
        const Matrix& g = grads[k];
        check(p.same_shape(g), "adam_step: shape mismatch");
        double* md = st.m[k].data();
        double* vd = st.v[k].data();
        double* pd = p.data();
        const double* gd = g.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            md[i] = st.beta1 * md[i] + (1.0 - st.beta1) * gd[i];
            vd[i] = st.beta2 * vd[i] + (1.0 - st.beta2) * gd[i] * gd[i];
            const double mhat = md[i] / bc1;
            const double vhat = vd[i] / bc2;
            pd[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
        }
    }
}

struct LossRecord {
    std::size_t step = 0;
    double loss = 0.0;
    std::vector<std::pair<std::string, double>> terms;
};

/// Thrown when a training step produces a non-finite loss.
struct TrainAbort : std::runtime_error {
    std::size_t step;
    TrainAbort(std::size_t step_, const LossResult& r)
        : std::runtime_error(format(step_, r)), step(step_) {}

    static std::string format(std::size_t step, const LossResult& r) {
        std::ostringstream os;
        os << "training aborted at step " << step << ": loss=" << r.loss;
        for (const auto& [name, value] : r.terms) os << " " << name << "=" << value;
        return os.str();
    }
};

/// Full-batch training over a trajectory. The VAE trains on every x_t; the
/// predictive models train on all (x_t, x_{t+1}) pairs. EMA targets are
/// updated after each optimizer step. Per-step RNG substreams are keyed by
/// (cfg.seed, step) so stochastic losses replay deterministically.
inline std::vector<LossRecord> train(Model& model, const Trajectory& traj, const TrainConfig& cfg) {
    check(traj.length() >= 2, "train: trajectory too short");
    const std::size_t t_total = traj.length();
    const std::size_t n_pairs = t_total - 1;
    const bool is_vae = model_kind(model) == ModelKind::Vae;

    Matrix x_t(is_vae ? t_total : n_pairs, kObsDim);
    Matrix x_next(is_vae ? 0 : n_pairs, is_vae ? 0 : kObsDim);
    for (std::size_t t = 0; t < x_t.rows(); ++t)
        for (std::size_t i = 0; i < kObsDim; ++i) x_t(t, i) = traj.x(t, i);
    for (std::size_t t = 0; t < x_next.rows(); ++t)
        for (std::size_t i = 0; i < kObsDim; ++i) x_next(t, i) = traj.x(t + 1, i);

    std::vector<Matrix*> params = trainable(model);
    AdamState adam(params, cfg.lr);
    std::vector<LossRecord> curve;
    curve.reserve(cfg.steps);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        Rng rng = substream(cfg.seed, 0x535445ULL, step);  // "STE"
        LossResult r = std::visit(
            [&](auto& m) -> LossResult {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, VaeModel>) {
                    return vae_loss_and_grad(m, x_t, rng);
                } else if constexpr (std::is_same_v<T, ArModel>) {
                    return ar_loss_and_grad(m, x_t, x_next);
                } else if constexpr (std::is_same_v<T, JepaModel>) {
                    return jepa_loss_and_grad(m, x_t, x_next);
                } else if constexpr (std::is_same_v<T, VJepaModel>) {
                    return vjepa_loss_and_grad(m, x_t, x_next, rng);
                } else {
                    return bjepa_loss_and_grad(m, x_t, x_next, rng);
                }
            },
            model);
        if (!std::isfinite(r.loss)) throw TrainAbort(step, r);
        adam_step(params, r.grads, adam);
        std::visit(
            [&](auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, JepaModel> || std::is_same_v<T, VJepaModel> ||
                              std::is_same_v<T, BJepaModel>)
                    apply_ema(m, cfg.ema_tau);
            },
            model);
        curve.push_back({step, r.loss, std::move(r.terms)});
    }
    return curve;
}

inline void write_loss_curve_csv(const std::vector<LossRecord>& curve, std::ostream& os) {
    os << "step,loss";
    if (!curve.empty())
        for (const auto& [name, _] : curve.front().terms) os << "," << name;
    os << "\n";
    os.precision(17);
    for (const auto& rec : curve) {
        os << rec.step << "," << rec.loss;
        for (const auto& [_, value] : rec.terms) os << "," << value;
        os << "\n";
    }
}

}  // namespace lbl
