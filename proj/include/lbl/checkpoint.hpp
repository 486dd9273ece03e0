#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "lbl/control.hpp"
#include "lbl/models.hpp"

namespace lbl {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.storage()}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    return Matrix::from_data(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                             j.at("data").get<Vec>());
}

inline nlohmann::json config_to_json(const TrainConfig& c) {
    return {{"lr", c.lr},           {"steps", c.steps},
            {"ema_tau", c.ema_tau}, {"beta", c.beta},
            {"gamma", c.gamma},     {"vicreg", {c.vicreg_inv, c.vicreg_var, c.vicreg_cov}},
            {"seed", c.seed}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.lr = j.at("lr").get<double>();
    c.steps = j.at("steps").get<std::size_t>();
    c.ema_tau = j.at("ema_tau").get<double>();
    c.beta = j.at("beta").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.vicreg_inv = j.at("vicreg")[0].get<double>();
    c.vicreg_var = j.at("vicreg")[1].get<double>();
    c.vicreg_cov = j.at("vicreg")[2].get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

}  // namespace detail

/// Checkpoint container: a versioned JSON document with a model-kind tag,
/// named parameter tensors, the training config snapshot and the RNG seed.
inline nlohmann::json checkpoint_json(const Model& model, const TrainConfig& cfg) {
    nlohmann::json params;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, VaeModel>) {
                params["enc_mu"] = detail::matrix_to_json(m.enc_mu.w);
                params["enc_logvar"] = detail::matrix_to_json(m.enc_logvar.w);
                params["dec"] = detail::matrix_to_json(m.dec.w);
            } else if constexpr (std::is_same_v<T, ArModel>) {
                params["enc"] = detail::matrix_to_json(m.enc.w);
                params["pred"] = detail::matrix_to_json(m.pred.w);
            } else if constexpr (std::is_same_v<T, JepaModel>) {
                params["enc"] = detail::matrix_to_json(m.enc.w);
                params["pred"] = detail::matrix_to_json(m.pred.w);
                params["target_enc"] = detail::matrix_to_json(m.target_enc.w);
            } else if constexpr (std::is_same_v<T, VJepaModel>) {
                params["enc"] = detail::matrix_to_json(m.enc.w);
                params["pred_mu"] = detail::matrix_to_json(m.pred_mu.w);
                params["pred_logvar"] = detail::matrix_to_json(m.pred_logvar.w);
                params["target_mu"] = detail::matrix_to_json(m.target_mu.w);
                params["target_logvar"] = detail::matrix_to_json(m.target_logvar.w);
            } else {
                params["enc"] = detail::matrix_to_json(m.enc.w);
                params["pred_mu"] = detail::matrix_to_json(m.pred_mu.w);
                params["pred_logvar"] = detail::matrix_to_json(m.pred_logvar.w);
                params["target_mu"] = detail::matrix_to_json(m.target_mu.w);
                params["target_logvar"] = detail::matrix_to_json(m.target_logvar.w);
                params["prior_mu"] = detail::matrix_to_json(m.prior_mu);
                params["prior_logvar"] = detail::matrix_to_json(m.prior_logvar);
            }
        },
        model);
    return {{"format", "lbl-checkpoint"},
            {"version", kCheckpointVersion},
            {"kind", kind_name(model_kind(model))},
            {"seed", cfg.seed},
            {"config", detail::config_to_json(cfg)},
            {"params", params}};
}

inline nlohmann::json checkpoint_json(const ControlledDynamics& m, const TrainConfig& cfg) {
    nlohmann::json params;
    params["enc"] = detail::matrix_to_json(m.enc.w);
    params["pred_mu"] = detail::matrix_to_json(m.pred_mu.w);
    params["pred_logvar"] = detail::matrix_to_json(m.pred_logvar.w);
    params["target_mu"] = detail::matrix_to_json(m.target_mu.w);
    params["target_logvar"] = detail::matrix_to_json(m.target_logvar.w);
    return {{"format", "lbl-checkpoint"},
            {"version", kCheckpointVersion},
            {"kind", "vjepa_ctrl"},
            {"action_dim", m.action_dim},
            {"seed", cfg.seed},
            {"config", detail::config_to_json(cfg)},
            {"params", params}};
}

inline void save_checkpoint(const nlohmann::json& j, const std::string& path) {
    std::ofstream os(path);
    check(static_cast<bool>(os), "save_checkpoint: cannot open " + path);
    os << j.dump(2) << "\n";
}

inline nlohmann::json read_checkpoint(const std::string& path) {
    std::ifstream is(path);
    check(static_cast<bool>(is), "read_checkpoint: cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(is);
    check(j.at("format") == "lbl-checkpoint", "read_checkpoint: not a checkpoint file");
    check(j.at("version").get<int>() == kCheckpointVersion,
          "read_checkpoint: unsupported checkpoint version");
    return j;
}

inline Model load_model(const nlohmann::json& j, TrainConfig* cfg_out = nullptr) {
    const std::string kind = j.at("kind").get<std::string>();
    const auto& p = j.at("params");
    TrainConfig cfg = detail::config_from_json(j.at("config"));
    if (cfg_out) *cfg_out = cfg;
    auto mat = [&p](const char* name) { return detail::matrix_from_json(p.at(name)); };
    if (kind == "vae") {
        VaeModel m;
        m.enc_mu.w = mat("enc_mu");
        m.enc_logvar.w = mat("enc_logvar");
        m.dec.w = mat("dec");
        m.beta = cfg.beta;
        return m;
    }
    if (kind == "ar") {
        ArModel m;
        m.enc.w = mat("enc");
        m.pred.w = mat("pred");
        return m;
    }
    if (kind == "jepa") {
        JepaModel m;
        m.enc.w = mat("enc");
        m.pred.w = mat("pred");
        m.target_enc.w = mat("target_enc");
        m.coef_inv = cfg.vicreg_inv;
        m.coef_var = cfg.vicreg_var;
        m.coef_cov = cfg.vicreg_cov;
        return m;
    }
    if (kind == "vjepa") {
        VJepaModel m;
        m.enc.w = mat("enc");
        m.pred_mu.w = mat("pred_mu");
        m.pred_logvar.w = mat("pred_logvar");
        m.target_mu.w = mat("target_mu");
        m.target_logvar.w = mat("target_logvar");
        m.beta = cfg.beta;
        return m;
    }
    if (kind == "bjepa") {
        BJepaModel m;
        m.enc.w = mat("enc");
        m.pred_mu.w = mat("pred_mu");
        m.pred_logvar.w = mat("pred_logvar");
        m.target_mu.w = mat("target_mu");
        m.target_logvar.w = mat("target_logvar");
        m.prior_mu = mat("prior_mu");
        m.prior_logvar = mat("prior_logvar");
        m.beta = cfg.beta;
        m.gamma = cfg.gamma;
        return m;
    }
    throw std::invalid_argument("load_model: unsupported kind '" + kind + "'");
}

inline ControlledDynamics load_controlled(const nlohmann::json& j, TrainConfig* cfg_out = nullptr) {
    check(j.at("kind") == "vjepa_ctrl", "load_controlled: checkpoint is not an action-conditioned model");
    const auto& p = j.at("params");
    ControlledDynamics m;
    m.action_dim = j.at("action_dim").get<std::size_t>();
    m.enc.w = detail::matrix_from_json(p.at("enc"));
    m.pred_mu.w = detail::matrix_from_json(p.at("pred_mu"));
    m.pred_logvar.w = detail::matrix_from_json(p.at("pred_logvar"));
    m.target_mu.w = detail::matrix_from_json(p.at("target_mu"));
    m.target_logvar.w = detail::matrix_from_json(p.at("target_logvar"));
    TrainConfig cfg = detail::config_from_json(j.at("config"));
    m.beta = cfg.beta;
    if (cfg_out) *cfg_out = cfg;
    return m;
}

}  // namespace lbl
