#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lbl/config.hpp"
#include "lbl/env.hpp"
#include "lbl/optim.hpp"
#include "lbl/probe.hpp"

namespace lbl {

inline constexpr const char* kArtifactVersion = "1.0.0";

struct CellResult {
    double scale = 0.0;
    ModelKind kind = ModelKind::Vae;
    double snr_db = 0.0;  // dB-mean over the train and test trajectories
    ProbeReport report;
    std::string error;  // non-empty when training aborted

    bool ok() const { return error.empty(); }
};

struct SweepResult {
    RunConfig config;
    std::vector<CellResult> cells;  // scale-major, model-minor order
    std::vector<Model> models;      // aligned with cells (kept for reuse)
    double wall_seconds = 0.0;
};

namespace detail {

inline std::uint64_t fnv1a(const double* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const unsigned char* p = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n * sizeof(double); ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

}  // namespace detail

inline std::uint64_t train_data_seed(const RunConfig& cfg, std::size_t scale_idx) {
    return mix_seed(cfg.seed, 0x545241494eULL, scale_idx);  // "TRAIN"
}

inline std::uint64_t test_data_seed(const RunConfig& cfg, std::size_t scale_idx) {
    return mix_seed(cfg.seed, 0x54455354ULL, scale_idx);  // "TEST"
}

/// Reported SNR for one sweep scale: the mean in dB of the train- and
/// test-trajectory power ratios.
inline double sweep_snr_db(const EnvParams& env, const Trajectory& train_traj,
                           const Trajectory& test_traj, double sigma) {
    const double a = empirical_snr_db(train_traj, env, sigma);
    const double b = empirical_snr_db(test_traj, env, sigma);
    return 0.5 * (a + b);
}

/// Train and evaluate one (scale, model) cell. Each cell regenerates its
/// trajectories from scale-keyed seeds, so cells are independent and may run
/// on any worker.
inline CellResult run_cell(const RunConfig& cfg, const EnvParams& env, std::size_t scale_idx,
                           ModelKind kind, Model* model_out = nullptr) {
    const double sigma = cfg.scales[scale_idx];
    CellResult cell;
    cell.scale = sigma;
    cell.kind = kind;

    Trajectory traj_train = rollout(env, sigma, cfg.t_train, train_data_seed(cfg, scale_idx));
    Trajectory traj_test = rollout(env, sigma, cfg.t_test, test_data_seed(cfg, scale_idx));
    cell.snr_db = sweep_snr_db(env, traj_train, traj_test, sigma);

    TrainConfig tc = cfg.train;
    tc.seed = mix_seed(cfg.seed, scale_idx, static_cast<std::uint64_t>(kind));
    Model model = make_model(kind, kObsDim, kLatentDim, tc);

    const auto t0 = std::chrono::steady_clock::now();
    try {
        train(model, traj_train, tc);
    } catch (const TrainAbort& e) {
        cell.error = e.what();
        cell.report.kind = kind;
        cell.report.sigma = sigma;
        return cell;
    }
    const double train_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    cell.report = evaluate(model, traj_train, traj_test);
    cell.report.train_seconds = train_s;
    if (model_out) *model_out = std::move(model);
    return cell;
}

/// Full sweep over (scale, model) cells on a small worker pool. Results come
/// back in deterministic scale-major order regardless of scheduling.
inline SweepResult run_sweep(const RunConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const EnvParams env = make_env(cfg.seed);
    const std::size_t n_cells = cfg.scales.size() * cfg.models.size();

    SweepResult result;
    result.config = cfg;
    result.cells.resize(n_cells);
    result.models.resize(n_cells);

    std::size_t workers = cfg.workers == 0
                              ? std::max<std::size_t>(1, std::thread::hardware_concurrency())
                              : cfg.workers;
    workers = std::min(workers, n_cells);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= n_cells) return;
            const std::size_t scale_idx = idx / cfg.models.size();
            const ModelKind kind = cfg.models[idx % cfg.models.size()];
            result.cells[idx] = run_cell(cfg, env, scale_idx, kind, &result.models[idx]);
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

// ---------------------------------------------------------------------------
// Results CSV + manifest
// ---------------------------------------------------------------------------

inline constexpr const char* kResultsHeader =
    "scale,snr_db,model,signal_r2_train,signal_r2_test,noise_r2_train,noise_r2_test,train_s,eval_s";

namespace detail {

inline std::string fmt(double v, int precision = 6) {
    std::ostringstream os;
    os.precision(precision);
    if (std::isinf(v)) {
        os << (v > 0 ? "inf" : "-inf");
    } else {
        os << v;
    }
    return os.str();
}

}  // namespace detail

inline void write_results_csv(const SweepResult& res, std::ostream& os) {
    os << kResultsHeader << "\n";
    for (const auto& c : res.cells) {
        os << detail::fmt(c.scale) << "," << detail::fmt(c.snr_db, 3) << "," << kind_name(c.kind);
        if (c.ok() && !c.report.degenerate_latents) {
            os << "," << detail::fmt(c.report.signal_r2_train) << ","
               << detail::fmt(c.report.signal_r2_test);
            if (c.report.noise_r2_train)
                os << "," << detail::fmt(*c.report.noise_r2_train) << ","
                   << detail::fmt(*c.report.noise_r2_test);
            else
                os << ",,";
        } else {
            os << ",,,,";
        }
        if (res.config.no_timing)
            os << ",,";
        else
            os << "," << detail::fmt(c.report.train_seconds, 3) << ","
               << detail::fmt(c.report.eval_seconds, 3);
        os << "\n";
    }
}

/// Everything needed to reproduce the run: full config, per-cell outcomes,
/// data seeds, and checksums of the frozen mixing matrices.
inline nlohmann::json sweep_manifest(const SweepResult& res) {
    const RunConfig& cfg = res.config;
    const EnvParams env = make_env(cfg.seed);

    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : res.cells) {
        nlohmann::json jc = {{"scale", c.scale},
                             {"model", kind_name(c.kind)},
                             {"snr_db", std::isinf(c.snr_db) ? 1e9 : c.snr_db}};
        if (!c.ok()) {
            jc["error"] = c.error;
        } else if (c.report.degenerate_latents) {
            jc["error"] = "degenerate latents (zero variance)";
        } else {
            jc["signal_r2_train"] = c.report.signal_r2_train;
            jc["signal_r2_test"] = c.report.signal_r2_test;
            if (c.report.noise_r2_train) {
                jc["noise_r2_train"] = *c.report.noise_r2_train;
                jc["noise_r2_test"] = *c.report.noise_r2_test;
            }
            if (!cfg.no_timing) {
                jc["train_s"] = c.report.train_seconds;
                jc["eval_s"] = c.report.eval_seconds;
            }
        }
        cells.push_back(jc);
    }

    nlohmann::json scales = nlohmann::json::array();
    for (std::size_t i = 0; i < cfg.scales.size(); ++i)
        scales.push_back({{"scale", cfg.scales[i]},
                          {"train_seed", train_data_seed(cfg, i)},
                          {"test_seed", test_data_seed(cfg, i)}});

    std::vector<std::string> model_names;
    for (ModelKind k : cfg.models) model_names.push_back(kind_name(k));

    nlohmann::json j = {
        {"artifact_version", kArtifactVersion},
        {"config",
         {{"seed", cfg.seed},
          {"scales", cfg.scales},
          {"t_train", cfg.t_train},
          {"t_test", cfg.t_test},
          {"models", model_names},
          {"steps", cfg.train.steps},
          {"lr", cfg.train.lr},
          {"ema_tau", cfg.train.ema_tau},
          {"beta", cfg.train.beta},
          {"gamma", cfg.train.gamma},
          {"vicreg", {cfg.train.vicreg_inv, cfg.train.vicreg_var, cfg.train.vicreg_cov}},
          {"no_timing", cfg.no_timing}}},
        {"environment",
         {{"a_rot_fnv1a", detail::hex64(detail::fnv1a(env.a_rot.data(), env.a_rot.size()))},
          {"c_mix_fnv1a", detail::hex64(detail::fnv1a(env.c_mix.data(), env.c_mix.size()))},
          {"d_mix_fnv1a", detail::hex64(detail::fnv1a(env.d_mix.data(), env.d_mix.size()))},
          {"data_seeds", scales}}},
        {"cells", cells}};
    if (!cfg.no_timing) j["wall_seconds"] = res.wall_seconds;
    return j;
}

}  // namespace lbl
