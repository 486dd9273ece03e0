// lbl: latent belief lab command-line driver.
//
// Subcommands: generate, train, sweep, plot, plan, filter-demo, report.
// Precedence for settings: CLI flag > config file > LBL_SEED env var > default.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lbl/checkpoint.hpp"
#include "lbl/config.hpp"
#include "lbl/control.hpp"
#include "lbl/filter.hpp"
#include "lbl/plot.hpp"
#include "lbl/sweep.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

lbl::RunConfig resolve_config(const CommonOpts& opts) {
    lbl::RunConfig cfg;
    if (!opts.config_path.empty()) cfg = lbl::load_config_file(opts.config_path);
    if (opts.seed_set)
        cfg.seed = opts.seed;
    else if (opts.config_path.empty())
        cfg.seed = lbl::seed_from_environment(cfg.seed);
    cfg.train.seed = cfg.seed;
    return cfg;
}

int cmd_generate(std::uint64_t seed, double sigma, std::size_t steps, const std::string& out,
                 const std::string& format, bool controlled, std::size_t action_dim) {
    lbl::EnvParams env = lbl::make_env(seed, controlled, action_dim);
    lbl::Policy policy = nullptr;
    lbl::Rng policy_rng = lbl::substream(seed, 0x504f4cULL);
    if (controlled)
        policy = [&policy_rng, action_dim](std::size_t, const lbl::Vec&) {
            lbl::Vec u(action_dim);
            for (double& v : u) v = policy_rng.normal();
            return u;
        };
    lbl::Trajectory traj = lbl::rollout(env, sigma, steps, lbl::mix_seed(seed, 0x47454eULL), policy);
    std::ofstream os(out, format == "csv" ? std::ios::out : std::ios::binary);
    if (!os) {
        std::cerr << "error: cannot open --out path: " << out << "\n";
        return 1;
    }
    if (format == "csv")
        lbl::write_trajectory_csv(traj, os);
    else
        lbl::write_trajectory_binary(traj, os);
    std::cout << "wrote " << steps << " steps (sigma=" << sigma << ") to " << out << "\n";
    return 0;
}

int cmd_train(const lbl::RunConfig& cfg, const std::string& model_name, double sigma,
              const std::string& out, const std::string& losses_path, bool controlled) {
    lbl::TrainConfig tc = cfg.train;
    std::vector<lbl::LossRecord> curve;
    json ckpt;
    if (controlled) {
        if (model_name != "vjepa")
            throw std::invalid_argument("--controlled training supports the vjepa dynamics model");
        lbl::EnvParams env = lbl::make_env(cfg.seed, true, 2);
        lbl::Rng policy_rng = lbl::substream(cfg.seed, 0x504f4cULL);
        lbl::Policy policy = [&policy_rng](std::size_t, const lbl::Vec&) {
            lbl::Vec u(2);
            for (double& v : u) v = policy_rng.normal();
            return u;
        };
        lbl::Trajectory traj =
            lbl::rollout(env, sigma, cfg.t_train, lbl::mix_seed(cfg.seed, 0x545241494eULL), policy);
        lbl::ControlledDynamics model(lbl::kObsDim, lbl::kLatentDim, 2, tc.seed, tc.beta);
        curve = lbl::train_controlled(model, traj, tc);
        ckpt = lbl::checkpoint_json(model, tc);
    } else {
        lbl::EnvParams env = lbl::make_env(cfg.seed);
        lbl::Trajectory traj =
            lbl::rollout(env, sigma, cfg.t_train, lbl::mix_seed(cfg.seed, 0x545241494eULL));
        lbl::Model model = lbl::make_model(lbl::kind_from_name(model_name), lbl::kObsDim,
                                           lbl::kLatentDim, tc);
        curve = lbl::train(model, traj, tc);
        ckpt = lbl::checkpoint_json(model, tc);
    }
    lbl::save_checkpoint(ckpt, out);
    if (!losses_path.empty()) {
        std::ofstream os(losses_path);
        lbl::write_loss_curve_csv(curve, os);
    }
    std::cout << "trained " << model_name << " (sigma=" << sigma << ", " << tc.steps
              << " steps), final loss " << curve.back().loss << ", checkpoint " << out << "\n";
    return 0;
}

int cmd_sweep(const lbl::RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    lbl::SweepResult res = lbl::run_sweep(cfg);

    const std::string csv_path = cfg.out_dir + "/results.csv";
    {
        std::ofstream os(csv_path);
        lbl::write_results_csv(res, os);
    }
    {
        std::ofstream os(cfg.out_dir + "/manifest.json");
        os << lbl::sweep_manifest(res).dump(2) << "\n";
    }
    if (cfg.format == "json") {
        std::ifstream is(csv_path);
        auto rows = lbl::parse_results_csv(is);
        json arr = json::array();
        for (const auto& r : rows) {
            json jr = {{"scale", r.scale},
                       {"snr_db", std::isinf(r.snr_db) ? 1e9 : r.snr_db},
                       {"model", r.model}};
            if (r.signal_r2_train) jr["signal_r2_train"] = *r.signal_r2_train;
            if (r.signal_r2_test) jr["signal_r2_test"] = *r.signal_r2_test;
            if (r.noise_r2_train) jr["noise_r2_train"] = *r.noise_r2_train;
            if (r.noise_r2_test) jr["noise_r2_test"] = *r.noise_r2_test;
            arr.push_back(jr);
        }
        std::ofstream os(cfg.out_dir + "/results.json");
        os << arr.dump(2) << "\n";
    }
    std::size_t failed = 0;
    for (const auto& c : res.cells)
        if (!c.ok()) ++failed;
    std::cout << "sweep complete: " << res.cells.size() << " cells, " << failed << " aborted, "
              << "results in " << csv_path << "\n";
    return 0;
}

int cmd_plot(const std::string& in, const std::string& out_dir) {
    std::ifstream is(in);
    if (!is) {
        std::cerr << "error: cannot open results csv: " << in << "\n";
        return 1;
    }
    auto rows = lbl::parse_results_csv(is);
    if (rows.empty()) {
        std::cerr << "error: results csv has no data rows, nothing to plot\n";
        return 1;
    }
    fs::create_directories(out_dir);
    auto files = lbl::write_plots(rows, out_dir);
    for (const auto& f : files) std::cout << "wrote " << f << "\n";
    return 0;
}

int cmd_plan(const std::string& checkpoint_path, std::uint64_t seed, const std::string& method,
             std::vector<double> goal, std::size_t horizon, std::size_t samples, double lambda,
             std::size_t iterations, double step_size, const std::string& out) {
    json ckpt = lbl::read_checkpoint(checkpoint_path);
    lbl::ControlledDynamics model = lbl::load_controlled(ckpt);
    const std::size_t dz = model.latent_dim();
    if (goal.empty()) goal.assign(dz, 0.0);
    if (goal.size() != dz)
        throw std::invalid_argument("--goal needs " + std::to_string(dz) + " values");

    lbl::PlanConfig cfg;
    cfg.horizon = horizon;
    cfg.num_samples = samples;
    cfg.action_dim = model.action_dim;
    cfg.lambda = lambda;
    cfg.z_goal = goal;
    cfg.opt_iterations = iterations;
    cfg.step_size = step_size;

    lbl::Vec z0(dz, 0.0);
    lbl::ActionSequence actions;
    double realized_cost = 0.0;
    if (method == "sampling") {
        lbl::Rng rng = lbl::substream(seed, 0x504c414eULL);
        std::vector<lbl::ActionSequence> candidates(cfg.num_samples);
        for (auto& seq : candidates) {
            seq.resize(cfg.horizon);
            for (auto& u : seq) {
                u.resize(cfg.action_dim);
                for (double& v : u) v = cfg.proposal_std * rng.normal();
            }
        }
        auto [costs, best] = lbl::mpc_evaluate_candidates(model, z0, candidates, cfg, rng.next_u64());
        actions = candidates[best];
        realized_cost = costs[best];
    } else if (method == "gradient") {
        auto res = lbl::bjepa_gradient_mpc(model, z0, lbl::quadratic_energy(goal), cfg);
        actions = res.actions;
        realized_cost = res.objective;
    } else {
        throw std::invalid_argument("--method must be sampling or gradient");
    }

    // deterministic mean rollout of the chosen sequence for the record
    json traj = json::array();
    lbl::Vec z = z0;
    for (const auto& u : actions) {
        z = model.mean_next(z, u);
        traj.push_back(z);
    }
    json rec = {{"goal", goal},
                {"method", method},
                {"seed", seed},
                {"actions", actions},
                {"predicted_latents", traj},
                {"realized_cost", realized_cost}};
    std::ofstream os(out);
    if (!os) {
        std::cerr << "error: cannot open --out path: " << out << "\n";
        return 1;
    }
    os << rec.dump(2) << "\n";
    std::cout << "plan written to " << out << " (cost " << realized_cost << ")\n";
    return 0;
}

int cmd_filter_demo(std::uint64_t seed, std::size_t steps, std::size_t particles,
                    const std::string& out) {
    lbl::FilterDemoSystem sys;
    auto rows = lbl::run_filter_demo(sys, steps, particles, seed);
    std::ofstream os(out);
    if (!os) {
        std::cerr << "error: cannot open --out path: " << out << "\n";
        return 1;
    }
    lbl::write_filter_demo_csv(rows, os);
    double mad = 0.0;
    for (const auto& r : rows) mad += std::abs(r.pf_mean - r.kf_mean);
    mad /= static_cast<double>(rows.size());
    std::cout << "filter demo: " << steps << " steps, " << particles
              << " particles, mean |pf - kf| = " << mad << ", csv " << out << "\n";
    return 0;
}

int cmd_report(const std::string& in) {
    std::ifstream is(in);
    if (!is) {
        std::cerr << "error: cannot open results csv: " << in << "\n";
        return 1;
    }
    auto rows = lbl::parse_results_csv(is);
    if (rows.empty()) {
        std::cerr << "error: no data rows\n";
        return 1;
    }
    std::cout << std::left << std::setw(8) << "scale" << std::setw(10) << "snr_db" << std::setw(8)
              << "model" << std::setw(22) << "signal r2 (tr/te)" << std::setw(22)
              << "noise r2 (tr/te)" << "\n";
    auto cell = [](const std::optional<double>& a, const std::optional<double>& b) {
        std::ostringstream os;
        os.precision(3);
        os << std::fixed;
        if (a)
            os << *a << " / ";
        else
            os << "NA / ";
        if (b)
            os << *b;
        else
            os << "NA";
        return os.str();
    };
    double last_scale = -1.0;
    for (const auto& r : rows) {
        if (r.scale != last_scale && last_scale >= 0.0) std::cout << "\n";
        last_scale = r.scale;
        std::ostringstream snr;
        snr.precision(3);
        if (std::isinf(r.snr_db))
            snr << "inf";
        else
            snr << r.snr_db;
        std::cout << std::left << std::setw(8) << r.scale << std::setw(10) << snr.str()
                  << std::setw(8) << r.model << std::setw(22)
                  << cell(r.signal_r2_train, r.signal_r2_test) << std::setw(22)
                  << cell(r.noise_r2_train, r.noise_r2_test) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent belief lab: noisy-TV benchmark, latent planners, particle filter"};
    app.require_subcommand(1);

    CommonOpts common;

    // generate
    auto* gen = app.add_subcommand("generate", "generate a trajectory and export it");
    double gen_sigma = 1.0;
    std::size_t gen_steps = 6000;
    std::string gen_out = "trajectory.csv", gen_format = "csv";
    bool gen_controlled = false;
    std::size_t gen_action_dim = 2;
    std::uint64_t gen_seed = lbl::seed_from_environment(111);
    gen->add_option("--seed", gen_seed, "environment + rollout seed");
    gen->add_option("--sigma", gen_sigma, "distractor scale");
    gen->add_option("--steps", gen_steps, "trajectory length");
    gen->add_option("--out", gen_out, "output path");
    gen->add_option("--format", gen_format, "csv|bin")->check(CLI::IsMember({"csv", "bin"}));
    gen->add_flag("--controlled", gen_controlled, "include random control inputs");
    gen->add_option("--action-dim", gen_action_dim, "control dimension");

    // train
    auto* tr = app.add_subcommand("train", "train one model and save a checkpoint");
    std::string tr_model = "vjepa", tr_out = "model.json", tr_losses;
    double tr_sigma = 0.0;
    bool tr_controlled = false;
    tr->add_option("--config", common.config_path, "config file");
    auto* tr_seed_opt = tr->add_option("--seed", common.seed, "master seed");
    tr->add_option("--model", tr_model, "vae|ar|jepa|vjepa|bjepa");
    tr->add_option("--sigma", tr_sigma, "distractor scale");
    tr->add_option("--out", tr_out, "checkpoint path");
    tr->add_option("--losses", tr_losses, "loss curve csv path");
    tr->add_flag("--controlled", tr_controlled, "train the action-conditioned dynamics");

    // sweep
    auto* sw = app.add_subcommand("sweep", "run the full scale x model benchmark");
    std::string sw_scales, sw_models, sw_out, sw_format;
    std::size_t sw_workers = 0;
    bool sw_no_timing = false;
    sw->add_option("--config", common.config_path, "config file");
    auto* sw_seed_opt = sw->add_option("--seed", common.seed, "master seed");
    sw->add_option("--scales", sw_scales, "comma-separated scale list");
    sw->add_option("--models", sw_models, "comma-separated model list");
    sw->add_option("--out", sw_out, "output directory");
    sw->add_option("--format", sw_format, "csv|json");
    sw->add_option("--workers", sw_workers, "worker pool width (0 = auto)");
    sw->add_flag("--no-timing", sw_no_timing, "omit wall-time columns for byte-stable output");

    // plot
    auto* pl = app.add_subcommand("plot", "render SVG panels from a results csv");
    std::string pl_in = "out/results.csv", pl_out = "out";
    pl->add_option("--in", pl_in, "results csv");
    pl->add_option("--out", pl_out, "output directory");

    // plan
    auto* pn = app.add_subcommand("plan", "one-shot latent MPC from a checkpoint");
    std::string pn_ckpt, pn_method = "sampling", pn_out = "plan.json";
    std::vector<double> pn_goal;
    std::size_t pn_horizon = 5, pn_samples = 128, pn_iters = 200;
    double pn_lambda = 0.01, pn_step = 0.05;
    std::uint64_t pn_seed = lbl::seed_from_environment(111);
    pn->add_option("--checkpoint", pn_ckpt, "action-conditioned checkpoint")->required();
    pn->add_option("--seed", pn_seed, "planner seed");
    pn->add_option("--method", pn_method, "sampling|gradient");
    pn->add_option("--goal", pn_goal, "goal latent (D_z values)");
    pn->add_option("--horizon", pn_horizon, "planning horizon");
    pn->add_option("--samples", pn_samples, "candidate count (sampling)");
    pn->add_option("--lambda", pn_lambda, "control cost weight");
    pn->add_option("--iterations", pn_iters, "gradient iterations");
    pn->add_option("--step-size", pn_step, "gradient step size");
    pn->add_option("--out", pn_out, "output json path");

    // filter-demo
    auto* fd = app.add_subcommand("filter-demo", "SIR particle filter vs Kalman reference");
    std::size_t fd_steps = 100, fd_particles = 10000;
    std::string fd_out = "filter_demo.csv";
    std::uint64_t fd_seed = lbl::seed_from_environment(111);
    fd->add_option("--seed", fd_seed, "demo seed");
    fd->add_option("--steps", fd_steps, "filter steps");
    fd->add_option("--particles", fd_particles, "particle count");
    fd->add_option("--out", fd_out, "output csv path");

    // report
    auto* rp = app.add_subcommand("report", "print a results table");
    std::string rp_in = "out/results.csv";
    rp->add_option("--in", rp_in, "results csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_generate(gen_seed, gen_sigma, gen_steps, gen_out, gen_format, gen_controlled,
                                gen_action_dim);
        if (tr->parsed()) {
            common.seed_set = tr_seed_opt->count() > 0;
            return cmd_train(resolve_config(common), tr_model, tr_sigma, tr_out, tr_losses,
                             tr_controlled);
        }
        if (sw->parsed()) {
            common.seed_set = sw_seed_opt->count() > 0;
            lbl::RunConfig cfg = resolve_config(common);
            if (!sw_scales.empty()) {
                cfg.scales.clear();
                for (const auto& s : lbl::split_list(sw_scales)) cfg.scales.push_back(std::stod(s));
            }
            if (!sw_models.empty()) {
                cfg.models.clear();
                for (const auto& s : lbl::split_list(sw_models))
                    cfg.models.push_back(lbl::kind_from_name(s));
            }
            if (!sw_out.empty()) cfg.out_dir = sw_out;
            if (!sw_format.empty()) cfg.format = sw_format;
            if (sw_workers != 0) cfg.workers = sw_workers;
            if (sw_no_timing) cfg.no_timing = true;
            return cmd_sweep(cfg);
        }
        if (pl->parsed()) return cmd_plot(pl_in, pl_out);
        if (pn->parsed())
            return cmd_plan(pn_ckpt, pn_seed, pn_method, pn_goal, pn_horizon, pn_samples, pn_lambda,
                            pn_iters, pn_step, pn_out);
        if (fd->parsed()) return cmd_filter_demo(fd_seed, fd_steps, fd_particles, fd_out);
        if (rp->parsed()) return cmd_report(rp_in);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
