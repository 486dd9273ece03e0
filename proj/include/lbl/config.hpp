#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lbl/models.hpp"

namespace lbl {

/// Sweep configuration. Defaults reproduce the benchmark protocol:
/// seed 111, scales 0..8 in 9 equidistant steps, 6000/2000 train/test steps,
/// all five models.
struct RunConfig {
    std::uint64_t seed = 111;
    std::vector<double> scales = {0, 1, 2, 3, 4, 5, 6, 7, 8};
    std::size_t t_train = 6000;
    std::size_t t_test = 2000;
    std::vector<ModelKind> models = {ModelKind::Vae, ModelKind::Ar, ModelKind::Jepa,
                                     ModelKind::VJepa, ModelKind::BJepa};
    TrainConfig train;
    std::string out_dir = "out";
    std::string format = "csv";
    std::size_t workers = 0;  // 0 = hardware concurrency
    bool no_timing = false;

    void validate() const {
        check(!scales.empty(), "RunConfig: empty scale grid");
        check(scales.front() >= 0.0, "RunConfig: scales must be non-negative");
        for (std::size_t i = 1; i < scales.size(); ++i)
            check(scales[i] > scales[i - 1], "RunConfig: scales must be strictly increasing");
        check(!models.empty(), "RunConfig: empty model list");
        check(format == "csv" || format == "json", "RunConfig: format must be csv or json");
        check(t_train >= 2 && t_test >= 2, "RunConfig: trajectory lengths must be >= 2");
    }
};

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("invalid boolean: " + s);
}

/// Flat key-value config format: one `key = value` per line, `#` comments.
/// Recognized keys mirror RunConfig; unknown keys are rejected. CLI flags
/// override file values.
inline void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "scales") {
        cfg.scales.clear();
        for (const auto& s : split_list(value)) cfg.scales.push_back(std::stod(s));
    } else if (key == "t_train") cfg.t_train = std::stoull(value);
    else if (key == "t_test") cfg.t_test = std::stoull(value);
    else if (key == "models") {
        cfg.models.clear();
        for (const auto& s : split_list(value)) cfg.models.push_back(kind_from_name(s));
    } else if (key == "steps") cfg.train.steps = std::stoull(value);
    else if (key == "lr") cfg.train.lr = std::stod(value);
    else if (key == "ema_tau") cfg.train.ema_tau = std::stod(value);
    else if (key == "beta") cfg.train.beta = std::stod(value);
    else if (key == "gamma") cfg.train.gamma = std::stod(value);
    else if (key == "vicreg_inv") cfg.train.vicreg_inv = std::stod(value);
    else if (key == "vicreg_var") cfg.train.vicreg_var = std::stod(value);
    else if (key == "vicreg_cov") cfg.train.vicreg_cov = std::stod(value);
    else if (key == "out") cfg.out_dir = value;
    else if (key == "format") cfg.format = value;
    else if (key == "workers") cfg.workers = std::stoull(value);
    else if (key == "no_timing") cfg.no_timing = parse_bool(value);
    else throw std::invalid_argument("unknown config key: " + key);
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    check(static_cast<bool>(is), "cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                            ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        };
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

/// Seed resolution order: explicit --seed flag, config file, LBL_SEED
/// environment variable, default 111.
inline std::uint64_t seed_from_environment(std::uint64_t fallback) {
    if (const char* v = std::getenv("LBL_SEED")) return std::stoull(v);
    return fallback;
}

}  // namespace lbl
