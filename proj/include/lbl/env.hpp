#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "lbl/linalg.hpp"
#include "lbl/rng.hpp"

namespace lbl {

inline constexpr std::size_t kObsDim = 20;
inline constexpr std::size_t kSignalDim = 4;
inline constexpr std::size_t kDistractorDim = 4;

inline constexpr double kSignalNoiseStd = 0.1;
inline constexpr double kDistractorDecay = 0.9;
inline constexpr double kDistractorNoiseStd = 0.3;
inline constexpr double kSensorNoiseStd = 0.01;

/// Frozen mixing system for the noisy-TV benchmark. A_rot is orthogonal
/// (QR of a Gaussian draw, R diagonal forced positive), C and D_mix have
/// unit-norm columns. B_ctrl is zero unless constructed controlled.
struct EnvParams {
    Matrix a_rot;   // D_s x D_s
    Matrix c_mix;   // D_x x D_s
    Matrix d_mix;   // D_x x D_d
    Matrix b_ctrl;  // D_s x D_u (zero columns when uncontrolled)
    std::size_t action_dim = 0;
    std::uint64_t seed = 0;
};

/// Generated (x, s, d) sequences plus optional actions; regenerating with
/// the same (env, sigma, T, seed) reproduces the data bit-exactly.
struct Trajectory {
    Matrix x;  // T x D_x
    Matrix s;  // T x D_s
    Matrix d;  // T x D_d
    Matrix u;  // (T-1) x D_u, empty when uncontrolled
    double sigma = 0.0;
    std::uint64_t seed = 0;

    std::size_t length() const { return x.rows(); }
};

namespace detail {

inline Matrix random_unit_column_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.normal();
    for (std::size_t j = 0; j < cols; ++j) {
        double n = 0.0;
        for (std::size_t i = 0; i < rows; ++i) n += m(i, j) * m(i, j);
        n = std::sqrt(n);
        for (std::size_t i = 0; i < rows; ++i) m(i, j) /= n;
    }
    return m;
}

}  // namespace detail

inline EnvParams make_env(std::uint64_t seed, bool controlled = false, std::size_t action_dim = 2) {
    check(!controlled || action_dim >= 1, "make_env: action_dim must be >= 1 when controlled");
    EnvParams env;
    env.seed = seed;
    Rng rng = substream(seed, 0x454e56ULL);  // "ENV"
    Matrix g(kSignalDim, kSignalDim);
    for (std::size_t i = 0; i < kSignalDim; ++i)
        for (std::size_t j = 0; j < kSignalDim; ++j) g(i, j) = rng.normal();
    Matrix r;
    qr_square(g, env.a_rot, r);
    env.c_mix = detail::random_unit_column_matrix(kObsDim, kSignalDim, rng);
    env.d_mix = detail::random_unit_column_matrix(kObsDim, kDistractorDim, rng);
    if (controlled) {
        env.action_dim = action_dim;
        env.b_ctrl = detail::random_unit_column_matrix(kSignalDim, action_dim, rng);
    } else {
        env.b_ctrl = Matrix(kSignalDim, 0);
    }
    return env;
}

using Policy = std::function<Vec(std::size_t step, const Vec& obs)>;

/// Roll the system forward for T steps:
///   s_{t+1} = A_rot s_t (+ B_ctrl u_t) + w_t,  w ~ N(0, 0.1^2 I)
///   d_{t+1} = 0.9 d_t + v_t,                   v ~ N(0, 0.3^2 I)
///   x_t     = C s_t + D (sigma d_t) + eps_t,   eps ~ N(0, 0.01^2 I)
/// s_0, d_0 ~ N(0, I). The policy (when given) supplies u_t from x_t.
inline Trajectory rollout(const EnvParams& env, double sigma, std::size_t t_total,
                          std::uint64_t seed, const Policy& policy = nullptr) {
    check(sigma >= 0.0, "rollout: sigma must be >= 0");
    check(t_total >= 2, "rollout: T must be >= 2");
    const bool controlled = env.action_dim > 0 && policy != nullptr;

    Trajectory traj;
    traj.sigma = sigma;
    traj.seed = seed;
    traj.x = Matrix(t_total, kObsDim);
    traj.s = Matrix(t_total, kSignalDim);
    traj.d = Matrix(t_total, kDistractorDim);
    traj.u = controlled ? Matrix(t_total - 1, env.action_dim) : Matrix(0, 0);

    Rng rng = substream(seed, 0x524f4cULL);  // "ROL"

    Vec s(kSignalDim), d(kDistractorDim);
    for (auto& v : s) v = rng.normal();
    for (auto& v : d) v = rng.normal();

    Vec x(kObsDim);
    for (std::size_t t = 0; t < t_total; ++t) {
        for (std::size_t i = 0; i < kSignalDim; ++i) traj.s(t, i) = s[i];
        for (std::size_t i = 0; i < kDistractorDim; ++i) traj.d(t, i) = d[i];
        for (std::size_t i = 0; i < kObsDim; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < kSignalDim; ++j) v += env.c_mix(i, j) * s[j];
            for (std::size_t j = 0; j < kDistractorDim; ++j) v += env.d_mix(i, j) * sigma * d[j];
            x[i] = v + kSensorNoiseStd * rng.normal();
            traj.x(t, i) = x[i];
        }
        if (t + 1 == t_total) break;

        Vec s_next = matvec(env.a_rot, s);
        if (controlled) {
            Vec u = policy(t, x);
            check(u.size() == env.action_dim, "rollout: policy action dimension mismatch");
            for (std::size_t i = 0; i < env.action_dim; ++i) traj.u(t, i) = u[i];
            Vec bu = matvec(env.b_ctrl, u);
            for (std::size_t i = 0; i < kSignalDim; ++i) s_next[i] += bu[i];
        }
        for (std::size_t i = 0; i < kSignalDim; ++i) s[i] = s_next[i] + kSignalNoiseStd * rng.normal();
        for (std::size_t i = 0; i < kDistractorDim; ++i)
            d[i] = kDistractorDecay * d[i] + kDistractorNoiseStd * rng.normal();
    }
    return traj;
}

/// Trajectory-averaged power ratio in dB:
///   10 log10( mean_t |C s_t|^2 / mean_t |x_t - C s_t|^2 )
/// The denominator is the distractor-plus-sensor component. Returns +inf
/// when sigma = 0.
inline double empirical_snr_db(const Trajectory& traj, const EnvParams& env, double sigma) {
    if (sigma == 0.0) return std::numeric_limits<double>::infinity();
    double sig_pow = 0.0, noise_pow = 0.0;
    const std::size_t t_total = traj.length();
    for (std::size_t t = 0; t < t_total; ++t) {
        for (std::size_t i = 0; i < kObsDim; ++i) {
            double cs = 0.0;
            for (std::size_t j = 0; j < kSignalDim; ++j) cs += env.c_mix(i, j) * traj.s(t, j);
            const double n = traj.x(t, i) - cs;
            sig_pow += cs * cs;
            noise_pow += n * n;
        }
    }
    return 10.0 * std::log10(sig_pow / noise_pow);
}

/// Interactive stepper for closed-loop control. Consumes noise in the same
/// order as rollout (observation noise, then signal noise, then distractor
/// noise), so two runs from the same seed see identical disturbances
/// regardless of the actions applied.
struct EnvStepper {
    const EnvParams* env = nullptr;
    double sigma = 0.0;
    Vec s, d;
    Rng rng;

    EnvStepper(const EnvParams& e, double sigma_, std::uint64_t seed)
        : env(&e), sigma(sigma_), s(kSignalDim), d(kDistractorDim), rng(substream(seed, 0x524f4cULL)) {
        for (auto& v : s) v = rng.normal();
        for (auto& v : d) v = rng.normal();
    }

    Vec observe() {
        Vec x(kObsDim);
        for (std::size_t i = 0; i < kObsDim; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < kSignalDim; ++j) v += env->c_mix(i, j) * s[j];
            for (std::size_t j = 0; j < kDistractorDim; ++j) v += env->d_mix(i, j) * sigma * d[j];
            x[i] = v + kSensorNoiseStd * rng.normal();
        }
        return x;
    }

    void advance(const Vec& u) {
        Vec s_next = matvec(env->a_rot, s);
        if (!u.empty()) {
            check(u.size() == env->action_dim, "EnvStepper::advance: action dimension mismatch");
            Vec bu = matvec(env->b_ctrl, u);
            for (std::size_t i = 0; i < kSignalDim; ++i) s_next[i] += bu[i];
        }
        for (std::size_t i = 0; i < kSignalDim; ++i) s[i] = s_next[i] + kSignalNoiseStd * rng.normal();
        for (std::size_t i = 0; i < kDistractorDim; ++i)
            d[i] = kDistractorDecay * d[i] + kDistractorNoiseStd * rng.normal();
    }
};

// ---- export ----------------------------------------------------------------

inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    os << "t";
    for (std::size_t i = 0; i < kObsDim; ++i) os << ",x_" << i;
    for (std::size_t i = 0; i < kSignalDim; ++i) os << ",s_" << i;
    for (std::size_t i = 0; i < kDistractorDim; ++i) os << ",d_" << i;
    for (std::size_t i = 0; i < traj.u.cols(); ++i) os << ",u_" << i;
    os << "\n";
    os.precision(17);
    for (std::size_t t = 0; t < traj.length(); ++t) {
        os << t;
        for (std::size_t i = 0; i < kObsDim; ++i) os << "," << traj.x(t, i);
        for (std::size_t i = 0; i < kSignalDim; ++i) os << "," << traj.s(t, i);
        for (std::size_t i = 0; i < kDistractorDim; ++i) os << "," << traj.d(t, i);
        for (std::size_t i = 0; i < traj.u.cols(); ++i)
            os << "," << (t < traj.u.rows() ? traj.u(t, i) : 0.0);
        os << "\n";
    }
}

/// Flat binary layout: magic "LBLTRAJ1", then u64 {T, D_x, D_s, D_d, D_u, seed},
/// f64 sigma, then row-major x, s, d, u as little-endian doubles.
inline void write_trajectory_binary(const Trajectory& traj, std::ostream& os) {
    const char magic[8] = {'L', 'B', 'L', 'T', 'R', 'A', 'J', '1'};
    os.write(magic, 8);
    auto put_u64 = [&os](std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    put_u64(traj.length());
    put_u64(kObsDim);
    put_u64(kSignalDim);
    put_u64(kDistractorDim);
    put_u64(traj.u.cols());
    put_u64(traj.seed);
    os.write(reinterpret_cast<const char*>(&traj.sigma), 8);
    auto put_mat = [&os](const Matrix& m) {
        os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * 8));
    };
    put_mat(traj.x);
    put_mat(traj.s);
    put_mat(traj.d);
    put_mat(traj.u);
}

}  // namespace lbl
