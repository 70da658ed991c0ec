// Pure-state representations of the open dynamics: the closest-pure
// nonlinear equations (shifted and unshifted), the piecewise deterministic
// jump process and quantum state diffusion, with Monte Carlo density
// reconstruction rho = E(|psi><psi|).
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "algebra.hpp"
#include "model.hpp"

namespace lindsim {

enum class Scheme { Lindblad, Nlse, PDP, QSD, ClosestPureShifted, ClosestPureUnshifted };

struct StochasticConfig {
    int n_trajectories = 1;
    std::uint64_t master_seed = 0;
    int store_stride = 1;  // keep every stride-th grid point
};

struct PureTrajectory {
    std::vector<double> times;
    std::vector<Vec> states;  // normalized
};

struct TrajectoryEnsemble {
    std::vector<double> times;
    std::vector<std::vector<Vec>> states;  // [trajectory][stored time]
    double max_step_jump_probability = 0.0;
    long jump_count = 0;
    bool step_size_warning = false;  // total jump probability exceeded 0.1 in a step
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// counter-based per-trajectory seeding: deterministic however trajectories
// are scheduled
inline std::mt19937_64 trajectory_engine(std::uint64_t master_seed, int trajectory) {
    return std::mt19937_64(splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(trajectory) + 1)));
}

// Operators sampled once on the grid (left endpoints, midpoints and t_N)
// so Monte Carlo fan-out does not re-evaluate the schedule per trajectory.
struct SampledModel {
    int dim = 0;
    double dt = 0.0;
    std::vector<double> rates;
    std::vector<Mat> heff;                    // size steps+1
    std::vector<Mat> heff_mid;                // size steps
    std::vector<std::vector<Mat>> jump;       // [k][steps+1]
    std::vector<std::vector<Mat>> jump_mid;   // [k][steps]

    SampledModel(const LindbladModel& model, const TimeGrid& grid) {
        dim = model.dim;
        dt = grid.dt();
        rates = model.rates;
        heff.reserve(grid.steps + 1);
        heff_mid.reserve(grid.steps);
        jump.resize(model.jumps.size());
        jump_mid.resize(model.jumps.size());
        for (int i = 0; i <= grid.steps; ++i) {
            const double t = grid.time(i);
            heff.push_back(effective_hamiltonian(model, t));
            for (std::size_t k = 0; k < model.jumps.size(); ++k) jump[k].push_back(model.jumps[k](t));
            if (i < grid.steps) {
                const double tm = t + 0.5 * dt;
                heff_mid.push_back(effective_hamiltonian(model, tm));
                for (std::size_t k = 0; k < model.jumps.size(); ++k) jump_mid[k].push_back(model.jumps[k](tm));
            }
        }
    }

    std::size_t channels() const { return rates.size(); }
};

template <typename Rhs>
Vec rk4_step(const Rhs& rhs, const Vec& psi, int i, double dt) {
    // stage indices: 0 -> t_i, 1 -> midpoint, 2 -> t_{i+1}
    const Vec k1 = rhs(psi, i, 0);
    const Vec k2 = rhs(Vec(psi + 0.5 * dt * k1), i, 1);
    const Vec k3 = rhs(Vec(psi + 0.5 * dt * k2), i, 1);
    const Vec k4 = rhs(Vec(psi + dt * k3), i, 2);
    return psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline void parallel_for(int count, const std::function<void(int)>& body) {
    const unsigned hw = std::thread::hardware_concurrency();
    if (hw <= 1 || count < 2) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    const unsigned workers = std::min<unsigned>(hw, count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (int i = static_cast<int>(w); i < count; i += static_cast<int>(workers)) body(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

// Closest-pure dynamics. Shifted form (norm-preserving drift):
//   psi' = -i (H^eff - <H^eff>) psi + gamma^k <G_k^dag> (G_k - <G_k>) psi
// Unshifted form (renormalized each step):
//   psi' = -i H^eff psi + (1/2) gamma^k <G_k^dag> G_k psi
inline PureTrajectory propagate_closest_pure(const LindbladModel& model, const Vec& psi0,
                                             const TimeGrid& grid, bool shifted) {
    validate_model(model, grid.t0);
    grid.validate();
    if (std::abs(psi0.norm() - 1.0) > 1e-8)
        throw std::invalid_argument("propagate_closest_pure: state must be normalized");

    detail::SampledModel sm(model, grid);
    auto rhs = [&](const Vec& psi, int i, int stage) -> Vec {
        const Mat& heff = stage == 0 ? sm.heff[i] : (stage == 1 ? sm.heff_mid[i] : sm.heff[i + 1]);
        Vec dpsi = Complex(0, -1) * (heff * psi);
        if (shifted) {
            const Complex eh = psi.dot(heff * psi);
            dpsi += Complex(0, 1) * eh * psi;
        }
        for (std::size_t k = 0; k < sm.channels(); ++k) {
            const Mat& g = stage == 0 ? sm.jump[k][i] : (stage == 1 ? sm.jump_mid[k][i] : sm.jump[k][i + 1]);
            const Vec gpsi = g * psi;
            const Complex eg = psi.dot(gpsi);          // <G>
            const Complex egd = std::conj(eg);         // <G^dag>
            if (shifted)
                dpsi += sm.rates[k] * egd * (gpsi - eg * psi);
            else
                dpsi += 0.5 * sm.rates[k] * egd * gpsi;
        }
        return dpsi;
    };

    PureTrajectory traj;
    traj.times.reserve(grid.steps + 1);
    traj.states.reserve(grid.steps + 1);
    Vec psi = psi0;
    traj.times.push_back(grid.t0);
    traj.states.push_back(psi);
    for (int i = 0; i < grid.steps; ++i) {
        psi = detail::rk4_step(rhs, psi, i, sm.dt);
        if (!shifted) psi.normalize();
        traj.times.push_back(grid.time(i + 1));
        traj.states.push_back(psi);
    }
    return traj;
}

// Piecewise deterministic process: non-Hermitian drift
//   psi' = -i H^eff psi + (1/2) gamma^k <G_k^dag G_k> psi
// punctuated by jumps psi -> G_k psi / |G_k psi| drawn per step with
// probability gamma^k |G_k psi|^2 dt (first-order thinning).
inline TrajectoryEnsemble propagate_pdp(const LindbladModel& model, const Vec& psi0,
                                        const TimeGrid& grid, const StochasticConfig& config) {
    validate_model(model, grid.t0);
    grid.validate();
    if (config.n_trajectories < 1) throw std::invalid_argument("propagate_pdp: need at least one trajectory");
    if (std::abs(psi0.norm() - 1.0) > 1e-8)
        throw std::invalid_argument("propagate_pdp: state must be normalized");

    detail::SampledModel sm(model, grid);
    auto drift = [&](const Vec& psi, int i, int stage) -> Vec {
        const Mat& heff = stage == 0 ? sm.heff[i] : (stage == 1 ? sm.heff_mid[i] : sm.heff[i + 1]);
        Vec dpsi = Complex(0, -1) * (heff * psi);
        for (std::size_t k = 0; k < sm.channels(); ++k) {
            const Mat& g = stage == 0 ? sm.jump[k][i] : (stage == 1 ? sm.jump_mid[k][i] : sm.jump[k][i + 1]);
            const Vec gpsi = g * psi;
            dpsi += 0.5 * sm.rates[k] * gpsi.squaredNorm() * psi;  // <G^dag G> psi
        }
        return dpsi;
    };

    TrajectoryEnsemble ens;
    for (int i = 0; i <= grid.steps; i += config.store_stride) ens.times.push_back(grid.time(i));
    ens.states.assign(config.n_trajectories, {});

    std::vector<double> max_prob(config.n_trajectories, 0.0);
    std::vector<long> jumps(config.n_trajectories, 0);

    detail::parallel_for(config.n_trajectories, [&](int traj) {
        auto rng = detail::trajectory_engine(config.master_seed, traj);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        std::vector<Vec>& stored = ens.states[traj];
        stored.reserve(ens.times.size());

        Vec psi = psi0;
        stored.push_back(psi);
        std::vector<double> prob(sm.channels());
        for (int i = 0; i < grid.steps; ++i) {
            double total = 0.0;
            for (std::size_t k = 0; k < sm.channels(); ++k) {
                prob[k] = sm.rates[k] * (sm.jump[k][i] * psi).squaredNorm() * sm.dt;
                total += prob[k];
            }
            max_prob[traj] = std::max(max_prob[traj], total);
            const double u = uniform(rng);
            if (u < total) {
                double acc = 0.0;
                for (std::size_t k = 0; k < sm.channels(); ++k) {
                    acc += prob[k];
                    if (u < acc || k + 1 == sm.channels()) {
                        psi = (sm.jump[k][i] * psi).normalized();
                        ++jumps[traj];
                        break;
                    }
                }
            } else {
                psi = detail::rk4_step(drift, psi, i, sm.dt);
                psi.normalize();
            }
            if ((i + 1) % config.store_stride == 0) stored.push_back(psi);
        }
    });

    for (int traj = 0; traj < config.n_trajectories; ++traj) {
        ens.max_step_jump_probability = std::max(ens.max_step_jump_probability, max_prob[traj]);
        ens.jump_count += jumps[traj];
    }
    ens.step_size_warning = ens.max_step_jump_probability > 0.1;
    return ens;
}

// Quantum state diffusion: deterministic part
//   psi' = -i H^eff psi + (1/2) gamma^k (<G_k^dag + G_k> G_k - (1/4)<G_k^dag + G_k>^2) psi
// integrated with RK4, plus an Euler-Maruyama noise increment
//   sqrt(gamma^k) dW_k (G_k - (1/2)<G_k + G_k^dag>) psi
// with one real Wiener increment per channel; renormalized every step.
inline TrajectoryEnsemble propagate_qsd(const LindbladModel& model, const Vec& psi0,
                                        const TimeGrid& grid, const StochasticConfig& config) {
    validate_model(model, grid.t0);
    grid.validate();
    if (config.n_trajectories < 1) throw std::invalid_argument("propagate_qsd: need at least one trajectory");
    if (std::abs(psi0.norm() - 1.0) > 1e-8)
        throw std::invalid_argument("propagate_qsd: state must be normalized");

    detail::SampledModel sm(model, grid);
    auto drift = [&](const Vec& psi, int i, int stage) -> Vec {
        const Mat& heff = stage == 0 ? sm.heff[i] : (stage == 1 ? sm.heff_mid[i] : sm.heff[i + 1]);
        Vec dpsi = Complex(0, -1) * (heff * psi);
        for (std::size_t k = 0; k < sm.channels(); ++k) {
            const Mat& g = stage == 0 ? sm.jump[k][i] : (stage == 1 ? sm.jump_mid[k][i] : sm.jump[k][i + 1]);
            const Vec gpsi = g * psi;
            const Complex sum = psi.dot(gpsi) + std::conj(psi.dot(gpsi));  // <G + G^dag>
            dpsi += 0.5 * sm.rates[k] * (sum * gpsi - 0.25 * sum * sum * psi);
        }
        return dpsi;
    };

    TrajectoryEnsemble ens;
    for (int i = 0; i <= grid.steps; i += config.store_stride) ens.times.push_back(grid.time(i));
    ens.states.assign(config.n_trajectories, {});

    const double sqrt_dt = std::sqrt(sm.dt);
    detail::parallel_for(config.n_trajectories, [&](int traj) {
        auto rng = detail::trajectory_engine(config.master_seed, traj);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<Vec>& stored = ens.states[traj];
        stored.reserve(ens.times.size());

        Vec psi = psi0;
        stored.push_back(psi);
        for (int i = 0; i < grid.steps; ++i) {
            Vec next = detail::rk4_step(drift, psi, i, sm.dt);
            for (std::size_t k = 0; k < sm.channels(); ++k) {
                const double dW = sqrt_dt * normal(rng);
                const Vec gpsi = sm.jump[k][i] * psi;
                const Complex sum = psi.dot(gpsi) + std::conj(psi.dot(gpsi));
                next += std::sqrt(sm.rates[k]) * dW * (gpsi - 0.5 * sum * psi);
            }
            psi = next.normalized();
            if ((i + 1) % config.store_stride == 0) stored.push_back(psi);
        }
    });
    return ens;
}

// rho = E(|psi><psi|): uniform average of the trajectory projectors.
inline Mat ensemble_density(const TrajectoryEnsemble& ens, int t_index) {
    if (ens.states.empty()) throw std::invalid_argument("ensemble_density: empty ensemble");
    if (t_index < 0 || t_index >= static_cast<int>(ens.times.size()))
        throw std::invalid_argument("ensemble_density: time index out of range");
    const Eigen::Index n = ens.states[0][t_index].size();
    Mat rho = Mat::Zero(n, n);
    for (const auto& traj : ens.states) rho += traj[t_index] * traj[t_index].adjoint();
    return rho / static_cast<double>(ens.states.size());
}

}  // namespace lindsim
