// Purified dynamics: the nonlinear Schroedinger equation
//
//   i psi' = (H - (i/2) gamma^k G_k^dag G_k) (x) 1 psi
//            + (i/2) gamma^k G_k (x) G_k^ddag(psi) psi
//
// whose partial trace follows the Lindblad equation. The C*-adjoint
// nonlinearity is G^ddag(psi) = (W^* G W)^{dag T} built from the
// pseudo-inverse of the operator factor W of psi. Near-singular factors
// are handled by the rank cutoff of the pseudo-inverse, which realizes
// the range projector of the projected form of the equation.
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "algebra.hpp"
#include "lindblad.hpp"
#include "model.hpp"

namespace lindsim {

// G^ddag(psi) = (W^* G W)^{dag T}, an operator on the ancilla factor.
inline Mat cstar_adjoint(const Mat& gamma, const Vec& psi, double rank_tol = kDefaultRankTol) {
    const Mat w = reshape_to_operator(psi);
    if (gamma.rows() != w.rows() || gamma.cols() != w.rows())
        throw std::invalid_argument("cstar_adjoint: operator dimension mismatch");
    const Mat wstar = pseudo_inverse(w, rank_tol);
    return (wstar * gamma * w).adjoint().transpose();
}

// Right-hand side psi' of the purified equation, evaluated through the
// operator factor: W' = -i H^eff W + (1/2) gamma^k G_k W W^dag G_k^dag (W^*)^dag.
inline Vec nlse_rhs(const LindbladModel& model, const Vec& psi, double t,
                    double rank_tol = kDefaultRankTol) {
    const Mat w = reshape_to_operator(psi);
    const Mat wstar = pseudo_inverse(w, rank_tol);
    Mat wdot = Complex(0, -1) * (effective_hamiltonian(model, t) * w);
    const Mat rho = w * w.adjoint();
    for (std::size_t k = 0; k < model.jumps.size(); ++k) {
        const Mat g = model.jumps[k](t);
        wdot += 0.5 * model.rates[k] * (g * rho * g.adjoint() * wstar.adjoint());
    }
    return reshape_to_state(wdot);
}

// psi_0 = psi(sqrt(rho_0)): the canonical choice among the right-unitary
// orbit of purifications of rho_0.
inline Vec purify_initial(const Mat& rho0) {
    validate_density(rho0);
    return reshape_to_state(hermitian_sqrt(rho0));
}

struct NlseState {
    Vec psi;
    Mat w;  // cached operator factor, kept exactly consistent with psi
    double t = 0.0;
};

struct PurifiedTrajectory {
    std::vector<NlseState> states;
    bool truncated = false;
    std::string message;
    double max_norm_drift = 0.0;
    long total_substeps = 0;

    std::vector<double> times() const {
        std::vector<double> ts;
        ts.reserve(states.size());
        for (const auto& s : states) ts.push_back(s.t);
        return ts;
    }
    std::vector<Mat> density_trajectory() const {
        std::vector<Mat> rhos;
        rhos.reserve(states.size());
        for (const auto& s : states) rhos.push_back(s.w * s.w.adjoint());
        return rhos;
    }
};

struct NlseOptions {
    double rank_tol = kDefaultRankTol;
    // Sub-divides a grid step whenever dt is large against the pumping
    // timescale p_min / (sum_k gamma^k |G_k|_F^2) of the smallest Gram
    // eigenvalue of W; without this the fixed-step RK4 overshoots the
    // square-root layer that forms when the trajectory starts next to a
    // singular stratum. The output grid is unchanged.
    bool stiffness_guard = true;
    double guard_fraction = 0.1;
    int max_substeps_per_step = 1 << 14;
};

namespace detail {

struct NlseStepper {
    const LindbladModel& model;
    double rank_tol;
    Mat u, uinv;  // U^eff(t,0) and its inverse, advanced by exact exponentials
    int rank0 = 0;
    bool rank_collapsed = false;
    bool has_jumps = false;

    // d/dt Wt = (1/2) gamma^k (U^-1 G_k U) Wt (U Wt)^dag G_k^dag ((U Wt)^*)^dag
    // with U frozen over the (sub)step; this is the rotating-frame form of
    // the nonlinear part. The pseudo-inverse is recomputed at every stage.
    Mat rotating_rhs(double t, const Mat& u_frozen, const Mat& uinv_frozen, const Mat& wt) {
        if (!has_jumps) return Mat::Zero(wt.rows(), wt.cols());
        const Mat full = u_frozen * wt;
        const ThinSvd svd = svd_from_gram(full, rank_tol);
        if (svd.rank < rank0) rank_collapsed = true;
        Mat pinv_adj = Mat::Zero(full.rows(), full.cols());  // (full^*)^dag
        for (int k = 0; k < svd.rank; ++k)
            pinv_adj += (1.0 / svd.singular_values[k]) * svd.u.col(k) * svd.v.col(k).adjoint();
        const Mat rho = full * full.adjoint();
        Mat out = Mat::Zero(wt.rows(), wt.cols());
        for (std::size_t k = 0; k < model.jumps.size(); ++k) {
            const Mat g = model.jumps[k](t);
            out += 0.5 * model.rates[k] * (uinv_frozen * g * rho * g.adjoint() * pinv_adj);
        }
        return out;
    }

    // One split step of size h starting at time t: advance U by half-step
    // exponentials of H^eff and RK4 the rotating nonlinear part.
    Mat advance(double t, double h, const Mat& w) {
        const Mat heff = effective_hamiltonian(model, t);
        const Mat e_half = matrix_exp(Complex(0, -0.5 * h) * heff);
        const Mat e_half_inv = matrix_exp(Complex(0, 0.5 * h) * heff);
        const Mat u_mid = e_half * u, uinv_mid = uinv * e_half_inv;
        const Mat u_next = e_half * u_mid, uinv_next = uinv_mid * e_half_inv;

        const Mat wt = uinv * w;
        const Mat k1 = rotating_rhs(t, u, uinv, wt);
        const Mat k2 = rotating_rhs(t + 0.5 * h, u_mid, uinv_mid, wt + 0.5 * h * k1);
        const Mat k3 = rotating_rhs(t + 0.5 * h, u_mid, uinv_mid, wt + 0.5 * h * k2);
        const Mat k4 = rotating_rhs(t + h, u_next, uinv_next, wt + h * k3);
        const Mat wt_next = wt + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        u = u_next;
        uinv = uinv_next;
        return u * wt_next;
    }

    // Pumping timescale of the smallest Gram eigenvalue under the jump terms.
    double pumping_timescale(double t, const Mat& w) const {
        if (!has_jumps) return std::numeric_limits<double>::infinity();
        double pump = 0.0;
        for (std::size_t k = 0; k < model.jumps.size(); ++k)
            pump += model.rates[k] * model.jumps[k](t).squaredNorm();
        if (pump <= 0.0) return std::numeric_limits<double>::infinity();
        const RVec gram = hermitian_eigen(w.adjoint() * w).eigenvalues;
        return std::max(gram[0], 0.0) / pump;
    }
};

}  // namespace detail

// Integrator from the split-operator / RK4 recipe: psi is carried through
// the intermediate representation psi~ = U^eff(t,0)^-1 (x) 1 psi.
inline PurifiedTrajectory propagate_nlse(const LindbladModel& model, const Vec& psi0,
                                         const TimeGrid& grid, const NlseOptions& opts = {}) {
    validate_model(model, grid.t0);
    grid.validate();
    const Eigen::Index n = model.dim;
    if (psi0.size() != n * n) throw std::invalid_argument("propagate_nlse: state dimension mismatch");

    const double dt = grid.dt();
    detail::NlseStepper stepper{model, opts.rank_tol, Mat::Identity(n, n), Mat::Identity(n, n)};
    for (double r : model.rates)
        if (r > 0.0) stepper.has_jumps = true;
    if (model.jumps.empty()) stepper.has_jumps = false;

    PurifiedTrajectory traj;
    traj.states.reserve(grid.steps + 1);
    Mat w = reshape_to_operator(psi0);
    stepper.rank0 = numerical_rank(w, opts.rank_tol);
    traj.states.push_back({psi0, w, grid.t0});
    const double norm0 = psi0.norm();

    for (int i = 0; i < grid.steps; ++i) {
        const double t = grid.time(i);
        double done = 0.0;
        int substeps = 0;
        while (done < dt) {
            double h = dt - done;
            if (opts.stiffness_guard && stepper.has_jumps) {
                const double tau = stepper.pumping_timescale(t + done, w);
                const double hmax = std::max(opts.guard_fraction * tau, dt / 1024.0);
                h = std::min(h, hmax);
            }
            if (substeps >= opts.max_substeps_per_step) {
                traj.truncated = true;
                traj.message = "substep budget exhausted at t=" + std::to_string(t + done);
                return traj;
            }
            w = stepper.advance(t + done, h, w);
            done += h;
            ++substeps;
            ++traj.total_substeps;
            if (stepper.rank_collapsed) {
                traj.truncated = true;
                traj.message = "operator-factor rank collapsed below its initial value near t=" +
                               std::to_string(t + done);
                return traj;
            }
        }
        Vec psi = reshape_to_state(w);
        traj.states.push_back({psi, w, grid.time(i + 1)});
        traj.max_norm_drift = std::max(traj.max_norm_drift, std::abs(psi.norm() - norm0));
    }
    return traj;
}

}  // namespace lindsim
