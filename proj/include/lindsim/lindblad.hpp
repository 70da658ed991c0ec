// Reference Lindblad propagation in Liouville space: the generator is
// assembled as an n^2 x n^2 superoperator acting on the row-major
// flattening of rho, and each step applies exp(-i dt L(t_i)).
#pragma once

#include <string>
#include <vector>

#include "algebra.hpp"
#include "model.hpp"

namespace lindsim {

// L(rho) = [H, rho] - (i/2) gamma^k {G_k^dag G_k, rho} + i gamma^k G_k rho G_k^dag,
// evaluated directly in matrix form. The equation of motion is i rho' = L(rho).
inline Mat lindblad_action(const LindbladModel& model, double t, const Mat& rho) {
    const Mat h = model.hamiltonian(t);
    Mat out = h * rho - rho * h;
    for (std::size_t k = 0; k < model.jumps.size(); ++k) {
        const Mat g = model.jumps[k](t);
        const Mat gg = g.adjoint() * g;
        out -= Complex(0, 0.5) * model.rates[k] * (gg * rho + rho * gg);
        out += Complex(0, 1.0) * model.rates[k] * (g * rho * g.adjoint());
    }
    return out;
}

// rho' evaluated from the generator; used wherever an instantaneous
// derivative of a stored density matrix is needed.
inline Mat lindblad_rhs(const LindbladModel& model, double t, const Mat& rho) {
    return Complex(0, -1) * lindblad_action(model, t, rho);
}

// Superoperator matrix with flatten(L(rho)) = liouvillian(t) * flatten(rho).
// With row-major flattening, A rho B maps to kron(A, B^T).
inline Mat liouvillian(const LindbladModel& model, double t) {
    const Eigen::Index n = model.dim;
    const Mat id = Mat::Identity(n, n);
    const Mat h = model.hamiltonian(t);
    Mat sop = kron(h, id) - kron(id, h.transpose());
    for (std::size_t k = 0; k < model.jumps.size(); ++k) {
        const Mat g = model.jumps[k](t);
        const Mat gg = g.adjoint() * g;
        sop -= Complex(0, 0.5) * model.rates[k] * (kron(gg, id) + kron(id, gg.transpose()));
        sop += Complex(0, 1.0) * model.rates[k] * kron(g, g.conjugate());
    }
    return sop;
}

struct DensityTrajectory {
    std::vector<double> times;
    std::vector<Mat> states;
    double max_trace_drift = 0.0;
    double min_eigenvalue = 0.0;
    bool failed = false;
    std::string message;
};

// Split-operator propagation: rho(t_{i+1}) = unflatten(exp(-i dt L(t_i)) flatten(rho)),
// with the generator sampled at the left endpoint and re-symmetrization each step.
inline DensityTrajectory propagate_lindblad(const LindbladModel& model, const Mat& rho0,
                                            const TimeGrid& grid, double trace_drift_limit = 1e-6) {
    validate_model(model, grid.t0);
    validate_density(rho0);
    grid.validate();

    const double dt = grid.dt();
    DensityTrajectory traj;
    traj.times.reserve(grid.steps + 1);
    traj.states.reserve(grid.steps + 1);
    traj.times.push_back(grid.t0);
    traj.states.push_back(rho0);
    traj.min_eigenvalue = hermitian_eigen(rho0).eigenvalues[0];

    Mat rho = rho0;
    Mat prev_sop, prev_step;
    for (int i = 0; i < grid.steps; ++i) {
        const Mat sop = liouvillian(model, grid.time(i));
        if (prev_sop.size() == 0 || (sop - prev_sop).cwiseAbs().maxCoeff() != 0.0) {
            prev_step = matrix_exp(Complex(0, -dt) * sop);  // reused over constant segments
            prev_sop = sop;
        }
        Vec v = prev_step * reshape_to_state(rho);
        rho = reshape_to_operator(v);
        rho = 0.5 * (rho + rho.adjoint().eval());

        traj.times.push_back(grid.time(i + 1));
        traj.states.push_back(rho);
        traj.max_trace_drift = std::max(traj.max_trace_drift, std::abs(rho.trace().real() - 1.0));
        traj.min_eigenvalue = std::min(traj.min_eigenvalue, hermitian_eigen(rho).eigenvalues[0]);
    }
    if (traj.max_trace_drift > trace_drift_limit) {
        traj.failed = true;
        traj.message = "trace drift " + std::to_string(traj.max_trace_drift) + " exceeds limit";
    }
    return traj;
}

}  // namespace lindsim
