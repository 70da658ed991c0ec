// Model and grid types shared by every propagation scheme. hbar = 1
// throughout; times and rates are in atomic units.
#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "algebra.hpp"

namespace lindsim {

using TimeOperator = std::function<Mat(double)>;

// i rho' = [H, rho] - (i/2) gamma^k {G_k^dag G_k, rho} + i gamma^k G_k rho G_k^dag
struct LindbladModel {
    int dim = 0;
    TimeOperator hamiltonian;          // Hermitian n x n
    std::vector<TimeOperator> jumps;   // quantum jump operators G_k(t)
    std::vector<double> rates;         // gamma^k >= 0
};

inline void validate_model(const LindbladModel& model, double t_sample = 0.0) {
    if (model.dim < 1) throw std::invalid_argument("model: dimension must be positive");
    if (!model.hamiltonian) throw std::invalid_argument("model: missing Hamiltonian");
    if (model.jumps.size() != model.rates.size())
        throw std::invalid_argument("model: jump operator and rate counts differ");
    const Mat h = model.hamiltonian(t_sample);
    if (h.rows() != model.dim || h.cols() != model.dim)
        throw std::invalid_argument("model: Hamiltonian dimension mismatch");
    if (!is_hermitian(h, 1e-10)) throw std::invalid_argument("model: Hamiltonian is not Hermitian");
    for (std::size_t k = 0; k < model.jumps.size(); ++k) {
        if (model.rates[k] < 0) throw std::invalid_argument("model: negative rate");
        const Mat g = model.jumps[k](t_sample);
        if (g.rows() != model.dim || g.cols() != model.dim)
            throw std::invalid_argument("model: jump operator dimension mismatch");
    }
}

// H^eff = H - (i/2) gamma^k G_k^dag G_k
inline Mat effective_hamiltonian(const LindbladModel& model, double t) {
    Mat h = model.hamiltonian(t);
    for (std::size_t k = 0; k < model.jumps.size(); ++k) {
        const Mat g = model.jumps[k](t);
        h -= Complex(0, 0.5) * model.rates[k] * (g.adjoint() * g);
    }
    return h;
}

// Uniform partition t0 < t1 < ... < t_N of [t0, t_end].
struct TimeGrid {
    double t0 = 0.0;
    double t_end = 1.0;
    int steps = 1;

    double dt() const { return (t_end - t0) / steps; }
    double time(int i) const { return t0 + dt() * i; }

    void validate() const {
        if (steps < 1) throw std::invalid_argument("grid: steps must be >= 1");
        if (!(t_end > t0)) throw std::invalid_argument("grid: t_end must exceed t0");
    }
};

inline void validate_density(const Mat& rho, double herm_tol = 1e-10, double trace_tol = 1e-8,
                             double psd_tol = 1e-10) {
    if (rho.rows() != rho.cols()) throw std::invalid_argument("density: matrix must be square");
    if (!is_hermitian(rho, herm_tol)) throw std::invalid_argument("density: matrix is not Hermitian");
    if (std::abs(rho.trace().real() - 1.0) > trace_tol || std::abs(rho.trace().imag()) > trace_tol)
        throw std::invalid_argument("density: trace differs from 1");
    const RVec evals = hermitian_eigen(rho).eigenvalues;
    if (evals[0] < -psd_tol) throw std::invalid_argument("density: negative eigenvalue");
}

}  // namespace lindsim
