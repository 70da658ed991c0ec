// Two-level benchmark: a spin-1/2 driven by a time-dependent magnetic
// field, with dephasing and spontaneous emission expressed in the dressed
// (instantaneous eigenvector) frame.
//
//   H(t)   = -(mu B / 2) [[cos th, e^{-i ph} sin th], [e^{i ph} sin th, -cos th]]
//   G_z(t) = R sigma_z R^dag,  G_-(t) = R sigma_- R^dag,
//   R      = [[cos th/2, -e^{-i ph} sin th/2], [e^{i ph} sin th/2, cos th/2]]
//
// with sigma_- = sigma_x - i sigma_y. The control schedule is a plain-text
// table of (t, B, theta) rows, linearly interpolated and clamped outside
// its span; the built-in schedule is cyclic (H(T) = H(0)) and ends with
// the decay channel draining into e_1, so the long-time state is
// diag(1, 0).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "algebra.hpp"
#include "model.hpp"

namespace lindsim {

inline Mat pauli(int i) {
    Mat m(2, 2);
    switch (i) {
        case 0: m << 1, 0, 0, 1; break;
        case 1: m << 0, 1, 1, 0; break;
        case 2: m << 0, Complex(0, -1), Complex(0, 1), 0; break;
        default: m << 1, 0, 0, -1; break;
    }
    return m;
}

// components of M on {sigma_0, sigma_x, sigma_y, sigma_z}: a_i = tr(sigma_i M)/2
inline std::array<Complex, 4> pauli_components(const Mat& m) {
    std::array<Complex, 4> a;
    for (int i = 0; i < 4; ++i) a[i] = (pauli(i) * m).trace() / 2.0;
    return a;
}

struct FieldSchedule {
    std::vector<double> t, B, theta;
    double mu = 1.0;
    double phi = 0.0;  // longitude held constant

    double lerp(const std::vector<double>& y, double tq) const {
        if (tq <= t.front()) return y.front();
        if (tq >= t.back()) return y.back();
        const auto it = std::upper_bound(t.begin(), t.end(), tq);
        const std::size_t i = static_cast<std::size_t>(it - t.begin());
        const double w = (tq - t[i - 1]) / (t[i] - t[i - 1]);
        return (1.0 - w) * y[i - 1] + w * y[i];
    }
    double field(double tq) const { return lerp(B, tq); }
    double colatitude(double tq) const { return lerp(theta, tq); }
};

inline Mat rotation_matrix(double theta, double phi) {
    const double c = std::cos(theta / 2), s = std::sin(theta / 2);
    const Complex em = std::exp(Complex(0, -phi)), ep = std::exp(Complex(0, phi));
    Mat r(2, 2);
    r << c, -em * s, ep * s, c;
    return r;
}

inline Mat spin_hamiltonian(const FieldSchedule& sched, double t) {
    const double b = sched.field(t), th = sched.colatitude(t), ph = sched.phi;
    const Complex em = std::exp(Complex(0, -ph)), ep = std::exp(Complex(0, ph));
    Mat h(2, 2);
    h << std::cos(th), em * std::sin(th), ep * std::sin(th), -std::cos(th);
    return -(sched.mu * b / 2.0) * h;
}

// Dressed jump operators (G_z, G_-); closed forms of R sigma_z R^dag and
// R sigma_- R^dag.
inline std::pair<Mat, Mat> jump_operators(const FieldSchedule& sched, double t) {
    const double th = sched.colatitude(t), ph = sched.phi;
    const Complex em = std::exp(Complex(0, -ph)), em2 = std::exp(Complex(0, -2 * ph)),
                  ep = std::exp(Complex(0, ph));
    Mat gz(2, 2), gm(2, 2);
    gz << std::cos(th), em * std::sin(th), ep * std::sin(th), -std::cos(th);
    const double s = std::sin(th), s2 = std::sin(th / 2) * std::sin(th / 2),
                 c2 = std::cos(th / 2) * std::cos(th / 2);
    gm << -em * s, -2.0 * em2 * s2, 2.0 * c2, em * s;
    return {gz, gm};
}

// Built-in control: theta dips from pi to pi/10 and back, B rises from 1
// to 3/2 and back, both over T = 100 a.u.; frozen as a 401-row table so
// the file interface and the built-in benchmark stay bit-identical.
inline FieldSchedule paper_schedule() {
    FieldSchedule s;
    constexpr int rows = 401;
    constexpr double T = 100.0;
    const double pi = std::numbers::pi;
    s.t.reserve(rows);
    s.B.reserve(rows);
    s.theta.reserve(rows);
    for (int i = 0; i < rows; ++i) {
        const double t = T * i / (rows - 1);
        const double u = std::sin(pi * t / T);
        s.t.push_back(t);
        s.B.push_back(1.0 + 0.5 * u * u);
        s.theta.push_back(pi * (1.0 - 0.9 * u * u));
    }
    return s;
}

inline FieldSchedule load_schedule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("schedule file not found: " + path);
    FieldSchedule s;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream row(line);
        double t, b, th;
        if (row >> t >> b >> th) {
            if (!s.t.empty() && t <= s.t.back())
                throw std::runtime_error("schedule file times must increase: " + path);
            s.t.push_back(t);
            s.B.push_back(b);
            s.theta.push_back(th);
        }
    }
    if (s.t.size() < 2) throw std::runtime_error("schedule file needs at least two rows: " + path);
    return s;
}

inline void save_schedule(const FieldSchedule& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write schedule file: " + path);
    out << "# two-level benchmark control schedule\n# t  B  theta  (atomic units, radians)\n";
    char buf[128];
    for (std::size_t i = 0; i < s.t.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", s.t[i], s.B[i], s.theta[i]);
        out << buf;
    }
}

// Benchmark model: mu = 1, gamma_z = 1e-3, gamma_- = 2e-3 (atomic units).
inline LindbladModel two_level_model(FieldSchedule schedule = paper_schedule(),
                                     double gamma_z = 1e-3, double gamma_minus = 2e-3) {
    LindbladModel m;
    m.dim = 2;
    auto sched = std::make_shared<FieldSchedule>(std::move(schedule));
    m.hamiltonian = [sched](double t) { return spin_hamiltonian(*sched, t); };
    m.jumps = {[sched](double t) { return jump_operators(*sched, t).first; },
               [sched](double t) { return jump_operators(*sched, t).second; }};
    m.rates = {gamma_z, gamma_minus};
    return m;
}

// rho(0) = [[eps, eps], [eps, 1-eps]]: close to the pure state e_2 but
// inside the regular stratum.
inline Mat benchmark_initial_state(double eps = 1e-5) {
    Mat rho(2, 2);
    rho << eps, eps, eps, 1.0 - eps;
    return rho;
}

}  // namespace lindsim
