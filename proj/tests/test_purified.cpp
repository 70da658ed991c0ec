#include <catch2/catch_amalgamated.hpp>

#include "lindsim/lindblad.hpp"
#include "lindsim/purified.hpp"
#include "lindsim/spinmodel.hpp"
#include "oracles.hpp"

using namespace lindsim;

namespace {

LindbladModel constant_model(const Mat& h, std::vector<Mat> gs, std::vector<double> rates) {
    LindbladModel m;
    m.dim = static_cast<int>(h.rows());
    m.hamiltonian = [h](double) { return h; };
    for (const Mat& g : gs) m.jumps.push_back([g](double) { return g; });
    m.rates = std::move(rates);
    return m;
}

}  // namespace

TEST_CASE("C*-adjoint of the identity is the identity") {
    oracles::Rng rng(201);
    const Mat w = rng.matrix(3, 3);  // full rank almost surely
    const Mat adj = cstar_adjoint(Mat::Identity(3, 3), reshape_to_state(w));
    REQUIRE(max_abs(Mat(adj - Mat::Identity(3, 3))) < 1e-10);
}

TEST_CASE("C*-adjoint on a rank-one factor") {
    oracles::Rng rng(203);
    const Vec psi = rng.state(2);
    for (int alpha = 0; alpha < 2; ++alpha) {
        Vec xi = Vec::Zero(2);
        xi[alpha] = 1;
        const Mat w = psi * xi.adjoint();
        const Mat gamma = rng.matrix(2, 2);
        const Complex expect = (psi.adjoint() * gamma * psi)(0, 0);
        const Mat adj = cstar_adjoint(gamma, reshape_to_state(w));
        REQUIRE(max_abs(Mat(adj - std::conj(expect) * xi * xi.adjoint())) < 1e-12);
    }
}

TEST_CASE("C*-adjoint range identity") {
    // (1 (x) Gddag(psi)^dag) psi = (P_RanW G (x) 1) psi, checked by index sums
    oracles::Rng rng(207);
    for (int rank : {1, 2}) {
        const Mat w = rng.rank_matrix(2, rank);
        const Vec psi = reshape_to_state(w);
        const Mat gamma = rng.matrix(2, 2);
        const Mat lower = cstar_adjoint(gamma, psi).adjoint();  // the un-daggered adjoint map
        Vec lhs = Vec::Zero(4), rhs = Vec::Zero(4);
        const Mat proj = range_projector(w);
        const Mat pg = proj * gamma;
        for (int i = 0; i < 2; ++i)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    lhs[2 * i + a] += lower(a, b) * psi[2 * i + b];
                    rhs[2 * i + a] += pg(i, b) * psi[2 * b + a];
                }
        REQUIRE(max_abs(Vec(lhs - rhs)) < 1e-10);
    }
}

TEST_CASE("nlse_rhs reduces to the closed-system generator at zero rate") {
    oracles::Rng rng(211);
    const Mat h = rng.hermitian(2);
    const LindbladModel m = constant_model(h, {rng.matrix(2, 2)}, {0.0});
    const Vec psi = reshape_to_state(rng.matrix(2, 2));
    const Vec dpsi = nlse_rhs(m, psi, 0.0);
    const Vec expect = Complex(0, -1) * (kron(h, Mat::Identity(2, 2)) * psi);
    REQUIRE(max_abs(Vec(dpsi - expect)) < 1e-12);
}

TEST_CASE("nlse_rhs on a rank-one state matches the pure-state reduction") {
    oracles::Rng rng(213);
    const Mat h = rng.hermitian(2);
    const Mat g = rng.matrix(2, 2);
    const double gamma = 0.3;
    const LindbladModel m = constant_model(h, {g}, {gamma});
    const Vec psi_sys = rng.state(2);
    Vec xi = Vec::Zero(2);
    xi[1] = 1;
    const Mat w = psi_sys * xi.adjoint();
    const Vec dpsi = nlse_rhs(m, reshape_to_state(w), 0.0);
    // i psi' = (H^eff psi + (i/2) gamma <G^dag> G psi) (x) xi
    const Mat heff = h - Complex(0, 0.5) * gamma * (g.adjoint() * g);
    const Complex gdag = std::conj((psi_sys.adjoint() * g * psi_sys)(0, 0));
    const Vec sys = Complex(0, -1) * (heff * psi_sys) + 0.5 * gamma * gdag * (g * psi_sys);
    const Mat expect_w = sys * xi.adjoint();
    REQUIRE(max_abs(Vec(dpsi - reshape_to_state(expect_w))) < 1e-12);
}

TEST_CASE("instantaneous consistency with the Lindblad generator") {
    oracles::Rng rng(217);
    const Mat h = rng.hermitian(2);
    const LindbladModel m = constant_model(h, {rng.matrix(2, 2), rng.matrix(2, 2)}, {0.2, 0.4});
    const Mat w = rng.matrix(2, 2);
    const Vec psi = reshape_to_state(w);
    const Mat wdot = reshape_to_operator(nlse_rhs(m, psi, 0.0));
    const Mat rho_dot = wdot * w.adjoint() + w * wdot.adjoint();
    REQUIRE(max_abs(Mat(rho_dot - lindblad_rhs(m, 0.0, Mat(w * w.adjoint())))) < 1e-10);
}

TEST_CASE("purify_initial") {
    Mat pure = Mat::Zero(2, 2);
    pure(0, 0) = 1;
    Vec e00 = Vec::Zero(4);
    e00[0] = 1;
    REQUIRE(max_abs(Vec(purify_initial(pure) - e00)) < 1e-12);

    Vec bell(4);
    bell << 1 / std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0);
    REQUIRE(max_abs(Vec(purify_initial(Mat(0.5 * Mat::Identity(2, 2))) - bell)) < 1e-12);

    const Mat rho0 = benchmark_initial_state(1e-5);
    REQUIRE(max_abs(Mat(partial_trace_ancilla(purify_initial(rho0)) - rho0)) < 1e-12);
}

TEST_CASE("closed-system purified propagation is exact unitary rotation") {
    oracles::Rng rng(219);
    const Mat h = rng.hermitian(2);
    const LindbladModel m = constant_model(h, {}, {});
    const Mat rho0 = rng.density(2, 2);
    const Vec psi0 = purify_initial(rho0);
    const TimeGrid grid{0.0, 3.0, 60};
    const auto traj = propagate_nlse(m, psi0, grid);
    REQUIRE_FALSE(traj.truncated);
    for (int i = 0; i <= grid.steps; i += 15) {
        const Mat u = matrix_exp(Complex(0, -grid.time(i)) * h);
        const Vec expect = kron(u, Mat::Identity(2, 2)) * psi0;
        REQUIRE(max_abs(Vec(traj.states[i].psi - expect)) < 1e-10);
    }
}

TEST_CASE("purified trajectory matches Lindblad through the partial trace") {
    // stronger rates than the benchmark so the comparison is nontrivial
    LindbladModel m = two_level_model(paper_schedule(), 0.02, 0.05);
    const Mat rho0 = benchmark_initial_state(1e-3);
    const Vec psi0 = purify_initial(rho0);

    auto gap = [&](int steps) {
        const TimeGrid grid{0.0, 20.0, steps};
        const auto lind = propagate_lindblad(m, rho0, grid);
        const auto pur = propagate_nlse(m, psi0, grid);
        REQUIRE_FALSE(pur.truncated);
        double g = 0.0;
        for (int i = 0; i <= steps; ++i)
            g = std::max(g, max_abs(Mat(lind.states[i] - partial_trace_ancilla(pur.states[i].psi))));
        return g;
    };
    const double g1 = gap(100), g2 = gap(200);
    REQUIRE(g2 < g1);
    const double factor = g1 / g2;
    REQUIRE(factor > 1.8);
    REQUIRE(factor < 6.0);
}

TEST_CASE("gauge covariance under constant ancilla rotations") {
    oracles::Rng rng(223);
    LindbladModel m = two_level_model(paper_schedule(), 0.02, 0.05);
    const Mat rho0 = benchmark_initial_state(1e-3);
    const Mat w0 = hermitian_sqrt(rho0);
    const Mat k = rng.unitary(2);
    const TimeGrid grid{0.0, 10.0, 100};
    const auto base = propagate_nlse(m, reshape_to_state(w0), grid);
    const auto rotated = propagate_nlse(m, reshape_to_state(Mat(w0 * k)), grid);
    for (int i = 0; i <= grid.steps; i += 25)
        REQUIRE(max_abs(Mat(rotated.states[i].w - base.states[i].w * k)) < 1e-9);
}

TEST_CASE("factor rank tracks density rank along the benchmark") {
    LindbladModel m = two_level_model();
    const Vec psi0 = purify_initial(benchmark_initial_state());
    const TimeGrid grid{0.0, 50.0, 250};
    const auto traj = propagate_nlse(m, psi0, grid);
    REQUIRE_FALSE(traj.truncated);
    for (int i = 0; i <= grid.steps; i += 50) {
        const Mat rho = partial_trace_ancilla(traj.states[i].psi);
        const RVec p = hermitian_eigen(rho).eigenvalues;
        int rank_rho = 0;
        for (int j = 0; j < 2; ++j)
            if (p[j] > 1e-20 * p[1]) ++rank_rho;
        REQUIRE(numerical_rank(traj.states[i].w) == rank_rho);
    }
    // the exact flow preserves the norm on regular strata; discretization
    // may only shed a little
    for (const auto& s : traj.states) REQUIRE(s.psi.norm() <= 1.0 + 1e-8);
    REQUIRE(traj.max_norm_drift < 1e-5);
}

TEST_CASE("zero-rate limit agrees with Lindblad on the driven schedule") {
    LindbladModel m = two_level_model(paper_schedule(), 0.0, 0.0);
    const Mat rho0 = benchmark_initial_state(1e-3);
    const TimeGrid grid{0.0, 30.0, 300};
    const auto lind = propagate_lindblad(m, rho0, grid);
    const auto pur = propagate_nlse(m, purify_initial(rho0), grid);
    for (int i = 0; i <= grid.steps; i += 30)
        REQUIRE(max_abs(Mat(lind.states[i] - pur.states[i].w * pur.states[i].w.adjoint())) < 1e-9);
}

TEST_CASE("rank collapse truncates with a diagnostic") {
    Mat sm(2, 2);
    sm << 0, 0, 2, 0;
    const LindbladModel m = constant_model(Mat::Zero(2, 2), {sm}, {2.0});
    Mat rho0(2, 2);
    rho0 << 0.5, 0, 0, 0.5;
    NlseOptions opts;
    opts.rank_tol = 1e-4;  // collapse once the factor is numerically rank one
    const auto traj = propagate_nlse(m, purify_initial(rho0), {0.0, 6.0, 600}, opts);
    REQUIRE(traj.truncated);
    REQUIRE_FALSE(traj.message.empty());
    REQUIRE(traj.states.size() < 601);
}
