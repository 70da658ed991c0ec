#include <catch2/catch_amalgamated.hpp>

#include "lindsim/lindblad.hpp"
#include "lindsim/spinmodel.hpp"
#include "lindsim/unravel.hpp"
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

double projector_distance(const Vec& a, const Vec& b) {
    return lindsim::max_abs(Mat(a * a.adjoint() - b * b.adjoint()));
}

}  // namespace

TEST_CASE("closest-pure variants reduce to the unitary flow at zero rate") {
    oracles::Rng rng(301);
    const Mat h = rng.hermitian(2);
    const LindbladModel m = constant_model(h, {rng.matrix(2, 2)}, {0.0});
    const Vec psi0 = rng.state(2);
    const TimeGrid grid{0.0, 5.0, 5000};
    const auto shifted = propagate_closest_pure(m, psi0, grid, true);
    const auto unshifted = propagate_closest_pure(m, psi0, grid, false);
    for (int i = 0; i <= grid.steps; i += 1000) {
        const Vec exact = matrix_exp(Complex(0, -grid.time(i)) * h) * psi0;
        REQUIRE(projector_distance(shifted.states[i], exact) < 1e-9);
        REQUIRE(projector_distance(unshifted.states[i], exact) < 1e-9);
    }
}

TEST_CASE("shifted closest-pure drift conserves the norm") {
    LindbladModel m = two_level_model();
    Vec psi0(2);
    psi0 << std::sqrt(1e-5), std::sqrt(1.0 - 1e-5);
    const auto traj = propagate_closest_pure(m, psi0, {0.0, 100.125, 445}, true);
    for (const Vec& psi : traj.states) REQUIRE(std::abs(psi.norm() - 1.0) < 1e-6);
}

TEST_CASE("closest-pure benchmark trajectory shadows the isolated system") {
    LindbladModel open_model = two_level_model();
    LindbladModel closed = two_level_model(paper_schedule(), 0.0, 0.0);
    Vec psi0(2);
    psi0 << std::sqrt(1e-5), std::sqrt(1.0 - 1e-5);
    const TimeGrid grid{0.0, 100.125, 445};
    const auto open_traj = propagate_closest_pure(open_model, psi0, grid, true);
    const auto closed_traj = propagate_closest_pure(closed, psi0, grid, true);
    double dist = 0.0;
    for (int i = 0; i <= grid.steps; ++i)
        dist = std::max(dist, projector_distance(Vec(open_traj.states[i].normalized()),
                                                 Vec(closed_traj.states[i].normalized())));
    REQUIRE(dist < 0.15);  // rates 1e-3 barely bend the pure trajectory
}

TEST_CASE("PDP without dissipation never jumps") {
    oracles::Rng rng(307);
    const Mat h = rng.hermitian(2);
    const LindbladModel m = constant_model(h, {rng.matrix(2, 2)}, {0.0});
    const Vec psi0 = rng.state(2);
    const auto ens = propagate_pdp(m, psi0, {0.0, 2.0, 2000}, {5, 99});
    REQUIRE(ens.jump_count == 0);
    const Vec exact = matrix_exp(Complex(0, -2.0) * h) * psi0;
    for (const auto& traj : ens.states) REQUIRE(projector_distance(traj.back(), exact) < 1e-9);
}

TEST_CASE("PDP ensemble reproduces the decay law") {
    Mat sm(2, 2);
    sm << 0, 0, 2, 0;
    const double gamma = 0.05;
    const LindbladModel m = constant_model(Mat::Zero(2, 2), {sm}, {gamma});
    Vec psi0(2);
    psi0 << 1, 0;
    const TimeGrid grid{0.0, 5.0, 50};
    const int n_traj = 2000;
    const auto ens = propagate_pdp(m, psi0, grid, {n_traj, 12345});
    REQUIRE_FALSE(ens.step_size_warning);

    const auto lind = propagate_lindblad(m, Mat(psi0 * psi0.adjoint()), grid);
    for (int i = 10; i <= 50; i += 10) {
        const double pop = ensemble_density(ens, i)(0, 0).real();
        const double expect = lind.states[i](0, 0).real();  // ~ exp(-4 gamma t)
        const double se = std::sqrt(expect * (1.0 - expect) / n_traj) + 1e-6;
        REQUIRE(std::abs(pop - expect) < 3.0 * se + 0.01);
    }
}

TEST_CASE("PDP trajectories stay normalized") {
    LindbladModel m = two_level_model(paper_schedule(), 0.05, 0.1);
    Vec psi0(2);
    psi0 << 0, 1;
    const auto ens = propagate_pdp(m, psi0, {0.0, 10.0, 100}, {10, 7});
    for (const auto& traj : ens.states)
        for (const Vec& psi : traj) REQUIRE(std::abs(psi.norm() - 1.0) < 1e-12);
}

TEST_CASE("QSD without dissipation is deterministic and unitary") {
    oracles::Rng rng(311);
    const Mat h = rng.hermitian(2);
    const LindbladModel m = constant_model(h, {rng.matrix(2, 2)}, {0.0});
    const Vec psi0 = rng.state(2);
    const auto ens = propagate_qsd(m, psi0, {0.0, 2.0, 2000}, {3, 1});
    const Vec exact = matrix_exp(Complex(0, -2.0) * h) * psi0;
    for (const auto& traj : ens.states) REQUIRE(projector_distance(traj.back(), exact) < 1e-9);
}

TEST_CASE("QSD dephasing ensemble matches the Lindblad coherence decay") {
    const double gamma = 0.05;
    const LindbladModel m = constant_model(Mat::Zero(2, 2), {pauli(3)}, {gamma});
    Vec psi0(2);
    psi0 << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
    const TimeGrid grid{0.0, 5.0, 500};
    const int n_traj = 2000;
    const auto ens = propagate_qsd(m, psi0, grid, {n_traj, 777, 50});

    for (std::size_t s = 2; s < ens.times.size(); s += 4) {
        const double t = ens.times[s];
        const double coh = ensemble_density(ens, static_cast<int>(s))(0, 1).real();
        const double expect = 0.5 * std::exp(-2.0 * gamma * t);
        const double se = 0.5 / std::sqrt(double(n_traj));
        REQUIRE(std::abs(coh - expect) < 3.0 * se + 0.01);
    }
}

TEST_CASE("identical master seeds give bit-identical ensembles") {
    LindbladModel m = two_level_model(paper_schedule(), 0.05, 0.1);
    Vec psi0(2);
    psi0 << 0, 1;
    const TimeGrid grid{0.0, 5.0, 50};
    const auto a = propagate_pdp(m, psi0, grid, {8, 42});
    const auto b = propagate_pdp(m, psi0, grid, {8, 42});
    const auto c = propagate_pdp(m, psi0, grid, {8, 43});
    bool all_equal = true, any_diff = false;
    for (int traj = 0; traj < 8; ++traj)
        for (std::size_t s = 0; s < a.states[traj].size(); ++s) {
            if (a.states[traj][s] != b.states[traj][s]) all_equal = false;
            if (a.states[traj][s] != c.states[traj][s]) any_diff = true;
        }
    REQUIRE(all_equal);
    REQUIRE(any_diff);

    const auto qa = propagate_qsd(m, psi0, grid, {8, 42});
    const auto qb = propagate_qsd(m, psi0, grid, {8, 42});
    for (int traj = 0; traj < 8; ++traj)
        for (std::size_t s = 0; s < qa.states[traj].size(); ++s)
            REQUIRE(qa.states[traj][s] == qb.states[traj][s]);
}

TEST_CASE("ensemble density of explicit ensembles") {
    TrajectoryEnsemble ens;
    ens.times = {0.0};
    Vec e1(2), e2(2);
    e1 << 1, 0;
    e2 << 0, 1;
    ens.states = {{e1}};
    REQUIRE(max_abs(Mat(ensemble_density(ens, 0) - e1 * e1.adjoint())) == 0.0);

    ens.states = {{e1}, {e2}};
    const RVec evals = hermitian_eigen(ensemble_density(ens, 0)).eigenvalues;
    REQUIRE(evals[0] == Catch::Approx(0.5));
    REQUIRE(evals[1] == Catch::Approx(0.5));
}

TEST_CASE("oversized steps raise the jump probability warning") {
    Mat sm(2, 2);
    sm << 0, 0, 2, 0;
    const LindbladModel m = constant_model(Mat::Zero(2, 2), {sm}, {0.5});
    Vec psi0(2);
    psi0 << 1, 0;
    const auto ens = propagate_pdp(m, psi0, {0.0, 1.0, 10}, {4, 3});  // p ~ 0.2 per step
    REQUIRE(ens.step_size_warning);
    REQUIRE(ens.max_step_jump_probability > 0.1);
}

TEST_CASE("Monte Carlo error shrinks toward the Lindblad solution") {
    // cheap version of the statistical-consistency sweep: median over seeds
    // decreases from N=20 to N=200
    Mat sm(2, 2);
    sm << 0, 0, 2, 0;
    const double gamma = 0.05;
    const LindbladModel m = constant_model(pauli(1), {sm}, {gamma});
    Vec psi0(2);
    psi0 << 1, 0;
    const TimeGrid grid{0.0, 4.0, 80};
    const auto lind = propagate_lindblad(m, Mat(psi0 * psi0.adjoint()), grid);

    auto median_err = [&](int n_traj) {
        std::vector<double> errs;
        for (std::uint64_t seed = 0; seed < 9; ++seed) {
            const auto ens = propagate_pdp(m, psi0, grid, {n_traj, seed});
            double e = 0.0;
            for (int s : {20, 40, 80})
                e = std::max(e, max_abs(Mat(ensemble_density(ens, s) - lind.states[s])));
            errs.push_back(e);
        }
        std::sort(errs.begin(), errs.end());
        return errs[errs.size() / 2];
    };
    REQUIRE(median_err(200) < median_err(20));
}
