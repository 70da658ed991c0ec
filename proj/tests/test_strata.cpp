#include <catch2/catch_amalgamated.hpp>

#include "lindsim/strata.hpp"
#include "oracles.hpp"

using namespace lindsim;

TEST_CASE("microcanonical and pure-state vertices") {
    const SpectralProfile micro = project_simplex(Mat(0.5 * Mat::Identity(2, 2)));
    REQUIRE(micro.probabilities[0] == Catch::Approx(0.5));
    REQUIRE(micro.cluster_sizes == std::vector<int>{2});
    REQUIRE(micro.is_regular);
    REQUIRE(classify_stratum(micro).fiber_description == "{1}");

    Mat pure = Mat::Zero(2, 2);
    pure(1, 1) = 1.0;
    const SpectralProfile p = project_simplex(pure);
    REQUIRE_FALSE(p.is_regular);
    REQUIRE(classify_stratum(p).fiber_description == "CP^1");
}

TEST_CASE("near-pure benchmark initial state is regular") {
    const double eps = 1e-5;
    Mat rho(2, 2);
    rho << eps, eps, eps, 1 - eps;
    const SpectralProfile p = project_simplex(rho);
    // closed-form 2x2 eigenvalues as oracle
    const double p_small = 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * eps * (1.0 - 2.0 * eps)));
    REQUIRE(p.probabilities[0] == Catch::Approx(p_small).epsilon(1e-10));
    REQUIRE(p.probabilities[0] > 0);
    REQUIRE(p.is_regular);
    REQUIRE(classify_stratum(p).fiber_description == "Fl(2,C)");
}

TEST_CASE("table of fibers for n <= 4") {
    auto profile_of = [](std::initializer_list<double> diag) {
        const Eigen::Index n = static_cast<Eigen::Index>(diag.size());
        Mat rho = Mat::Zero(n, n);
        Eigen::Index i = 0;
        for (double d : diag) rho(i, i) = d, ++i;
        return project_simplex(rho);
    };
    REQUIRE(classify_stratum(profile_of({1 / 3., 1 / 3., 1 / 3.})).fiber_description == "{1}");
    REQUIRE(classify_stratum(profile_of({0.2, 0.3, 0.5})).fiber_description == "Fl(3,C)");
    REQUIRE(classify_stratum(profile_of({0.25, 0.25, 0.5})).fiber_description == "CP^2");
    REQUIRE(classify_stratum(profile_of({0.1, 0.1, 0.4, 0.4})).fiber_description == "Gr_2(C^4)");
    REQUIRE(classify_stratum(profile_of({0.1, 0.1, 0.3, 0.5})).fiber_description == "U(4)/(U(2)xT^2)");
    REQUIRE(classify_stratum(profile_of({0.1, 0.2, 0.3, 0.4})).fiber_description == "Fl(4,C)");
    REQUIRE(classify_stratum(profile_of({0., 0., 0., 1.})).fiber_description == "CP^3");
    // beyond the table: generic quotient string
    REQUIRE(classify_stratum(profile_of({0.1, 0.1, 0.2, 0.2, 0.4})).fiber_description ==
            "U(5)/(U(1)xU(2)^2)");
}

TEST_CASE("projection is invariant under conjugation") {
    oracles::Rng rng(61);
    for (int trial = 0; trial < 5; ++trial) {
        const Mat rho = rng.density(3, 3);
        const Mat u = rng.unitary(3);
        const SpectralProfile a = project_simplex(rho);
        const SpectralProfile b = project_simplex(Mat(u * rho * u.adjoint()));
        REQUIRE(max_abs(Mat((a.probabilities - b.probabilities).asDiagonal())) < 1e-8);
        REQUIRE(a.cluster_sizes == b.cluster_sizes);
    }
}

TEST_CASE("re-projection of a reconstructed profile is exact") {
    oracles::Rng rng(67);
    const Mat rho = rng.density(4, 4);
    const SpectralProfile p = project_simplex(rho);
    Mat diag = Mat::Zero(4, 4);
    for (int i = 0; i < 4; ++i) diag(i, i) = p.probabilities[i];
    const SpectralProfile q = project_simplex(diag);
    for (int i = 0; i < 4; ++i) REQUIRE(q.probabilities[i] == p.probabilities[i]);  // bitwise
}

TEST_CASE("degeneracy profile bookkeeping") {
    Mat rho = Mat::Zero(4, 4);
    rho.diagonal() << 0.1, 0.1, 0.4, 0.4;
    const SpectralProfile p = project_simplex(rho);
    REQUIRE(p.degeneracy_profile == std::vector<std::pair<int, int>>{{2, 2}});
    int total = 0;
    for (auto [q, k] : p.degeneracy_profile) total += q * k;
    REQUIRE(total == 4);
}

TEST_CASE("invalid inputs are rejected") {
    Mat nonherm(2, 2);
    nonherm << 0.5, 0.3, 0.0, 0.5;
    REQUIRE_THROWS_AS(project_simplex(nonherm), std::invalid_argument);
    Mat offtrace = 0.7 * Mat::Identity(2, 2);
    REQUIRE_THROWS_AS(project_simplex(offtrace), std::invalid_argument);
}

TEST_CASE("profile changes along a trajectory are flagged") {
    std::vector<Mat> rhos;
    for (double p : {0.3, 0.2, 0.1, 0.0, 0.0}) {
        Mat rho = Mat::Zero(2, 2);
        rho.diagonal() << p, 1 - p;
        rhos.push_back(rho);
    }
    const auto changes = profile_change_points(rhos);
    REQUIRE(changes == std::vector<int>{3});
}
