// Projection of density matrices onto the eigenvalue simplex and
// classification of the degeneracy strata. Strata are reported as labels
// only; no manifold structure is represented.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "algebra.hpp"

namespace lindsim {

inline constexpr double kDefaultDegeneracyTol = 1e-8;

struct SpectralProfile {
    RVec probabilities;                               // ascending, sum 1
    std::vector<int> cluster_sizes;                   // degeneracy blocks, in eigenvalue order
    std::vector<std::pair<int, int>> degeneracy_profile;  // (multiplicity q_j, count k_j), q ascending
    bool is_regular = true;                           // true iff p_1 > degeneracy_tol
};

// pi_D: eigenvalues sorted ascending, adjacent values closer than
// degeneracy_tol merged into one block (transitive closure over gaps).
inline SpectralProfile project_simplex(const Mat& rho, double degeneracy_tol = kDefaultDegeneracyTol) {
    if (rho.rows() != rho.cols()) throw std::invalid_argument("project_simplex: matrix must be square");
    const Eigen::Index n = rho.rows();
    if (!is_hermitian(rho, 1e-8)) throw std::invalid_argument("project_simplex: matrix is not Hermitian");

    SpectralProfile profile;
    // Exactly diagonal input: sort the diagonal directly so that re-projecting
    // a reconstructed diag(profile) reproduces the profile bit for bit.
    bool diagonal = true;
    for (Eigen::Index i = 0; i < n && diagonal; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j && rho(i, j) != Complex(0, 0)) { diagonal = false; break; }
    if (diagonal) {
        RVec p = rho.diagonal().real();
        std::sort(p.begin(), p.end());
        profile.probabilities = p;
    } else {
        profile.probabilities = hermitian_eigen(rho).eigenvalues;
    }

    const double tr_err = std::abs(profile.probabilities.sum() - 1.0);
    if (tr_err > 1e-8) throw std::invalid_argument("project_simplex: trace differs from 1 beyond tolerance");
    if (profile.probabilities[0] < -1e-8) throw std::invalid_argument("project_simplex: matrix is not positive semidefinite");

    int block = 1;
    for (Eigen::Index i = 1; i <= n; ++i) {
        if (i < n && profile.probabilities[i] - profile.probabilities[i - 1] < degeneracy_tol) {
            ++block;
        } else {
            profile.cluster_sizes.push_back(block);
            block = 1;
        }
    }
    profile.is_regular = profile.probabilities[0] >= degeneracy_tol;

    // count distinct eigenvalues per multiplicity
    std::vector<std::pair<int, int>> counts;
    for (int q : profile.cluster_sizes) {
        bool found = false;
        for (auto& [qq, k] : counts)
            if (qq == q) { ++k; found = true; }
        if (!found) counts.emplace_back(q, 1);
    }
    std::sort(counts.begin(), counts.end());
    profile.degeneracy_profile = std::move(counts);
    return profile;
}

struct StratumLabel {
    SpectralProfile profile;
    std::string fiber_description;  // model manifold of pi_D^-1(sigma)
};

// Fiber of pi_D over the profile: U(n) / (U(q_1)^{k_1} x ... x U(q_l)^{k_l}).
// For n <= 4 the standard manifold names are used.
inline StratumLabel classify_stratum(const SpectralProfile& profile) {
    const int n = static_cast<int>(profile.probabilities.size());
    const auto& sizes = profile.cluster_sizes;
    const int blocks = static_cast<int>(sizes.size());

    std::string name;
    const bool all_simple = std::all_of(sizes.begin(), sizes.end(), [](int q) { return q == 1; });
    std::vector<int> sorted = sizes;
    std::sort(sorted.begin(), sorted.end());

    // vanishing eigenvalues merged into one cluster by the tolerance
    const bool pure_vertex =
        !profile.is_regular && blocks == 2 && sizes.back() == 1 &&
        profile.probabilities[n - 1] > 1.0 - 1e-6;

    if (blocks == 1) {
        name = "{1}";  // microcanonical-type point, full stabilizer
    } else if (pure_vertex) {
        name = "CP^" + std::to_string(n - 1);  // pure-state vertex
    } else if (all_simple && n <= 4) {
        name = "Fl(" + std::to_string(n) + ",C)";
    } else if (blocks == 2 && sorted[0] == 1 && n <= 4) {
        name = "CP^" + std::to_string(n - 1);
    } else if (n == 4 && blocks == 2 && sorted[0] == 2) {
        name = "Gr_2(C^4)";
    } else if (n == 4 && blocks == 3 && sorted == std::vector<int>{1, 1, 2}) {
        name = "U(4)/(U(2)xT^2)";
    } else {
        // generic quotient string, grouping equal multiplicities
        name = "U(" + std::to_string(n) + ")/(";
        for (std::size_t j = 0; j < profile.degeneracy_profile.size(); ++j) {
            const auto [q, k] = profile.degeneracy_profile[j];
            if (j) name += "x";
            name += "U(" + std::to_string(q) + ")";
            if (k > 1) name += "^" + std::to_string(k);
        }
        name += ")";
    }
    return {profile, name};
}

// Indices where the degeneracy profile changes along a trajectory of density
// matrices. Transitions are reported, never handled.
inline std::vector<int> profile_change_points(const std::vector<Mat>& rhos,
                                              double degeneracy_tol = kDefaultDegeneracyTol) {
    std::vector<int> changes;
    std::vector<int> prev;
    bool prev_regular = true;
    for (std::size_t i = 0; i < rhos.size(); ++i) {
        SpectralProfile p = project_simplex(rhos[i], degeneracy_tol);
        if (i > 0 && (p.cluster_sizes != prev || p.is_regular != prev_regular)) changes.push_back(static_cast<int>(i));
        prev = p.cluster_sizes;
        prev_regular = p.is_regular;
    }
    return changes;
}

}  // namespace lindsim
