// Dense complex linear algebra kernel shared by all simulation modules:
// Kronecker products, the reshaping isomorphism between operators and
// purified vectors, partial traces, spectral decompositions, Hermitian
// square roots, the SVD-based pseudo-inverse and the matrix exponential.
//
// Conventions fixed here and used everywhere else:
//  * purified vectors are the row-major flattening of their operator
//    factor, psi[i*n + a] = W(i, a);
//  * with that flattening, (A (x) B) psi(W) = psi(A W B^T).
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace lindsim {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

inline constexpr double kDefaultRankTol = 1e-10;

// max_{ij} |M_ij|, the entrywise norm used for all trajectory gap measures.
inline double max_abs(const Mat& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double max_abs(const Vec& v) {
    return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// psi(W) = W^{i a} zeta_i (x) xi_a, row-major flattening of a square W.
inline Vec reshape_to_state(const Mat& w) {
    if (w.rows() != w.cols()) throw std::invalid_argument("reshape_to_state: W must be square");
    const Eigen::Index n = w.rows();
    Vec psi(n * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index a = 0; a < n; ++a) psi[i * n + a] = w(i, a);
    return psi;
}

inline Mat reshape_to_operator(const Vec& psi) {
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(double(psi.size()))));
    if (n * n != psi.size()) throw std::invalid_argument("reshape_to_operator: length is not a perfect square");
    Mat w(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index a = 0; a < n; ++a) w(i, a) = psi[i * n + a];
    return w;
}

// rho^i_j = psi^{i a} conj(psi^{j a}); equals W W^dagger for psi = psi(W).
inline Mat partial_trace_ancilla(const Vec& psi) {
    const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(double(psi.size()))));
    if (n * n != psi.size()) throw std::invalid_argument("partial_trace_ancilla: length is not a perfect square");
    Mat rho = Mat::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                rho(i, j) += psi[i * n + a] * std::conj(psi[j * n + a]);
    return rho;
}

struct SpectralDecomposition {
    RVec eigenvalues;  // ascending
    Mat eigenvectors;  // unitary, columns match eigenvalues
};

inline SpectralDecomposition hermitian_eigen(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    if (es.info() != Eigen::Success) throw std::runtime_error("hermitian_eigen: eigensolver failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

// Hermitian square root through the spectral decomposition. Eigenvalues in
// [-neg_tol, 0) are clamped to zero; anything more negative is rejected.
inline Mat hermitian_sqrt(const Mat& m, double neg_tol = 1e-10) {
    auto [vals, vecs] = hermitian_eigen(m);
    RVec s(vals.size());
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (vals[i] < -neg_tol)
            throw std::invalid_argument("hermitian_sqrt: matrix has a negative eigenvalue beyond tolerance");
        s[i] = std::sqrt(std::max(vals[i], 0.0));
    }
    return vecs * s.asDiagonal() * vecs.adjoint();
}

// Thin SVD W = U S V^dagger obtained from the eigen-decomposition of the
// Gram matrix W^dagger W; columns of U are recovered as W v_i / s_i.
struct ThinSvd {
    RVec singular_values;  // descending
    Mat u, v;              // only columns above the rank cutoff
    int rank = 0;
};

inline ThinSvd svd_from_gram(const Mat& w, double rank_tol = kDefaultRankTol) {
    auto [vals, vecs] = hermitian_eigen(w.adjoint() * w);
    const Eigen::Index n = vals.size();
    const double lam_max = vals.size() ? std::max(vals[n - 1], 0.0) : 0.0;
    // Exact zeros of W surface as Gram eigenvalues of size ~eps*lam_max, so
    // the squared cutoff needs that noise floor in addition to rank_tol.
    const double noise_floor = 8.0 * n * std::numeric_limits<double>::epsilon() * lam_max;
    const double cutoff_sq = std::max(rank_tol * rank_tol * lam_max, noise_floor);
    ThinSvd out;
    out.singular_values.resize(n);
    out.u.resize(w.rows(), n);
    out.v.resize(w.cols(), n);
    int r = 0;
    for (Eigen::Index k = n - 1; k >= 0; --k) {  // descending
        if (vals[k] <= cutoff_sq || vals[k] <= 0.0) break;
        const double s = std::sqrt(vals[k]);
        out.singular_values[r] = s;
        out.v.col(r) = vecs.col(k);
        out.u.col(r) = w * vecs.col(k) / s;
        ++r;
    }
    out.rank = r;
    out.singular_values.conservativeResize(r);
    out.u.conservativeResize(Eigen::NoChange, r);
    out.v.conservativeResize(Eigen::NoChange, r);
    return out;
}

// Moore-Penrose pseudo-inverse; singular values below rank_tol * s_max are
// treated as exact zeros, so W^* W = 1 - P_ker and W W^* = P_ran.
inline Mat pseudo_inverse(const Mat& w, double rank_tol = kDefaultRankTol) {
    const ThinSvd svd = svd_from_gram(w, rank_tol);
    Mat out = Mat::Zero(w.cols(), w.rows());
    for (int k = 0; k < svd.rank; ++k)
        out += (1.0 / svd.singular_values[k]) * svd.v.col(k) * svd.u.col(k).adjoint();
    return out;
}

inline int numerical_rank(const Mat& w, double rank_tol = kDefaultRankTol) {
    return svd_from_gram(w, rank_tol).rank;
}

// Orthogonal projection onto Ran W.
inline Mat range_projector(const Mat& w, double rank_tol = kDefaultRankTol) {
    const ThinSvd svd = svd_from_gram(w, rank_tol);
    return svd.u * svd.u.adjoint();
}

// Scaling-and-squaring Pade exponential (relative error ~1e-13 for moderate norms).
inline Mat matrix_exp(const Mat& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("matrix_exp: matrix must be square");
    return a.exp();
}

inline bool is_hermitian(const Mat& m, double tol = 1e-10) {
    return max_abs(Mat(m - m.adjoint())) <= tol;
}

inline Complex trace(const Mat& m) { return m.trace(); }

}  // namespace lindsim
