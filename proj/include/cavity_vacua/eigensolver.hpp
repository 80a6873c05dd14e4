#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace cavity_vacua {

struct SolverOptions {
    // Dense diagonalization at or below this dimension.
    Eigen::Index dense_threshold = 600;
    // Dense fallback after iterative failure below this dimension.
    Eigen::Index dense_fallback = 5000;
    // Residual target relative to max(1, |E|).
    double tolerance = 1e-10;
    int max_restarts = 6;
};

struct EigenPairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    Eigen::VectorXd residuals;
    bool converged = false;
    std::string method;
};

namespace detail {

inline Eigen::VectorXd start_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.5 * std::sin(0.7 * double(i) + 0.3);
    return v.normalized();
}

inline EigenPairs dense_lowest(const Eigen::SparseMatrix<double>& H, int k) {
    Eigen::MatrixXd M(H);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    if (es.info() != Eigen::Success) throw SolverError("dense eigensolver failed");
    const int kk = std::min<int>(k, int(M.rows()));
    EigenPairs r;
    r.values = es.eigenvalues().head(kk);
    r.vectors = es.eigenvectors().leftCols(kk);
    r.residuals.resize(kk);
    for (int i = 0; i < kk; ++i) r.residuals(i) = (H * r.vectors.col(i) - r.values(i) * r.vectors.col(i)).norm();
    r.converged = true;
    r.method = "dense";
    return r;
}

// Lanczos with full reorthogonalization. Returns the basis and the
// tridiagonal projection; stops early on invariant subspaces.
template <class Apply>
void lanczos(Apply&& apply, const Eigen::VectorXd& v0, int m, Eigen::MatrixXd& V, Eigen::MatrixXd& T) {
    const Eigen::Index n = v0.size();
    V.resize(n, m);
    T = Eigen::MatrixXd::Zero(m, m);
    V.col(0) = v0.normalized();
    Eigen::VectorXd w(n);
    int steps = m;
    for (int j = 0; j < m; ++j) {
        apply(V.col(j), w);
        // two passes of classical Gram-Schmidt
        for (int pass = 0; pass < 2; ++pass) {
            Eigen::VectorXd c = V.leftCols(j + 1).transpose() * w;
            w -= V.leftCols(j + 1) * c;
            T(j, j) += c(j);
        }
        if (j + 1 == m) break;
        double b = w.norm();
        if (b < 1e-13 * std::max(1.0, std::abs(T(j, j)))) {
            steps = j + 1;
            break;
        }
        T(j + 1, j) = b;
        T(j, j + 1) = b;
        V.col(j + 1) = w / b;
    }
    V.conservativeResize(n, steps);
    T.conservativeResize(steps, steps);
}

}  // namespace detail

// Lowest k eigenpairs of a real symmetric matrix.
inline EigenPairs lowest_eigenpairs(const Eigen::SparseMatrix<double>& H, int k, const SolverOptions& opt = {}) {
    using SpMat = Eigen::SparseMatrix<double>;
    const Eigen::Index n = H.rows();
    if (n == 0 || H.cols() != n) throw ArgumentError("matrix must be square and non-empty");
    if (k < 1) throw ArgumentError("k must be positive");
    if (n <= opt.dense_threshold || n <= 4 * k) return detail::dense_lowest(H, k);

    auto apply_h = [&](const auto& x, Eigen::VectorXd& y) { y.noalias() = H * x; };

    // Ritz estimate of the lowest eigenvalue
    Eigen::MatrixXd V, T;
    detail::lanczos(apply_h, detail::start_vector(n), int(std::min<Eigen::Index>(n, 40)), V, T);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(T);
    const double theta = small.eigenvalues()(0);
    const double scale = std::max(1.0, std::abs(theta));

    // A successful Cholesky factorization proves sigma lies below the spectrum.
    SpMat I(n, n);
    I.setIdentity();
    Eigen::SimplicialLLT<SpMat> llt;
    double shift = std::max(1e-4 * scale, 1e-3);
    double sigma = theta - shift;
    for (int attempt = 0;; ++attempt) {
        llt.compute(H - sigma * I);
        if (llt.info() == Eigen::Success) break;
        if (attempt > 12) throw SolverError("could not place shift below the spectrum");
        shift *= 8;
        sigma = theta - shift;
    }
    auto apply_inv = [&](const auto& x, Eigen::VectorXd& y) { y = llt.solve(Eigen::VectorXd(x)); };

    const int m = int(std::clamp<Eigen::Index>(Eigen::Index(2e7) / n, 40, 250));
    const int kk = int(std::min<Eigen::Index>(k, n));
    Eigen::VectorXd v0 = detail::start_vector(n);
    EigenPairs best;
    for (int restart = 0; restart <= opt.max_restarts; ++restart) {
        detail::lanczos(apply_inv, v0, int(std::min<Eigen::Index>(m, n)), V, T);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        const Eigen::Index steps = T.rows();
        const int got = int(std::min<Eigen::Index>(kk, steps));
        EigenPairs r;
        r.values.resize(got);
        r.vectors.resize(n, got);
        r.residuals.resize(got);
        for (int i = 0; i < got; ++i) {
            // largest eigenvalues of the inverse are the lowest of H
            Eigen::VectorXd x = V * es.eigenvectors().col(steps - 1 - i);
            x.normalize();
            Eigen::VectorXd hx = H * x;
            double e = x.dot(hx);
            r.values(i) = e;
            r.vectors.col(i) = x;
            r.residuals(i) = (hx - e * x).norm();
        }
        // order ascending
        std::vector<int> idx(got);
        for (int i = 0; i < got; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return r.values(a) < r.values(b); });
        EigenPairs s;
        s.values.resize(got);
        s.vectors.resize(n, got);
        s.residuals.resize(got);
        for (int i = 0; i < got; ++i) {
            s.values(i) = r.values(idx[i]);
            s.vectors.col(i) = r.vectors.col(idx[i]);
            s.residuals(i) = r.residuals(idx[i]);
        }
        s.method = "shift-invert lanczos";
        s.converged = got == kk;
        for (int i = 0; i < got; ++i)
            if (s.residuals(i) > opt.tolerance * std::max(1.0, std::abs(s.values(i)))) s.converged = false;
        best = s;
        if (s.converged) return s;
        v0 = s.vectors.rowwise().sum();
        if (v0.norm() == 0.0) v0 = detail::start_vector(n);
    }
    if (n < opt.dense_fallback) return detail::dense_lowest(H, k);
    best.converged = false;
    throw SolverError("iterative eigensolver did not converge");
}

}  // namespace cavity_vacua
