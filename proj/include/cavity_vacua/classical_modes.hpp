#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"

namespace cavity_vacua::classical {

struct ClassicalParams {
    double omega0 = 1.0;
    double omega_c = 1.0;
    double omega_p = 0.0;
};

struct ModeDecomposition {
    Eigen::VectorXd eta_n;
    Eigen::MatrixXd modes;  // column n is c_n
    Eigen::VectorXd nu_n;
    Eigen::VectorXd omega_n_sq;
    double nu = 0.0;

    bool any_unstable() const { return (omega_n_sq.array() < 0.0).any(); }
};

inline void check(const ClassicalParams& p) {
    if (p.omega0 < 0.0 || p.omega_c < 0.0 || p.omega_p < 0.0)
        throw ArgumentError("frequencies must be non-negative");
}

inline ModeDecomposition decompose(const Eigen::MatrixXd& D, double nu, const ClassicalParams& p) {
    check(p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
    ModeDecomposition m;
    m.eta_n = es.eigenvalues();
    m.modes = es.eigenvectors();
    m.nu = nu;
    const double N = static_cast<double>(D.rows());
    Eigen::VectorXd s = m.modes.colwise().sum().transpose();
    m.nu_n = nu * s.array().square() / N;
    m.omega_n_sq = (p.omega0 * p.omega0 + m.eta_n.array() * p.omega_p * p.omega_p).matrix();
    return m;
}

inline ModeDecomposition decompose(const geometry::CouplingMatrix& c, const ClassicalParams& p) {
    return decompose(c.D, c.nu, p);
}

struct BrightBranches {
    double Omega_plus = 0.0;
    double Omega_minus = 0.0;
    double Omega_plus_sq = 0.0;
    double Omega_minus_sq = 0.0;
    // Omega_minus^2 < 0; Omega_minus then holds -sqrt(|Omega_minus^2|).
    bool imaginary = false;
};

inline BrightBranches bright_branches(const ClassicalParams& p, double eta, double nu) {
    check(p);
    double wd2 = p.omega0 * p.omega0 + eta * p.omega_p * p.omega_p;
    // a cancellation below rounding of its terms is an exact zero (critical point)
    const double terms = p.omega0 * p.omega0 + std::abs(eta) * p.omega_p * p.omega_p;
    if (std::abs(wd2) <= 8 * std::numeric_limits<double>::epsilon() * terms) wd2 = 0.0;
    const double wc2 = p.omega_c * p.omega_c;
    const double a = wd2 + wc2 + nu * p.omega_p * p.omega_p;
    const double disc = std::sqrt(std::max(0.0, a * a - 4.0 * wd2 * wc2));
    BrightBranches b;
    b.Omega_plus_sq = (a + disc) / 2;
    b.Omega_minus_sq = b.Omega_plus_sq > 0.0 ? wd2 * wc2 / b.Omega_plus_sq : (a - disc) / 2;
    b.Omega_plus = std::sqrt(std::max(0.0, b.Omega_plus_sq));
    b.imaginary = b.Omega_minus_sq < 0.0;
    b.Omega_minus = b.imaginary ? -std::sqrt(-b.Omega_minus_sq) : std::sqrt(b.Omega_minus_sq);
    return b;
}

struct SpectrumRoot {
    double omega_sq = 0.0;
    bool unstable = false;
    // Squared weight on the cavity coordinate.
    double photon_weight = 0.0;
    // Photon weight plus weight on the uniform dipole pattern.
    double bright_weight = 0.0;
};

// Normal-mode matrix of the coupled LC mode and dipole modes; its eigenvalues
// are the N+1 roots Omega^2 of the secular equation.
inline Eigen::MatrixXd dynamical_matrix(const ModeDecomposition& m, const ClassicalParams& p) {
    const Eigen::Index N = m.eta_n.size();
    Eigen::VectorXd kappa = p.omega_p * m.nu_n.array().sqrt().matrix();
    // keep the sign of each mode's overlap with the uniform vector
    Eigen::VectorXd s = m.modes.colwise().sum().transpose();
    for (Eigen::Index n = 0; n < N; ++n)
        if (s(n) < 0.0) kappa(n) = -kappa(n);
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(N + 1, N + 1);
    W.topLeftCorner(N, N) = m.omega_n_sq.asDiagonal();
    W.topLeftCorner(N, N) += kappa * kappa.transpose();
    W.topRightCorner(N, 1) = p.omega_c * kappa;
    W.bottomLeftCorner(1, N) = p.omega_c * kappa.transpose();
    W(N, N) = p.omega_c * p.omega_c;
    return W;
}

inline std::vector<SpectrumRoot> full_spectrum(const ModeDecomposition& m, const ClassicalParams& p) {
    check(p);
    const Eigen::Index N = m.eta_n.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dynamical_matrix(m, p));
    Eigen::VectorXd s = m.modes.colwise().sum().transpose();
    Eigen::VectorXd uniform = s / std::sqrt(double(N));
    std::vector<SpectrumRoot> out;
    for (Eigen::Index k = 0; k <= N; ++k) {
        const auto v = es.eigenvectors().col(k);
        SpectrumRoot r;
        r.omega_sq = es.eigenvalues()(k);
        r.unstable = r.omega_sq < 0.0;
        r.photon_weight = v(N) * v(N);
        double u = uniform.dot(v.head(N));
        r.bright_weight = r.photon_weight + u * u;
        out.push_back(r);
    }
    return out;
}

// Left side of the secular equation for Omega^2; vanishes at every root.
inline double secular_residual(const ModeDecomposition& m, const ClassicalParams& p, double Omega_sq) {
    double s = 0.0;
    for (Eigen::Index n = 0; n < m.eta_n.size(); ++n)
        s += m.nu_n(n) * p.omega_p * p.omega_p / (m.omega_n_sq(n) - Omega_sq);
    return (p.omega_c * p.omega_c - Omega_sq) - Omega_sq * s;
}

inline std::optional<double> instability_threshold(const ModeDecomposition& m, const ClassicalParams& p) {
    const double eta_min = m.eta_n.minCoeff();
    if (eta_min >= 0.0) return std::nullopt;
    return p.omega0 / std::sqrt(-eta_min);
}

}  // namespace cavity_vacua::classical
