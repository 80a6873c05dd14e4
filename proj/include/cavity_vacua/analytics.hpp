#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "quantum_model.hpp"

namespace cavity_vacua::analytics {

inline constexpr double pi = std::numbers::pi;

// Single-dipole coupling from circuit and dipole parameters.
inline double g_physical(double q, double xi0, double C, double d, double omega_c, double hbar = 1.0) {
    if (!(q > 0.0 && xi0 >= 0.0 && C > 0.0 && d > 0.0 && omega_c > 0.0 && hbar > 0.0))
        throw DomainError("physical inputs must be positive");
    return q * xi0 / (C * d * hbar) * std::sqrt(hbar * C * omega_c / 2);
}

// Zero-point charge fluctuation sqrt(hbar C omega_c)/2.
inline double zero_point_charge(double C, double omega_c, double hbar = 1.0) {
    return std::sqrt(hbar * C * omega_c) / 2;
}

// Upper bound q/(2 Q0) on g/omega_c.
inline double charge_bound(double q, double C, double omega_c, double hbar = 1.0) {
    if (!(q > 0.0 && C > 0.0 && omega_c > 0.0)) throw DomainError("physical inputs must be positive");
    return q / (2 * zero_point_charge(C, omega_c, hbar));
}

inline std::optional<double> critical_coupling(double omega0, double omega_c, double epsilon, int N) {
    if (epsilon >= 0.0) return std::nullopt;
    if (N < 1) throw ArgumentError("N must be at least 1");
    return std::sqrt(omega_c * omega0 / (-epsilon * N));
}

struct MeanFields {
    double mean_a = 0.0;
    double mean_Sx = 0.0;
};

// Mean-field order parameters above g_c; the positive-<a> branch for bias_sign >= 0.
inline MeanFields mean_fields(double g, double g_c, int N, double omega_c, double bias_sign = 1.0) {
    if (g < g_c || g <= 0.0) return {};
    const double r = g_c / g;
    const double f = std::sqrt(1.0 - r * r * r * r);
    const double s = bias_sign >= 0.0 ? 1.0 : -1.0;
    return {s * N * g / (2 * omega_c) * f, -s * N / 2.0 * f};
}

inline double photon_number_weak(const ModelParams& p) {
    const double denom_shift = p.omega0 + p.epsilon * p.N * p.g * p.g / p.omega_c;
    if (denom_shift <= 0.0) throw DomainError("normal phase unstable: coupling at or beyond g_c");
    const double s = p.omega_c + p.omega0;
    return p.N * p.g * p.g * p.omega0 / (4 * s * s * denom_shift);
}

inline double voltage_kink(double epsilon, double omega0, double omega_c) {
    if (epsilon >= 0.0) throw DomainError("voltage kink defined for epsilon < 0");
    const double r = omega0 / omega_c;
    return std::sqrt(1.0 + r * r / std::abs(epsilon));
}

struct CriticalEpsilon {
    double root = 0.0;
    double asymptote = 0.0;
};

inline CriticalEpsilon critical_epsilon(double alpha, double omega0, double omega_c, int N) {
    if (!(alpha > 0.0)) throw DomainError("alpha must be positive");
    if (N < 1) throw ArgumentError("N must be at least 1");
    CriticalEpsilon c;
    c.root = -(omega0 * std::exp(-pi * alpha) / N + omega0 * omega0 / (4 * pi * alpha * omega_c)) /
             (2 * pi * alpha * omega_c);
    c.asymptote = -omega0 * omega0 / (8 * pi * pi * alpha * alpha * omega_c * omega_c);
    return c;
}

// Large-coupling limit of the quadratic-theory photon number (epsilon > 0).
inline double hp_photon_limit(double epsilon) {
    if (!(epsilon > 0.0)) throw DomainError("limit defined for epsilon > 0");
    const double r = std::sqrt(epsilon * (epsilon + 1));
    return (1 + 2 * epsilon - 2 * r) / (4 * r);
}

inline double polaron_energy(int n, const std::vector<int>& s, const Eigen::MatrixXd& D, double nu,
                             const ModelParams& p) {
    if (static_cast<Eigen::Index>(s.size()) != D.rows()) throw ArgumentError("spin configuration size mismatch");
    for (int v : s)
        if (v != 1 && v != -1) throw ArgumentError("spin values must be +1 or -1");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < D.rows(); ++i)
        for (Eigen::Index j = 0; j < D.cols(); ++j) sum += D(i, j) * s[i] * s[j];
    return n * p.omega_c + p.g * p.g / (4 * p.omega_c) * (double(D.rows()) / nu) * sum;
}

struct SymplecticResult {
    // Normal-mode frequencies in descending order; for unstable forms the
    // entries are sqrt(|Omega^2|) and omega_sq carries the sign.
    Eigen::VectorXd frequencies;
    Eigen::VectorXd omega_sq;
    // Ground-state covariance <{r_k, r_l}>/2 in the ordering (x_1..x_n, p_1..p_n).
    Eigen::MatrixXd covariance;
    bool stable = false;
};

namespace detail {

template <class M>
M sym_sqrt(const M& A, bool inverse) {
    Eigen::SelfAdjointEigenSolver<M> es(A);
    auto ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        using S = typename M::Scalar;
        ev(i) = inverse ? S(1) / std::sqrt(ev(i)) : std::sqrt(ev(i));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

// Normal modes of H = r^T M r / 2 with r = (x, p) and [x_k, p_l] = i delta_kl.
inline SymplecticResult symplectic_diagonalize(const Eigen::MatrixXd& M_in) {
    using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const Eigen::Index dim = M_in.rows();
    if (dim % 2 != 0 || M_in.cols() != dim) throw ArgumentError("quadratic form must be 2n x 2n");
    const Eigen::Index n = dim / 2;
    LMat M = M_in.cast<long double>();
    M = (M + M.transpose()) / 2;
    LMat J = LMat::Zero(dim, dim);
    J.topRightCorner(n, n) = LMat::Identity(n, n);
    J.bottomLeftCorner(n, n) = -LMat::Identity(n, n);

    SymplecticResult r;
    Eigen::SelfAdjointEigenSolver<LMat> pd(M, Eigen::EigenvaluesOnly);
    r.stable = pd.eigenvalues().minCoeff() > 0;
    if (r.stable) {
        LMat Mh = detail::sym_sqrt(M, false);
        LMat Mih = detail::sym_sqrt(M, true);
        LMat K = Mh * J * Mh;
        LMat A = detail::sym_sqrt(LMat(K.transpose() * K), false);
        Eigen::SelfAdjointEigenSolver<LMat> ea(A, Eigen::EigenvaluesOnly);
        // eigenvalues of |A| come in degenerate pairs
        std::vector<long double> w(ea.eigenvalues().data(), ea.eigenvalues().data() + dim);
        std::sort(w.begin(), w.end(), std::greater<>());
        r.frequencies.resize(n);
        r.omega_sq.resize(n);
        for (Eigen::Index k = 0; k < n; ++k) {
            long double f = (w[2 * k] + w[2 * k + 1]) / 2;
            r.frequencies(k) = double(f);
            r.omega_sq(k) = double(f * f);
        }
        r.covariance = (Mih * A * Mih / 2).cast<double>();
        return r;
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es((J * M).cast<double>());
    std::vector<double> w2;
    for (Eigen::Index k = 0; k < dim; ++k) {
        std::complex<double> l = es.eigenvalues()(k);
        w2.push_back(-(l * l).real());
    }
    std::sort(w2.begin(), w2.end(), std::greater<>());
    r.frequencies.resize(n);
    r.omega_sq.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        double o2 = (w2[2 * k] + w2[2 * k + 1]) / 2;
        r.omega_sq(k) = o2;
        r.frequencies(k) = std::sqrt(std::abs(o2));
    }
    return r;
}

struct HPResult {
    double Omega_plus = 0.0;
    double Omega_minus = 0.0;
    double Omega_plus_sq = 0.0;
    double Omega_minus_sq = 0.0;
    double gs_photon_number = 0.0;
    double u2 = 0.0;
    double phi2 = 0.0;
    double energy = 0.0;
    bool stable = false;
};

// Quadratic form of the collective model in quadratures (x_a, x_b, p_a, p_b).
inline Eigen::Matrix4d hp_quadratic_form(const ModelParams& p) {
    const double G = p.g * std::sqrt(double(p.N));
    Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
    M(0, 0) = p.omega_c;
    M(0, 1) = M(1, 0) = G;
    M(1, 1) = p.omega0 + (1 + p.epsilon) * G * G / p.omega_c;
    M(2, 2) = p.omega_c;
    M(3, 3) = p.omega0;
    return M;
}

inline HPResult hp_bogoliubov(const ModelParams& p) {
    validate(p);
    SymplecticResult s = symplectic_diagonalize(hp_quadratic_form(p));
    HPResult r;
    r.stable = s.stable && s.omega_sq(1) > 0.0;
    r.Omega_plus_sq = s.omega_sq(0);
    r.Omega_minus_sq = s.omega_sq(1);
    r.Omega_plus = s.frequencies(0);
    r.Omega_minus = s.frequencies(1);
    if (r.stable) {
        const auto& c = s.covariance;
        const double G = p.g * std::sqrt(double(p.N));
        const double k = G / p.omega_c;
        r.gs_photon_number = (c(0, 0) + c(2, 2) - 1.0) / 2;
        r.u2 = 2 * (c(0, 0) + 2 * k * c(0, 1) + k * k * c(1, 1));
        r.phi2 = 2 * c(2, 2);
        r.energy = -p.N * p.omega0 / 2 + (r.Omega_plus + r.Omega_minus - p.omega_c - p.omega0) / 2;
    }
    return r;
}

}  // namespace cavity_vacua::analytics
