#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "errors.hpp"
#include "geometry.hpp"
#include "operators.hpp"

namespace cavity_vacua {

using ops::SpMat;

enum class ModelKind { EDM, CQEDFull, CoulombTLS, Polaron, LMG, EffectiveSpin, HP };

inline const char* to_string(ModelKind m) {
    switch (m) {
        case ModelKind::EDM: return "EDM";
        case ModelKind::CQEDFull: return "CQEDFull";
        case ModelKind::CoulombTLS: return "CoulombTLS";
        case ModelKind::Polaron: return "Polaron";
        case ModelKind::LMG: return "LMG";
        case ModelKind::EffectiveSpin: return "EffectiveSpin";
        case ModelKind::HP: return "HP";
    }
    return "?";
}

inline std::optional<ModelKind> model_from_string(const std::string& s) {
    for (auto m : {ModelKind::EDM, ModelKind::CQEDFull, ModelKind::CoulombTLS, ModelKind::Polaron, ModelKind::LMG,
                   ModelKind::EffectiveSpin, ModelKind::HP})
        if (s == to_string(m)) return m;
    return std::nullopt;
}

inline double alpha_from_g(double g, double omega_c = 1.0) {
    if (g < 0.0 || !(omega_c > 0.0)) throw DomainError("g must be non-negative and omega_c positive");
    return g * g / (2 * std::numbers::pi * omega_c * omega_c);
}

inline double g_from_alpha(double alpha, double omega_c = 1.0) {
    if (alpha < 0.0 || !(omega_c > 0.0)) throw DomainError("alpha must be non-negative and omega_c positive");
    return omega_c * std::sqrt(2 * std::numbers::pi * alpha);
}

struct ModelParams {
    double omega0 = 1.0;
    double omega_c = 1.0;
    double g = 0.0;
    double epsilon = 0.0;
    int N = 1;
    double lambda_bias = 0.0;
    // 0 selects the automatic cutoff policy
    int n_max = 0;
    double xi_bar = 1.0;

    double alpha() const { return alpha_from_g(g, omega_c); }
    ModelParams& set_alpha(double a) {
        g = g_from_alpha(a, omega_c);
        return *this;
    }
};

inline void validate(const ModelParams& p) {
    if (p.N < 1) throw ArgumentError("N must be at least 1");
    if (p.g < 0.0) throw ArgumentError("g must be non-negative");
    if (!(p.omega_c > 0.0)) throw ArgumentError("omega_c must be positive");
    if (p.omega0 < 0.0) throw ArgumentError("omega0 must be non-negative");
    if (p.n_max < 0) throw ArgumentError("n_max must be non-negative");
    if (p.xi_bar < 1.0) throw ArgumentError("xi_bar must be at least 1");
    for (double v : {p.omega0, p.omega_c, p.g, p.epsilon, p.lambda_bias, p.xi_bar})
        if (!std::isfinite(v)) throw ArgumentError("non-finite model parameter");
}

enum class BasisKind { DickeFock, FullSpinFock, SpinOnly };

// Photon index major, spin index minor: index = n * spin_dim + s.
struct HilbertBasis {
    BasisKind kind = BasisKind::DickeFock;
    int N = 1;
    int n_photons = 1;
    Eigen::Index spin_dim = 2;
    // Spin factor is the 2^N product space rather than the Dicke ladder.
    bool product_spins = false;

    Eigen::Index dimension() const { return Eigen::Index(n_photons) * spin_dim; }
    bool has_photons() const { return kind != BasisKind::SpinOnly; }
};

inline HilbertBasis dicke_fock(int N, int n_max) { return {BasisKind::DickeFock, N, n_max, N + 1, false}; }
inline HilbertBasis full_spin_fock(int N, int n_max) {
    return {BasisKind::FullSpinFock, N, n_max, Eigen::Index(1) << N, true};
}
inline HilbertBasis spin_only(int N) { return {BasisKind::SpinOnly, N, 1, N + 1, false}; }

struct HamiltonianMatrix {
    SpMat matrix;
    HilbertBasis basis;
    ModelParams params;
    ModelKind model = ModelKind::EDM;
    // Cavity coupling entering the voltage operator (g cos(theta) for tilted dipoles).
    double coupling_g = 0.0;
};

inline constexpr Eigen::Index max_dimension = Eigen::Index(1) << 23;

inline void guard_dimension(const HilbertBasis& b) {
    if (b.dimension() > max_dimension)
        throw DimensionError("Hilbert space dimension " + std::to_string(b.dimension()) + " exceeds guard");
}

// Initial photon cutoff: covers a coherent displacement of (g/omega_c)(N/2).
inline int initial_cutoff(double g, double omega_c, int N) {
    double beta = g / omega_c * N / 2.0;
    return static_cast<int>(std::ceil(beta * beta + 6 * beta + 10));
}

inline int resolve_cutoff(const ModelParams& p, int n_max, double g_eff) {
    if (n_max > 0) return n_max;
    if (p.n_max > 0) return p.n_max;
    return initial_cutoff(g_eff, p.omega_c, p.N);
}

inline HamiltonianMatrix build_edm(const ModelParams& p, int n_max = 0) {
    validate(p);
    const int n = resolve_cutoff(p, n_max, p.g);
    HamiltonianMatrix h{SpMat(), dicke_fock(p.N, n), p, ModelKind::EDM, p.g};
    guard_dimension(h.basis);
    const auto f = ops::fock_ops(n);
    const auto s = ops::collective_spin_ops(p.N);
    const SpMat Ip = ops::identity(n);
    const SpMat Is = ops::identity(p.N + 1);
    SpMat spin = p.omega0 * s.Sz + (p.g * p.g / p.omega_c) * (1 + p.epsilon) * SpMat(s.Sx * s.Sx) +
                 p.lambda_bias * s.Sx;
    h.matrix = p.omega_c * ops::kron(f.n, Is) + ops::kron(Ip, spin) + p.g * ops::kron(SpMat(f.a + f.a_dag), s.Sx);
    h.params.n_max = n;
    return h;
}

inline HamiltonianMatrix build_lmg(const ModelParams& p) {
    validate(p);
    const auto s = ops::collective_spin_ops(p.N);
    HamiltonianMatrix h{SpMat(), spin_only(p.N), p, ModelKind::LMG, p.g};
    h.matrix = p.omega0 * s.Sz + p.epsilon * (p.g * p.g / p.omega_c) * SpMat(s.Sx * s.Sx) + p.lambda_bias * s.Sx;
    return h;
}

inline HamiltonianMatrix build_effective_spin(const ModelParams& p) {
    validate(p);
    const double a = p.alpha();
    if (!(a > 0.0)) throw DomainError("effective spin model requires alpha > 0");
    const double pi = std::numbers::pi;
    const auto s = ops::collective_spin_ops(p.N);
    HamiltonianMatrix h{SpMat(), spin_only(p.N), p, ModelKind::EffectiveSpin, p.g};
    const double quad = 2 * pi * a * p.epsilon * p.omega_c + p.omega0 * p.omega0 / (4 * pi * a * p.omega_c);
    h.matrix = p.omega0 * std::exp(-pi * a) * s.Sz + quad * SpMat(s.Sx * s.Sx) + p.lambda_bias * s.Sx;
    return h;
}

// Spin Hamiltonian with the field quadrature clamped at X.
inline HamiltonianMatrix adiabatic_spin_h(const ModelParams& p, double X) {
    validate(p);
    const auto s = ops::collective_spin_ops(p.N);
    HamiltonianMatrix h{SpMat(), spin_only(p.N), p, ModelKind::EDM, p.g};
    h.matrix = p.omega0 * s.Sz + std::sqrt(2.0) * p.g * X * s.Sx +
               (p.g * p.g / p.omega_c) * (1 + p.epsilon) * SpMat(s.Sx * s.Sx) + p.lambda_bias * s.Sx;
    return h;
}

inline geometry::CouplingMatrix uniform_coupling(int N, double eta, double nu) {
    geometry::CouplingMatrix c;
    c.D = Eigen::MatrixXd::Constant(N, N, eta / N);
    c.D.diagonal().setZero();
    c.eta = eta;
    c.nu = nu;
    c.self_interaction = Eigen::VectorXd::Zero(N);
    return c;
}

namespace detail {

inline double resolve_nu(const geometry::CouplingMatrix& c, std::optional<double> nu) {
    double v = nu.value_or(c.nu);
    if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("filling factor must be positive");
    return v;
}

inline void check_coupling(const ModelParams& p, const geometry::CouplingMatrix& c) {
    if (static_cast<int>(c.size()) != p.N) throw ArgumentError("coupling matrix size differs from N");
}

// sum_{i != j} D_ij sigma_x^i sigma_x^j
inline SpMat interaction(const ops::PauliOps& po, const Eigen::MatrixXd& D) {
    const auto dim = po.sx.front().rows();
    SpMat out(dim, dim);
    for (Eigen::Index i = 0; i < D.rows(); ++i)
        for (Eigen::Index j = i + 1; j < D.cols(); ++j)
            if (D(i, j) != 0.0) out += (2.0 * D(i, j)) * SpMat(po.sx[i] * po.sx[j]);
    return out;
}

}  // namespace detail

// Multi-spin model with explicit dipole-dipole matrix.
inline HamiltonianMatrix build_cqed_full(const ModelParams& p, const geometry::CouplingMatrix& c,
                                         std::optional<double> nu = std::nullopt, int n_max = 0) {
    validate(p);
    detail::check_coupling(p, c);
    const double v = detail::resolve_nu(c, nu);
    const double gc = p.g * std::cos(c.tilt_theta);
    const int n = resolve_cutoff(p, n_max, gc);
    HamiltonianMatrix h{SpMat(), full_spin_fock(p.N, n), p, ModelKind::CQEDFull, gc};
    guard_dimension(h.basis);
    const auto po = ops::pauli_ops(p.N);
    const auto s = ops::collective_from_pauli(po);
    const auto f = ops::fock_ops(n);
    SpMat spin = p.omega0 * s.Sz + (gc * gc / p.omega_c) * SpMat(s.Sx * s.Sx) +
                 (p.g * p.g * p.N / (4 * p.omega_c * v)) * detail::interaction(po, c.D) + p.lambda_bias * s.Sx;
    h.matrix = p.omega_c * ops::kron(f.n, ops::identity(h.basis.spin_dim)) + ops::kron(ops::identity(n), spin) +
               gc * ops::kron(SpMat(f.a + f.a_dag), s.Sx);
    h.params.n_max = n;
    return h;
}

// Two-level truncation taken after the Coulomb-gauge transformation.
inline HamiltonianMatrix build_coulomb_tls(const ModelParams& p, const geometry::CouplingMatrix& c,
                                           std::optional<double> nu = std::nullopt, int n_max = 0) {
    validate(p);
    detail::check_coupling(p, c);
    const double v = detail::resolve_nu(c, nu);
    const double gc = p.g * std::cos(c.tilt_theta);
    const int n = resolve_cutoff(p, n_max, gc);
    HamiltonianMatrix h{SpMat(), full_spin_fock(p.N, n), p, ModelKind::CoulombTLS, gc};
    guard_dimension(h.basis);
    const auto po = ops::pauli_ops(p.N);
    const auto s = ops::collective_from_pauli(po);
    const auto f = ops::fock_ops(n);
    const double g_coul = gc * p.omega0 / p.omega_c;
    // xi^2 g_C^2 N / (4 omega0), written without dividing by omega0
    const double quad = p.xi_bar * p.xi_bar * gc * gc * p.omega0 * p.N / (4 * p.omega_c * p.omega_c);
    const SpMat Is = ops::identity(h.basis.spin_dim);
    SpMat photon = p.omega_c * f.n + quad * ops::flux_squared(n);
    SpMat spin = p.omega0 * s.Sz + (p.g * p.g * p.N / (4 * p.omega_c * v)) * detail::interaction(po, c.D) +
                 p.lambda_bias * s.Sx;
    // -i (g_C/2)(a^dag - a) sum sigma_y = -g_C (a^dag - a) (i S_y)
    h.matrix = ops::kron(photon, Is) + ops::kron(ops::identity(n), spin) -
               g_coul * ops::kron(SpMat(f.a_dag - f.a), s.iSy);
    h.params.n_max = n;
    return h;
}

namespace detail {

inline HamiltonianMatrix polaron(const ModelParams& p, const ops::SpinOps& s, const SpMat& interaction_term,
                                 HilbertBasis basis, double gc) {
    const int n = basis.n_photons;
    HamiltonianMatrix h{SpMat(), basis, p, ModelKind::Polaron, gc};
    guard_dimension(basis);
    const auto f = ops::fock_ops(n);
    const Eigen::MatrixXd Dm = ops::displacement_matrix(n, gc / p.omega_c);
    const SpMat Dsp = Dm.sparseView(1e-300, 1.0);
    const SpMat Dt = Dsp.transpose();
    const SpMat lower = s.Sz - s.iSy;
    const SpMat upper = s.Sz + s.iSy;
    h.matrix = p.omega_c * ops::kron(f.n, ops::identity(basis.spin_dim)) +
               ops::kron(ops::identity(n), SpMat(interaction_term + p.lambda_bias * s.Sx)) +
               (p.omega0 / 2) * (ops::kron(Dsp, lower) + ops::kron(Dt, upper));
    h.params.n_max = n;
    return h;
}

}  // namespace detail

// Polaron frame of the multi-spin model.
inline HamiltonianMatrix build_polaron(const ModelParams& p, const geometry::CouplingMatrix& c,
                                       std::optional<double> nu = std::nullopt, int n_max = 0) {
    validate(p);
    detail::check_coupling(p, c);
    const double v = detail::resolve_nu(c, nu);
    const double gc = p.g * std::cos(c.tilt_theta);
    const int n = resolve_cutoff(p, n_max, gc);
    const auto po = ops::pauli_ops(p.N);
    const auto s = ops::collective_from_pauli(po);
    SpMat inter = (p.g * p.g * p.N / (4 * p.omega_c * v)) * detail::interaction(po, c.D);
    return detail::polaron(p, s, inter, full_spin_fock(p.N, n), gc);
}

// Polaron frame with uniform coupling D_ij = eta/N, on the Dicke ladder.
inline HamiltonianMatrix build_polaron_collective(const ModelParams& p, int n_max = 0) {
    validate(p);
    const int n = resolve_cutoff(p, n_max, p.g);
    const auto s = ops::collective_spin_ops(p.N);
    // (g^2 N / 4 omega_c nu) (eta/N) (4 Sx^2 - N)
    SpMat inter = (p.g * p.g * p.epsilon / p.omega_c) * SpMat(SpMat(s.Sx * s.Sx) - (p.N / 4.0) * ops::identity(p.N + 1));
    return detail::polaron(p, s, inter, dicke_fock(p.N, n), p.g);
}

// Parity (-1)^(n + number of up spins) as a diagonal.
inline Eigen::VectorXd parity_diagonal(const HilbertBasis& b) {
    Eigen::VectorXd d(b.dimension());
    for (int n = 0; n < b.n_photons; ++n) {
        for (Eigen::Index s = 0; s < b.spin_dim; ++s) {
            int ups = b.product_spins ? __builtin_popcountll(static_cast<unsigned long long>(s)) : int(s);
            d(n * b.spin_dim + s) = ((n + ups) % 2 == 0) ? 1.0 : -1.0;
        }
    }
    return d;
}

// Eps = eta/nu and the tilt-projected coupling of the collective model that
// matches a given geometry.
inline ModelParams matched_edm_params(ModelParams p, const geometry::CouplingMatrix& c,
                                      std::optional<double> nu = std::nullopt) {
    const double v = detail::resolve_nu(c, nu);
    const double ct = std::cos(c.tilt_theta);
    if (std::abs(ct) < 1e-12) throw DomainError("dipoles parallel to the plates do not couple");
    p.g *= ct;
    p.epsilon = c.eta / (v * ct * ct);
    p.N = static_cast<int>(c.size());
    return p;
}

}  // namespace cavity_vacua
