#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "eigensolver.hpp"
#include "errors.hpp"
#include "operators.hpp"
#include "quantum_model.hpp"

namespace cavity_vacua {

struct GroundState {
    double energy = 0.0;
    Eigen::VectorXd vector;
    HilbertBasis basis;
    ModelParams params;
    double coupling_g = 0.0;
    int n_max_used = 0;
    bool converged = false;
    double residual = 0.0;
    // Lowest eigenvalues found alongside the ground state.
    Eigen::VectorXd low_energies;
    // Energy change at the last cutoff doubling (0 when the cutoff was fixed).
    double cutoff_change = 0.0;
};

inline constexpr double degeneracy_tolerance = 1e-10;

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMat> as_matrix(const Eigen::VectorXd& v, const HilbertBasis& b) {
    return Eigen::Map<const RowMat>(v.data(), b.n_photons, b.spin_dim);
}

// Spin operators for a basis, built once per (N, product) pair.
inline const ops::SpinOps& spin_ops_for(const HilbertBasis& b) {
    static std::mutex mu;
    static std::map<std::pair<int, bool>, ops::SpinOps> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(b.N, b.product_spins);
    auto it = cache.find(key);
    if (it == cache.end()) {
        ops::SpinOps s =
            b.product_spins ? ops::collective_from_pauli(ops::pauli_ops(b.N)) : ops::collective_spin_ops(b.N);
        it = cache.emplace(key, std::move(s)).first;
    }
    return it->second;
}

// Applies a spin operator to every photon row of the state.
inline RowMat apply_spin(const Eigen::Map<const RowMat>& psi, const SpMat& op) {
    return RowMat(psi * SpMat(op.transpose()));
}

// Lowest pairs of each parity sector, merged by energy; the even sector wins ties.
// Exact for lambda = 0, where the tunnelling splitting of a superradiant
// doublet can fall far below what a joint solve resolves.
inline EigenPairs parity_sector_pairs(const HamiltonianMatrix& H, int k, const SolverOptions& opt) {
    const Eigen::VectorXd P = parity_diagonal(H.basis);
    const Eigen::Index n = P.size();
    struct Sector {
        std::vector<Eigen::Index> idx;
        EigenPairs ep;
    } sec[2];
    for (Eigen::Index i = 0; i < n; ++i) sec[P(i) > 0 ? 0 : 1].idx.push_back(i);
    for (auto& s : sec) {
        if (s.idx.empty()) continue;
        const auto m = static_cast<Eigen::Index>(s.idx.size());
        std::vector<Eigen::Triplet<double>> t;
        for (Eigen::Index j = 0; j < m; ++j) t.emplace_back(s.idx[j], j, 1.0);
        SpMat S(n, m);
        S.setFromTriplets(t.begin(), t.end());
        SpMat Hs = SpMat(S.transpose()) * H.matrix * S;
        s.ep = lowest_eigenpairs(Hs, int(std::min<Eigen::Index>(k, m)), opt);
        Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, s.ep.vectors.cols());
        for (Eigen::Index j = 0; j < m; ++j) full.row(s.idx[j]) = s.ep.vectors.row(j);
        s.ep.vectors = std::move(full);
    }
    std::vector<std::pair<int, Eigen::Index>> order;
    for (int q = 0; q < 2; ++q)
        for (Eigen::Index j = 0; j < sec[q].ep.values.size(); ++j) order.emplace_back(q, j);
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        const double ea = sec[a.first].ep.values(a.second), eb = sec[b.first].ep.values(b.second);
        if (std::abs(ea - eb) < degeneracy_tolerance) return a.first < b.first;
        return ea < eb;
    });
    const auto kk = std::min<std::size_t>(std::size_t(k), order.size());
    EigenPairs r;
    r.values.resize(Eigen::Index(kk));
    r.vectors.resize(n, Eigen::Index(kk));
    r.residuals.resize(Eigen::Index(kk));
    r.converged = true;
    for (int q = 0; q < 2; ++q)
        if (!sec[q].idx.empty()) r.converged = r.converged && sec[q].ep.converged;
    r.method = sec[0].ep.method;
    for (std::size_t i = 0; i < kk; ++i) {
        const auto& ep = sec[order[i].first].ep;
        const Eigen::Index j = order[i].second;
        r.values(Eigen::Index(i)) = ep.values(j);
        r.vectors.col(Eigen::Index(i)) = ep.vectors.col(j);
        r.residuals(Eigen::Index(i)) = j < ep.residuals.size() ? ep.residuals(j) : 0.0;
    }
    return r;
}

}  // namespace detail

// Lowest eigenpair. Without bias the ground state is a parity eigenstate;
// with bias a degenerate ground space is resolved toward <Sx> < 0.
inline GroundState solve_ground(const HamiltonianMatrix& H, int k = 2, const SolverOptions& opt = {}) {
    const bool symmetric = H.params.lambda_bias == 0.0;
    EigenPairs ep = symmetric ? detail::parity_sector_pairs(H, std::max(k, 1), opt)
                              : lowest_eigenpairs(H.matrix, std::max(k, 1), opt);
    GroundState g;
    g.basis = H.basis;
    g.params = H.params;
    g.coupling_g = H.coupling_g;
    g.n_max_used = H.basis.n_photons;
    g.low_energies = ep.values;
    g.converged = ep.converged;
    int deg = 1;
    while (!symmetric && deg < ep.values.size() && ep.values(deg) - ep.values(0) < degeneracy_tolerance) ++deg;
    Eigen::VectorXd v = ep.vectors.col(0);
    if (deg > 1) {
        const auto& s = detail::spin_ops_for(H.basis);
        Eigen::MatrixXd M(deg, deg);
        for (int a = 0; a < deg; ++a) {
            auto pa = detail::as_matrix(Eigen::VectorXd(ep.vectors.col(a)), H.basis);
            detail::RowMat sa = detail::apply_spin(pa, s.Sx);
            for (int b = 0; b < deg; ++b) {
                Eigen::VectorXd vb = ep.vectors.col(b);
                auto pb = detail::as_matrix(vb, H.basis);
                M(a, b) = (pb.array() * sa.array()).sum();
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
        v = ep.vectors.leftCols(deg) * es.eigenvectors().col(0);
    }
    v.normalize();
    // fix the global sign so that outputs are reproducible
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0.0) v = -v;
    g.vector = v;
    g.energy = v.dot(H.matrix * v);
    g.residual = (H.matrix * v - g.energy * v).norm();
    if (g.residual > 1e-8 * std::max(1.0, std::abs(g.energy))) g.converged = false;
    return g;
}

struct CutoffPolicy {
    double energy_tolerance = 1e-9;
    int max_photons = 1 << 14;
};

// Doubles the photon cutoff until the ground energy settles.
inline GroundState solve_with_cutoff(const std::function<HamiltonianMatrix(int)>& build, int n_initial,
                                     const CutoffPolicy& policy = {}, const SolverOptions& opt = {}) {
    int n = std::max(1, n_initial);
    GroundState prev = solve_ground(build(n), 2, opt);
    while (true) {
        int next = 2 * n;
        if (next > policy.max_photons) {
            prev.converged = false;
            return prev;
        }
        GroundState cur = solve_ground(build(next), 2, opt);
        cur.cutoff_change = std::abs(cur.energy - prev.energy);
        if (cur.cutoff_change < policy.energy_tolerance * prev.params.omega_c) return cur;
        prev = std::move(cur);
        n = next;
    }
}

// Ground state of a model; the automatic cutoff policy applies when
// params.n_max == 0.
inline GroundState ground_state(ModelKind kind, const ModelParams& p,
                                const geometry::CouplingMatrix* coupling = nullptr,
                                std::optional<double> nu = std::nullopt, const CutoffPolicy& policy = {}) {
    auto need = [&]() -> const geometry::CouplingMatrix& {
        if (!coupling) throw ArgumentError(std::string(to_string(kind)) + " requires a coupling matrix");
        return *coupling;
    };
    std::function<HamiltonianMatrix(int)> build;
    double gc = p.g;
    switch (kind) {
        case ModelKind::EDM: build = [&](int n) { return build_edm(p, n); }; break;
        case ModelKind::CQEDFull:
            gc = p.g * std::cos(need().tilt_theta);
            build = [&](int n) { return build_cqed_full(p, *coupling, nu, n); };
            break;
        case ModelKind::CoulombTLS:
            gc = p.g * std::cos(need().tilt_theta);
            build = [&](int n) { return build_coulomb_tls(p, *coupling, nu, n); };
            break;
        case ModelKind::Polaron:
            if (coupling) {
                gc = p.g * std::cos(coupling->tilt_theta);
                build = [&](int n) { return build_polaron(p, *coupling, nu, n); };
            } else {
                build = [&](int n) { return build_polaron_collective(p, n); };
            }
            break;
        case ModelKind::LMG: return solve_ground(build_lmg(p));
        case ModelKind::EffectiveSpin: return solve_ground(build_effective_spin(p));
        case ModelKind::HP: throw ArgumentError("the quadratic model has no matrix representation");
    }
    if (p.n_max > 0) {
        GroundState g = solve_ground(build(p.n_max));
        return g;
    }
    return solve_with_cutoff(build, initial_cutoff(gc, p.omega_c, p.N), policy);
}

struct Observables {
    std::optional<double> mean_a;
    std::optional<double> photon_number;
    std::optional<double> delta_a2;
    double mean_Sx = 0.0;
    double mean_Sz = 0.0;
    double delta_Sx2 = 0.0;
    std::optional<double> u2;
    std::optional<double> phi2;
    std::optional<double> mean_u;
    std::optional<double> mean_phi;
    double S1 = 0.0;
    double Sd = 0.0;
    double delta_S = 0.0;
};

struct Entropies {
    double S1 = 0.0;
    double Sd = 0.0;
    double delta_S = 0.0;
};

inline double von_neumann_bits(const Eigen::MatrixXd& rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (rho + rho.transpose()), Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        double p = es.eigenvalues()(i);
        if (p > 1e-300) s -= p * std::log2(p);
    }
    return std::max(0.0, s);
}

// Reduced density matrix of the dipoles (cavity traced out).
inline Eigen::MatrixXd dipole_density(const GroundState& g) {
    auto psi = detail::as_matrix(g.vector, g.basis);
    return psi.transpose() * psi;
}

inline Eigen::Matrix2d single_dipole_density(const GroundState& g) {
    Eigen::MatrixXd rho_d = dipole_density(g);
    Eigen::Matrix2d rho1 = Eigen::Matrix2d::Zero();
    if (g.basis.product_spins) {
        const Eigen::Index rest = g.basis.spin_dim / 2;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (Eigen::Index r = 0; r < rest; ++r) rho1(a, b) += rho_d(a * rest + r, b * rest + r);
        return rho1;
    }
    const auto& s = detail::spin_ops_for(g.basis);
    const double N = g.basis.N;
    double rx = 2.0 * (rho_d * Eigen::MatrixXd(s.Sx)).trace() / N;
    double rz = 2.0 * (rho_d * Eigen::MatrixXd(s.Sz)).trace() / N;
    // basis (down, up); <Sy> vanishes for real states
    rho1 << (1 - rz) / 2, rx / 2, rx / 2, (1 + rz) / 2;
    return rho1;
}

inline Entropies entropies(const GroundState& g) {
    Entropies e;
    e.Sd = g.basis.has_photons() ? von_neumann_bits(dipole_density(g)) : 0.0;
    e.S1 = von_neumann_bits(single_dipole_density(g));
    e.delta_S = e.S1 - e.Sd;
    return e;
}

inline Observables measure(const GroundState& g) {
    const HilbertBasis& b = g.basis;
    auto psi = detail::as_matrix(g.vector, b);
    const auto& s = detail::spin_ops_for(b);
    Observables o;
    detail::RowMat sx = detail::apply_spin(psi, s.Sx);
    detail::RowMat sz = detail::apply_spin(psi, s.Sz);
    o.mean_Sx = (psi.array() * sx.array()).sum();
    o.mean_Sz = (psi.array() * sz.array()).sum();
    o.delta_Sx2 = sx.squaredNorm() - o.mean_Sx * o.mean_Sx;
    if (b.has_photons()) {
        const auto f = ops::fock_ops(b.n_photons);
        detail::RowMat apsi = f.a * psi;
        detail::RowMat xpsi = SpMat(f.a + f.a_dag) * psi;
        detail::RowMat ppsi = SpMat(f.a_dag - f.a) * psi;
        double mean_a = (psi.array() * apsi.array()).sum();
        double n = 0.0;
        for (int k = 0; k < b.n_photons; ++k) n += k * psi.row(k).squaredNorm();
        const double lever = 2.0 * g.coupling_g / g.params.omega_c;
        o.mean_a = mean_a;
        o.photon_number = n;
        o.delta_a2 = n - mean_a * mean_a;
        o.u2 = (xpsi + lever * sx).squaredNorm();
        o.phi2 = ppsi.squaredNorm();
        o.mean_u = 2.0 * mean_a + lever * o.mean_Sx;
        o.mean_phi = (psi.array() * ppsi.array()).sum();
    }
    Entropies e = entropies(g);
    o.S1 = e.S1;
    o.Sd = e.Sd;
    o.delta_S = e.delta_S;
    return o;
}

// Dicke state with zero Sx projection (N even).
inline Eigen::VectorXd dicke_x0_state(int N) {
    if (N % 2 != 0) throw DomainError("zero Sx projection requires even N");
    const auto s = ops::collective_spin_ops(N);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(s.Sx)};
    return es.eigenvectors().col(N / 2);
}

// |<G| (|0> x |D0>)|^2
inline double subradiant_overlap(const GroundState& g) {
    if (g.basis.kind != BasisKind::DickeFock) throw DomainError("overlap defined on the Dicke basis");
    Eigen::VectorXd d0 = dicke_x0_state(g.basis.N);
    auto psi = detail::as_matrix(g.vector, g.basis);
    double o = psi.row(0).dot(d0);
    return o * o;
}

struct QSample {
    double theta = 0.0;
    double phi = 0.0;
    double Q = 0.0;
};

// Spin coherent state |theta, phi> in the Dicke basis; theta = 0 is all up.
inline Eigen::VectorXcd spin_coherent_state(int N, double theta, double phi) {
    Eigen::VectorXcd c(N + 1);
    const double ct = std::cos(theta / 2), st = std::sin(theta / 2);
    for (int k = 0; k <= N; ++k) {
        // k spins up
        double logb = std::lgamma(N + 1.0) - std::lgamma(k + 1.0) - std::lgamma(N - k + 1.0);
        double mag = std::exp(0.5 * logb) * std::pow(ct, k) * std::pow(st, N - k);
        c(k) = std::polar(mag, (N - k) * phi);
    }
    return c;
}

inline std::vector<QSample> q_function(const Eigen::MatrixXd& rho_d, const std::vector<std::pair<double, double>>& grid) {
    const int N = int(rho_d.rows()) - 1;
    std::vector<QSample> out;
    out.reserve(grid.size());
    for (const auto& [theta, phi] : grid) {
        Eigen::VectorXcd c = spin_coherent_state(N, theta, phi);
        std::complex<double> q = c.dot(rho_d.cast<std::complex<double>>() * c);
        out.push_back({theta, phi, q.real()});
    }
    return out;
}

inline std::vector<QSample> q_function(const GroundState& g, const std::vector<std::pair<double, double>>& grid) {
    if (g.basis.product_spins) throw DomainError("Q-function requires the Dicke basis");
    return q_function(dipole_density(g), grid);
}

// Equiangular grid, n_phi points over [0, 2 pi) and n_theta over [0, pi].
inline std::vector<std::pair<double, double>> q_grid(int n_phi = 181, int n_theta = 91) {
    if (n_phi < 1 || n_theta < 2) throw ArgumentError("Q-function grid too small");
    std::vector<std::pair<double, double>> grid;
    for (int t = 0; t < n_theta; ++t)
        for (int p = 0; p < n_phi; ++p)
            grid.emplace_back(std::numbers::pi * t / (n_theta - 1), 2 * std::numbers::pi * p / n_phi);
    return grid;
}

struct AdiabaticSample {
    double X = 0.0;
    double E0 = 0.0;
    double V = 0.0;
};

inline std::vector<AdiabaticSample> adiabatic_potential(const ModelParams& p, const std::vector<double>& X_grid) {
    std::vector<AdiabaticSample> out;
    for (double X : X_grid) {
        if (!std::isfinite(X)) throw ArgumentError("non-finite grid point");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(adiabatic_spin_h(p, X).matrix),
                                                          Eigen::EigenvaluesOnly);
        double e0 = es.eigenvalues()(0);
        out.push_back({X, e0, p.omega_c * X * X / 2 + e0});
    }
    return out;
}

// <sigma_x^i sigma_x^j> for each pair; i == j gives 1.
inline std::vector<double> spin_correlations(const GroundState& g, const std::vector<std::pair<int, int>>& pairs) {
    if (!g.basis.product_spins) throw DomainError("site correlations require the product basis");
    const auto po = ops::pauli_ops(g.basis.N);
    auto psi = detail::as_matrix(g.vector, g.basis);
    std::vector<double> out;
    for (auto [i, j] : pairs) {
        if (i < 0 || j < 0 || i >= g.basis.N || j >= g.basis.N) throw ArgumentError("site index out of range");
        detail::RowMat t = detail::apply_spin(psi, SpMat(po.sx[i] * po.sx[j]));
        out.push_back((psi.array() * t.array()).sum());
    }
    return out;
}

enum class Phase { Normal, Superradiant, Subradiant };

inline const char* to_string(Phase p) {
    switch (p) {
        case Phase::Normal: return "normal";
        case Phase::Superradiant: return "superradiant";
        case Phase::Subradiant: return "subradiant";
    }
    return "?";
}

struct SweepPoint {
    double x = 0.0;
    Observables obs;
};

struct ClassifyOptions {
    double epsilon = 0.0;
    int N = 1;
    // The axis is the coupling g (or alpha); otherwise a non-coupling parameter.
    bool coupling_axis = true;
    // Largest step in <a> must exceed this multiple of the next largest.
    double jump_dominance = 4.0;
};

struct Classification {
    std::vector<Phase> labels;
    std::optional<double> superradiant_boundary;
    std::optional<double> subradiant_onset;
    std::optional<double> jump_location;
    double jump_size = 0.0;
    std::vector<double> photon_slope;
};

// Centered differences on the grid itself, one-sided at the ends.
inline std::vector<double> grid_derivative(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t lo = i == 0 ? 0 : i - 1;
        std::size_t hi = i + 1 == n ? n - 1 : i + 1;
        d[i] = (y[hi] - y[lo]) / (x[hi] - x[lo]);
    }
    return d;
}

inline Classification classify(const std::vector<SweepPoint>& sweep, const ClassifyOptions& opt) {
    const std::size_t n = sweep.size();
    if (n < 8) throw ArgumentError("classification needs at least 8 sweep points");
    std::vector<double> x(n), a(n), ph(n), dsx(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = sweep[i].x;
        if (i > 0 && !(x[i] > x[i - 1])) throw ArgumentError("sweep axis must be strictly increasing");
        a[i] = sweep[i].obs.mean_a.value_or(0.0);
        ph[i] = sweep[i].obs.photon_number.value_or(0.0);
        dsx[i] = sweep[i].obs.delta_Sx2;
    }
    Classification c;
    c.labels.assign(n, Phase::Normal);
    c.photon_slope = grid_derivative(x, ph);

    // discontinuity in the order parameter
    std::size_t jmax = 0;
    double first = 0.0, second = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double step = std::abs(a[i + 1] - a[i]);
        if (step > first) {
            second = first;
            first = step;
            jmax = i;
        } else if (step > second) {
            second = step;
        }
    }
    double amax = 0.0;
    for (double v : a) amax = std::max(amax, std::abs(v));
    const bool jump = first > 0.25 * amax && first > opt.jump_dominance * second && amax > 0.0;
    if (jump) {
        c.jump_location = 0.5 * (x[jmax] + x[jmax + 1]);
        c.jump_size = first;
        double left = 0.0, right = 0.0;
        for (std::size_t i = 0; i <= jmax; ++i) left += std::abs(a[i]);
        for (std::size_t i = jmax + 1; i < n; ++i) right += std::abs(a[i]);
        left /= double(jmax + 1);
        right /= double(n - jmax - 1);
        bool right_super = right > left;
        for (std::size_t i = 0; i < n; ++i)
            if ((i > jmax) == right_super) c.labels[i] = Phase::Superradiant;
    } else if (opt.coupling_axis && opt.epsilon < 0.0) {
        std::size_t imax = static_cast<std::size_t>(std::max_element(dsx.begin(), dsx.end()) - dsx.begin());
        c.superradiant_boundary = x[imax];
        for (std::size_t i = imax; i < n; ++i) c.labels[i] = Phase::Superradiant;
    }

    if (opt.N % 2 == 0) {
        for (std::size_t i = 0; i < n; ++i) {
            if (c.labels[i] == Phase::Superradiant) continue;
            if (opt.coupling_axis && c.photon_slope[i] < 0.0) {
                c.labels[i] = Phase::Subradiant;
                if (!c.subradiant_onset) c.subradiant_onset = x[i];
            } else if (!opt.coupling_axis && jump) {
                c.labels[i] = Phase::Subradiant;
            }
        }
    }
    return c;
}

}  // namespace cavity_vacua
