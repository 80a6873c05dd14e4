#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "cavity_vacua/analytics.hpp"
#include "cavity_vacua/classical_modes.hpp"

using namespace cavity_vacua;
using namespace cavity_vacua::analytics;

namespace {

ModelParams collective(double G, double eps, int N = 1, double omega0 = 1.0, double omega_c = 1.0) {
    ModelParams p;
    p.N = N;
    p.g = G / std::sqrt(double(N));
    p.epsilon = eps;
    p.omega0 = omega0;
    p.omega_c = omega_c;
    return p;
}

}  // namespace

TEST(Coupling, PhysicalCoupling) {
    const double g = g_physical(1.0, 0.3, 2.0, 1.5, 0.8);
    EXPECT_NEAR(g, 0.3 / 3.0 * std::sqrt(0.8), 1e-15);
    EXPECT_NEAR(g_physical(1.0, 0.0, 2.0, 1.5, 0.8), 0.0, 0.0);
    // doubling C at fixed omega_c scales g by 1/sqrt(2)
    EXPECT_NEAR(g_physical(1.0, 0.3, 4.0, 1.5, 0.8) / g, 1 / std::sqrt(2.0), 1e-14);
    EXPECT_THROW(g_physical(-1.0, 0.3, 2.0, 1.5, 0.8), DomainError);
}

TEST(Coupling, ChargeBoundHoldsForDipolesInsideGap) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.1, 5.0), f(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const double q = u(rng), C = u(rng), d = u(rng), wc = u(rng);
        const double xi0 = f(rng) * d;
        EXPECT_LE(g_physical(q, xi0, C, d, wc) / wc, charge_bound(q, C, wc) * (1 + 1e-14));
    }
    EXPECT_NEAR(zero_point_charge(4.0, 1.0), 1.0, 1e-15);
}

TEST(CriticalCoupling, Values) {
    EXPECT_NEAR(*critical_coupling(1, 1, -0.1, 8), 1.1180, 5e-5);
    EXPECT_NEAR(*critical_coupling(1, 1, -0.1, 8), std::sqrt(1.25), 1e-15);
    EXPECT_FALSE(critical_coupling(1, 1, 0.0, 8).has_value());
    EXPECT_FALSE(critical_coupling(1, 1, 0.3, 8).has_value());
    EXPECT_LT(*critical_coupling(1, 1, -1.0, 1000000), 1e-2);
}

TEST(MeanFields, Values) {
    auto at = mean_fields(1.0, 1.0, 8, 1.0);
    EXPECT_EQ(at.mean_a, 0.0);
    EXPECT_EQ(at.mean_Sx, 0.0);
    auto below = mean_fields(0.5, 1.0, 8, 1.0);
    EXPECT_EQ(below.mean_a, 0.0);
    const double g = std::pow(2.0, 0.25);
    auto m = mean_fields(g, 1.0, 8, 1.0);
    EXPECT_NEAR(m.mean_a / (8 * g / 2), std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(m.mean_Sx, -4 * std::sqrt(0.5), 1e-15);
    auto far = mean_fields(1e4, 1.0, 8, 2.0);
    EXPECT_NEAR(far.mean_a, 8 * 1e4 / 4, 1e-6);
    EXPECT_NEAR(far.mean_Sx, -4.0, 1e-12);
    auto neg = mean_fields(g, 1.0, 8, 1.0, -1.0);
    EXPECT_DOUBLE_EQ(neg.mean_a, -m.mean_a);
    EXPECT_DOUBLE_EQ(neg.mean_Sx, -m.mean_Sx);
}

TEST(PhotonNumberWeak, Values) {
    ModelParams p;
    p.N = 8;
    p.g = 0.1;
    EXPECT_NEAR(photon_number_weak(p), 0.005, 1e-15);
    p.g = 0.0;
    EXPECT_EQ(photon_number_weak(p), 0.0);
}

TEST(PhotonNumberWeak, PoleAtCriticalCoupling) {
    for (double eps : {-0.05, -0.1, -0.7})
        for (int N : {1, 8, 12}) {
            const double gc = *critical_coupling(1.0, 1.0, eps, N);
            EXPECT_NEAR(1.0 + eps * N * gc * gc, 0.0, 1e-12);
            ModelParams p;
            p.N = N;
            p.epsilon = eps;
            p.g = gc * (1 + 1e-9);
            EXPECT_THROW(photon_number_weak(p), DomainError);
            p.g = gc * (1 - 1e-6);
            EXPECT_GT(photon_number_weak(p), 1e3);
        }
}

TEST(PhotonNumberWeak, AgreesWithQuadraticTheory) {
    for (double eps : {-0.1, 0.0, 0.2, 0.5})
        for (double G : {0.05, 0.15, 0.29}) {
            auto p = collective(G, eps, 10);
            const double exact = hp_bogoliubov(p).gs_photon_number;
            EXPECT_NEAR(photon_number_weak(p) / exact, 1.0, 0.05) << G << " " << eps;
        }
}

TEST(VoltageKink, Values) {
    EXPECT_NEAR(voltage_kink(-0.1, 1, 1), std::sqrt(11.0), 1e-14);
    EXPECT_NEAR(voltage_kink(-0.1, 1, 1), 3.3166, 5e-5);
    EXPECT_NEAR(voltage_kink(-1.0, 1, 1), std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(voltage_kink(-1e12, 1, 1), 1.0, 1e-11);
    EXPECT_THROW(voltage_kink(0.0, 1, 1), DomainError);
}

TEST(CriticalEpsilon, Values) {
    auto c = critical_epsilon(2.0, 1, 1, 8);
    EXPECT_NEAR(c.asymptote, -1 / (32 * pi * pi), 1e-16);
    EXPECT_NEAR(c.asymptote, -0.003166, 5e-7);
    auto r = critical_epsilon(1.0, 1, 1, 8);
    EXPECT_NEAR(r.root, -0.013525, 5e-7);
    EXPECT_NEAR(r.root, -0.014, 0.3 * 0.014);
    EXPECT_GT(critical_epsilon(1e4, 1, 1, 8).asymptote, -1e-8);
    EXPECT_THROW(critical_epsilon(0.0, 1, 1, 8), DomainError);
}

TEST(CriticalEpsilon, RootZeroesEffectiveQuadraticTerm) {
    // h Sz + c Sx^2: the root is where c = -h/N
    for (double alpha : {0.3, 1.0, 2.5})
        for (int N : {2, 8}) {
            const double eps = critical_epsilon(alpha, 1, 1, N).root;
            const double h = std::exp(-pi * alpha);
            const double c = 2 * pi * alpha * eps + 1 / (4 * pi * alpha);
            EXPECT_NEAR(c, -h / N, 1e-14);
        }
}

TEST(PolaronEnergy, Values) {
    ModelParams p;
    p.g = 1.3;
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3, 3);
    EXPECT_DOUBLE_EQ(polaron_energy(4, {1, -1, 1}, D, 0.2, p), 4.0);
    Eigen::Matrix2d D2;
    D2 << 0, 0.15, 0.15, 0;
    // aligned: (g^2/4)(N/nu)(2 * eta/2) with eta = 0.3
    EXPECT_NEAR(polaron_energy(0, {1, 1}, D2, 0.5, p), 1.69 / 4 * 4 * 0.3, 1e-14);
    EXPECT_NEAR(polaron_energy(0, {1, -1}, D2, 0.5, p), -1.69 / 4 * 4 * 0.3, 1e-14);
    EXPECT_THROW(polaron_energy(0, {1, 0}, D2, 0.5, p), ArgumentError);
    EXPECT_THROW(polaron_energy(0, {1}, D2, 0.5, p), ArgumentError);
}

TEST(PolaronEnergy, GlobalFlipSymmetry) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    Eigen::MatrixXd D(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = i; j < 4; ++j) D(i, j) = D(j, i) = i == j ? 0.0 : u(rng);
    ModelParams p;
    p.g = 0.9;
    for (int s = 0; s < 16; ++s) {
        std::vector<int> a, b;
        for (int i = 0; i < 4; ++i) {
            a.push_back((s >> i) & 1 ? 1 : -1);
            b.push_back(-a.back());
        }
        EXPECT_DOUBLE_EQ(polaron_energy(2, a, D, 0.3, p), polaron_energy(2, b, D, 0.3, p));
    }
}

TEST(Symplectic, SingleOscillator) {
    Eigen::Matrix2d M;
    M << 4.0, 0.0, 0.0, 1.0;
    auto r = symplectic_diagonalize(M);
    ASSERT_TRUE(r.stable);
    EXPECT_NEAR(r.frequencies(0), 2.0, 1e-14);
    // ground state <x^2> = sqrt(b/a)/2
    EXPECT_NEAR(r.covariance(0, 0), 0.25, 1e-14);
    EXPECT_NEAR(r.covariance(1, 1), 1.0, 1e-14);
    EXPECT_THROW(symplectic_diagonalize(Eigen::Matrix3d::Identity()), ArgumentError);
}

TEST(Symplectic, UnstableFormFlagged) {
    Eigen::Matrix2d M;
    M << -1.0, 0.0, 0.0, 1.0;
    auto r = symplectic_diagonalize(M);
    EXPECT_FALSE(r.stable);
    EXPECT_NEAR(r.omega_sq(0), -1.0, 1e-14);
}

TEST(HP, UncoupledModes) {
    auto r = hp_bogoliubov(collective(0.0, 0.3, 4, 0.7, 1.2));
    EXPECT_NEAR(r.Omega_plus, 1.2, 1e-14);
    EXPECT_NEAR(r.Omega_minus, 0.7, 1e-14);
    EXPECT_NEAR(r.gs_photon_number, 0.0, 1e-14);
    EXPECT_NEAR(r.u2, 1.0, 1e-14);
    EXPECT_NEAR(r.phi2, 1.0, 1e-14);
}

TEST(HP, ResonantSplitting) {
    auto r = hp_bogoliubov(collective(0.2, 0.0));
    EXPECT_NEAR(r.Omega_plus, 1.1050, 5e-5);
    EXPECT_NEAR(r.Omega_minus, 0.9050, 5e-5);
    EXPECT_GE(r.Omega_plus, r.Omega_minus);
    EXPECT_GT(r.gs_photon_number, 0.0);
}

TEST(HP, MatchesClassicalBrightBranches) {
    // nu omega_p^2 = omega0 G^2 / omega_c and eta = eps nu
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> w(0.2, 3.0), gg(0.0, 2.0), e(-0.5, 1.0), v(0.01, 1.0);
    int stable = 0;
    for (int i = 0; i < 1000; ++i) {
        const double w0 = w(rng), wc = w(rng), G = gg(rng), eps = e(rng), nu = v(rng);
        auto hp = hp_bogoliubov(collective(G, eps, 1, w0, wc));
        const double wp = std::sqrt(w0 * G * G / (wc * nu));
        auto b = classical::bright_branches({w0, wc, wp}, eps * nu, nu);
        EXPECT_EQ(hp.stable, !b.imaginary && b.Omega_minus_sq > 0.0);
        EXPECT_NEAR(hp.Omega_plus_sq, b.Omega_plus_sq, 1e-10 * std::max(1.0, b.Omega_plus_sq));
        EXPECT_NEAR(hp.Omega_minus_sq, b.Omega_minus_sq, 1e-10 * std::max(1.0, b.Omega_plus_sq));
        if (hp.stable) {
            ++stable;
            EXPECT_NEAR(hp.Omega_plus, b.Omega_plus, 1e-10);
            EXPECT_NEAR(hp.Omega_minus, b.Omega_minus, 1e-10);
        }
    }
    EXPECT_GT(stable, 500);
}

TEST(HP, LargeCouplingLimit) {
    EXPECT_NEAR(hp_photon_limit(0.05), 0.7002, 5e-5);
    EXPECT_THROW(hp_photon_limit(0.0), DomainError);
    // the approach to the limit is O(1/G) once G >> 1
    const double lim = hp_photon_limit(0.05);
    auto dev = [&](double G) { return std::abs(hp_bogoliubov(collective(G, 0.05)).gs_photon_number - lim); };
    EXPECT_LT(dev(1e3), 1e-3);
    EXPECT_NEAR(dev(1e4) / dev(1e5), 10.0, 0.2);
    EXPECT_NEAR(dev(1e5) / dev(1e6), 10.0, 0.2);
    EXPECT_LT(dev(1e6), 1e-6);
}

TEST(HP, UncertaintyAndPositivity) {
    for (double G : {0.1, 0.5, 1.0, 3.0})
        for (double eps : {0.0, 0.05, 0.5}) {
            auto r = hp_bogoliubov(collective(G, eps, 6));
            ASSERT_TRUE(r.stable);
            EXPECT_GE(r.gs_photon_number, 0.0);
            EXPECT_GE(r.u2 * r.phi2, 1.0 - 1e-12);
        }
    auto u = hp_bogoliubov(collective(2.0, -0.5, 6));
    EXPECT_FALSE(u.stable);
}
