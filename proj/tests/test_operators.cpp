#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <bit>
#include <cmath>

#include "cavity_vacua/operators.hpp"

using namespace cavity_vacua;
using namespace cavity_vacua::ops;

namespace {

Eigen::MatrixXd dense(const SpMat& m) { return Eigen::MatrixXd(m); }

// Columns are the normalized symmetric states with k spins up, in product basis.
Eigen::MatrixXd symmetrizer(int N) {
    const int dim = 1 << N;
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(dim, N + 1);
    for (int s = 0; s < dim; ++s) V(s, std::popcount(unsigned(s))) = 1.0;
    for (int k = 0; k <= N; ++k) V.col(k).normalize();
    return V;
}

}  // namespace

TEST(Fock, TwoLevelLadder) {
    auto f = fock_ops(2);
    Eigen::Matrix2d a;
    a << 0, 1, 0, 0;
    EXPECT_EQ(dense(f.a), Eigen::MatrixXd(a));
    EXPECT_EQ(dense(f.a_dag), Eigen::MatrixXd(a.transpose()));
}

TEST(Fock, NumberOperatorDiagonal) {
    auto f = fock_ops(9);
    Eigen::MatrixXd n = dense(f.a_dag * f.a);
    for (int k = 0; k < 9; ++k) EXPECT_NEAR(n(k, k), k, 1e-14);
    EXPECT_LT((n - dense(f.n)).norm(), 1e-13);
}

TEST(Fock, CommutatorDefectOnlyAtTopLevel) {
    const int n_max = 7;
    auto f = fock_ops(n_max);
    Eigen::MatrixXd c = dense(f.a * f.a_dag - f.a_dag * f.a) - Eigen::MatrixXd::Identity(n_max, n_max);
    for (int i = 0; i < n_max; ++i)
        for (int j = 0; j < n_max; ++j) {
            if (i == n_max - 1 && j == n_max - 1)
                EXPECT_NEAR(c(i, j), -double(n_max), 1e-13);
            else
                EXPECT_NEAR(c(i, j), 0.0, 1e-13);
        }
    EXPECT_THROW(fock_ops(0), ArgumentError);
}

TEST(Fock, FluxSquaredMatchesUntruncatedProduct) {
    // the product of larger truncations is exact away from the top levels
    const int n = 10;
    auto big = fock_ops(n + 2);
    Eigen::MatrixXd g = dense(big.a_dag - big.a);
    Eigen::MatrixXd ref = (-g * g).topLeftCorner(n, n);
    EXPECT_LT((dense(flux_squared(n)) - ref).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(CollectiveSpin, SingleSpinIsHalfPauli) {
    auto s = collective_spin_ops(1);
    Eigen::Matrix2d sx, isy, sz;
    sx << 0, 0.5, 0.5, 0;
    // basis (down, up): i*Sy = [[0, -1/2], [1/2, 0]]
    isy << 0, -0.5, 0.5, 0;
    sz << -0.5, 0, 0, 0.5;
    EXPECT_EQ(dense(s.Sx), Eigen::MatrixXd(sx));
    EXPECT_EQ(dense(s.iSy), Eigen::MatrixXd(isy));
    EXPECT_EQ(dense(s.Sz), Eigen::MatrixXd(sz));
}

TEST(CollectiveSpin, AngularMomentumAlgebra) {
    for (int N : {1, 2, 5, 8}) {
        auto s = collective_spin_ops(N);
        Eigen::MatrixXd X = dense(s.Sx), Y = dense(s.iSy), Z = dense(s.Sz);
        // [Sx, Sy] = i Sz  <=>  [Sx, iSy] = -Sz
        EXPECT_LT((X * Y - Y * X + Z).cwiseAbs().maxCoeff(), 1e-13);
        EXPECT_LT((Y * Z - Z * Y + X).cwiseAbs().maxCoeff(), 1e-13);
        const double S = N / 2.0;
        Eigen::MatrixXd cas = X * X - Y * Y + Z * Z;
        EXPECT_LT((cas - S * (S + 1) * Eigen::MatrixXd::Identity(N + 1, N + 1)).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((dense(s.S2) - cas).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(CollectiveSpin, SzSpectrumForEight) {
    auto s = collective_spin_ops(8);
    Eigen::VectorXd d = dense(s.Sz).diagonal();
    for (int k = 0; k <= 8; ++k) EXPECT_DOUBLE_EQ(d(k), k - 4.0);
}

TEST(Pauli, SingleSiteIsPauli) {
    auto p = pauli_ops(1);
    Eigen::Matrix2d x, z;
    x << 0, 1, 1, 0;
    z << -1, 0, 0, 1;
    EXPECT_EQ(dense(p.sx[0]), Eigen::MatrixXd(x));
    EXPECT_EQ(dense(p.sz[0]), Eigen::MatrixXd(z));
    Eigen::MatrixXd y = dense(p.isy[0]);
    EXPECT_LT((y * y + Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-15);
}

TEST(Pauli, PairCorrelatorEigenvalues) {
    auto p = pauli_ops(2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense(p.sx[0] * p.sx[1]));
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::abs(es.eigenvalues()(i)), 1.0, 1e-14);
    EXPECT_NEAR(es.eigenvalues().sum(), 0.0, 1e-14);
}

TEST(Pauli, SitesCommute) {
    auto p = pauli_ops(3);
    Eigen::MatrixXd a = dense(p.sx[0]), b = dense(p.isy[2]);
    EXPECT_LT((a * b - b * a).norm(), 1e-15);
}

TEST(Pauli, SymmetricSectorMatchesDicke) {
    for (int N : {2, 3, 5}) {
        auto c = collective_from_pauli(pauli_ops(N));
        auto d = collective_spin_ops(N);
        Eigen::MatrixXd V = symmetrizer(N);
        EXPECT_LT((V.transpose() * dense(c.Sx) * V - dense(d.Sx)).cwiseAbs().maxCoeff(), 1e-13);
        EXPECT_LT((V.transpose() * dense(c.iSy) * V - dense(d.iSy)).cwiseAbs().maxCoeff(), 1e-13);
        EXPECT_LT((V.transpose() * dense(c.Sz) * V - dense(d.Sz)).cwiseAbs().maxCoeff(), 1e-13);
        // the symmetric sector is invariant
        Eigen::MatrixXd P = V * V.transpose();
        Eigen::MatrixXd X = dense(c.Sx);
        EXPECT_LT((P * X * P - X * P).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(Pauli, DimensionGuard) { EXPECT_THROW(pauli_ops(max_pauli_sites + 1), DimensionError); }

TEST(Kron, DimensionsAndValues) {
    auto f = fock_ops(3);
    auto s = collective_spin_ops(2);
    SpMat k = kron(f.n, s.Sz);
    EXPECT_EQ(k.rows(), 9);
    // photon-major: index n * 3 + m
    EXPECT_DOUBLE_EQ(Eigen::MatrixXd(k)(2 * 3 + 2, 2 * 3 + 2), 2.0 * 1.0);
}

TEST(Displacement, ZeroShiftIsIdentity) {
    for (int n = 0; n < 5; ++n)
        for (int m = 0; m < 5; ++m) EXPECT_EQ(displacement_element(n, m, 0.0), n == m ? 1.0 : 0.0);
}

TEST(Displacement, VacuumOverlap) {
    for (double b : {0.1, 0.7, 2.0, 5.0}) EXPECT_NEAR(displacement_element(0, 0, b), std::exp(-b * b / 2), 1e-15);
}

TEST(Displacement, MatchesMatrixExponential) {
    const int n_max = 64;
    auto f = fock_ops(n_max);
    for (double beta : {0.5, -1.3}) {
        Eigen::MatrixXd G = beta * dense(f.a_dag - f.a);
        Eigen::MatrixXd E = G.exp();
        for (int n = 0; n < 24; ++n)
            for (int m = 0; m < 24; ++m) EXPECT_NEAR(displacement_element(n, m, beta), E(n, m), 1e-12);
    }
    EXPECT_NEAR(displacement_element(1, 0, 0.5), 0.5 * std::exp(-0.125), 1e-15);
    EXPECT_NEAR(displacement_element(1, 0, 0.5), 0.44125, 5e-6);
}

TEST(Displacement, UnitaryAndLargeIndicesFinite) {
    // columns of low Fock states stay normalized when the cutoff is large
    Eigen::MatrixXd D = displacement_matrix(400, 3.0);
    for (int m = 0; m < 50; ++m) EXPECT_NEAR(D.col(m).squaredNorm(), 1.0, 1e-12);
    double far = displacement_element(1500, 1400, 10.0);
    EXPECT_TRUE(std::isfinite(far));
    EXPECT_THROW(displacement_element(-1, 0, 1.0), ArgumentError);
}

TEST(Displacement, InverseIsNegatedShift) {
    Eigen::MatrixXd D = displacement_matrix(120, 1.1);
    Eigen::MatrixXd Dm = displacement_matrix(120, -1.1);
    Eigen::MatrixXd P = (Dm * D).topLeftCorner(40, 40);
    EXPECT_LT((P - Eigen::MatrixXd::Identity(40, 40)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((Dm - D.transpose()).cwiseAbs().maxCoeff(), 1e-14);
}
