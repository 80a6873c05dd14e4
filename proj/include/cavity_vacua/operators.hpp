#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <vector>

#include "errors.hpp"

namespace cavity_vacua::ops {

using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

inline SpMat from_triplets(Eigen::Index rows, Eigen::Index cols, const Triplets& t) {
    SpMat m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

inline SpMat identity(Eigen::Index n) {
    SpMat m(n, n);
    m.setIdentity();
    return m;
}

inline SpMat kron(const SpMat& a, const SpMat& b) {
    SpMat out = Eigen::kroneckerProduct(a, b);
    out.prune(0.0);
    return out;
}

struct FockOps {
    SpMat a;
    SpMat a_dag;
    SpMat n;
};

// Ladder operators on the Fock states 0 .. n_max-1.
inline FockOps fock_ops(int n_max) {
    if (n_max < 1) throw ArgumentError("photon cutoff must be at least 1");
    Triplets ta, tn;
    for (int k = 1; k < n_max; ++k) ta.emplace_back(k - 1, k, std::sqrt(double(k)));
    for (int k = 1; k < n_max; ++k) tn.emplace_back(k, k, double(k));
    FockOps f;
    f.a = from_triplets(n_max, n_max, ta);
    f.a_dag = SpMat(f.a.transpose());
    f.n = from_triplets(n_max, n_max, tn);
    return f;
}

// -(a^dag - a)^2 from exact elements, without the truncation defect of the
// matrix product.
inline SpMat flux_squared(int n_max) {
    Triplets t;
    for (int k = 0; k < n_max; ++k) {
        t.emplace_back(k, k, 2.0 * k + 1.0);
        if (k + 2 < n_max) {
            double v = -std::sqrt((k + 1.0) * (k + 2.0));
            t.emplace_back(k + 2, k, v);
            t.emplace_back(k, k + 2, v);
        }
    }
    return from_triplets(n_max, n_max, t);
}

// Collective spin S = N/2 in the Dicke basis, index k = m + S (k = 0 is all
// spins down). Sy is imaginary, so the real matrix iSy = i*Sy is returned.
struct SpinOps {
    SpMat Sx;
    SpMat iSy;
    SpMat Sz;
    SpMat S2;
};

inline SpinOps collective_spin_ops(int N) {
    if (N < 1) throw ArgumentError("N must be at least 1");
    const double S = N / 2.0;
    const int dim = N + 1;
    Triplets tp, tz;
    for (int k = 0; k + 1 < dim; ++k) {
        double m = k - S;
        tp.emplace_back(k + 1, k, std::sqrt(S * (S + 1) - m * (m + 1)));
    }
    for (int k = 0; k < dim; ++k) tz.emplace_back(k, k, k - S);
    SpMat sp = from_triplets(dim, dim, tp);
    SpMat sm = sp.transpose();
    SpinOps s;
    s.Sx = 0.5 * (sp + sm);
    s.iSy = 0.5 * (sp - sm);
    s.Sz = from_triplets(dim, dim, tz);
    s.S2 = S * (S + 1) * identity(dim);
    return s;
}

inline constexpr int max_pauli_sites = 12;

// Per-site Pauli matrices in the 2^N product basis; site 0 is the most
// significant bit, bit value 1 means spin up.
struct PauliOps {
    std::vector<SpMat> sx;
    std::vector<SpMat> isy;
    std::vector<SpMat> sz;
};

inline PauliOps pauli_ops(int N) {
    if (N < 1) throw ArgumentError("N must be at least 1");
    if (N > max_pauli_sites) throw DimensionError("product basis limited to 12 spins");
    const Eigen::Index dim = Eigen::Index(1) << N;
    PauliOps p;
    for (int i = 0; i < N; ++i) {
        const Eigen::Index bit = Eigen::Index(1) << (N - 1 - i);
        Triplets tx, ty, tz;
        for (Eigen::Index s = 0; s < dim; ++s) {
            Eigen::Index f = s ^ bit;
            bool up = (s & bit) != 0;
            tx.emplace_back(f, s, 1.0);
            // i*sigma_y maps down -> up with +1 and up -> down with -1
            ty.emplace_back(f, s, up ? -1.0 : 1.0);
            tz.emplace_back(s, s, up ? 1.0 : -1.0);
        }
        p.sx.push_back(from_triplets(dim, dim, tx));
        p.isy.push_back(from_triplets(dim, dim, ty));
        p.sz.push_back(from_triplets(dim, dim, tz));
    }
    return p;
}

// Collective operators sum_i sigma_k^i / 2 on the product basis.
inline SpinOps collective_from_pauli(const PauliOps& p) {
    const Eigen::Index dim = p.sx.front().rows();
    SpinOps s;
    s.Sx = SpMat(dim, dim);
    s.iSy = SpMat(dim, dim);
    s.Sz = SpMat(dim, dim);
    for (std::size_t i = 0; i < p.sx.size(); ++i) {
        s.Sx += 0.5 * p.sx[i];
        s.iSy += 0.5 * p.isy[i];
        s.Sz += 0.5 * p.sz[i];
    }
    SpMat y2 = s.iSy * s.iSy;
    s.S2 = SpMat(s.Sx * s.Sx) - y2 + SpMat(s.Sz * s.Sz);
    return s;
}

// <n| exp(beta (a^dag - a)) |m> through the associated Laguerre closed form.
inline double displacement_element(int n, int m, double beta) {
    if (n < 0 || m < 0) throw ArgumentError("Fock indices must be non-negative");
    if (beta == 0.0) return n == m ? 1.0 : 0.0;
    double b = beta;
    if (n < m) {
        std::swap(n, m);
        b = -beta;
    }
    const int alpha = n - m;
    const double x = beta * beta;
    // L_m^(alpha)(x) by upward recurrence with rescaling
    double prev = 1.0;
    double cur = 1.0;
    double log_scale = 0.0;
    if (m >= 1) {
        cur = 1.0 + alpha - x;
        for (int k = 1; k < m; ++k) {
            double next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
            prev = cur;
            cur = next;
            if (std::abs(cur) > 1e150) {
                prev *= 1e-150;
                cur *= 1e-150;
                log_scale += 150.0 * std::log(10.0);
            }
        }
    }
    if (cur == 0.0) return 0.0;
    double sign = (cur < 0.0 ? -1.0 : 1.0) * ((b < 0.0 && alpha % 2 == 1) ? -1.0 : 1.0);
    double log_mag = 0.5 * (std::lgamma(m + 1.0) - std::lgamma(n + 1.0)) + alpha * std::log(std::abs(b)) - x / 2 +
                     log_scale + std::log(std::abs(cur));
    return sign * std::exp(log_mag);
}

inline Eigen::MatrixXd displacement_matrix(int n_max, double beta) {
    Eigen::MatrixXd D(n_max, n_max);
    for (int n = 0; n < n_max; ++n)
        for (int m = 0; m < n_max; ++m) D(n, m) = displacement_element(n, m, beta);
    return D;
}

}  // namespace cavity_vacua::ops
