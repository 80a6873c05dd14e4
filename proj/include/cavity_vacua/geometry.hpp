#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace cavity_vacua::geometry {

inline constexpr double pi = std::numbers::pi;

using Vec3 = Eigen::Vector3d;

enum class Boundary { FreeSpace, InfinitePlates };

inline const char* to_string(Boundary b) {
    return b == Boundary::FreeSpace ? "FreeSpace" : "InfinitePlates";
}

// Point dipoles between plates at z = 0 and z = d. Lengths in units of r0.
struct DipoleEnsemble {
    std::vector<Vec3> positions;
    double tilt_theta = 0.0;
    double r0 = 1.0;
    double d = 1.0;
    Boundary boundary = Boundary::InfinitePlates;
    int image_cutoff = 50;
    // Volume used for the filling factor; 0 when not defined by the lattice.
    double volume = 0.0;

    std::size_t size() const { return positions.size(); }
    Vec3 moment() const { return {std::sin(tilt_theta), 0.0, std::cos(tilt_theta)}; }
    Vec3 mirrored_moment() const { return {-std::sin(tilt_theta), 0.0, std::cos(tilt_theta)}; }
};

struct SlabSquare {
    int Nx = 10;
    int layers = 3;
    double d = 15.0;
};

struct LineStack {
    int N = 1;
    double d = 10.0;
};

struct TriangularLayer {
    int Nx = 10;
    double d = 10.0;
};

struct TiltedLine {
    int N = 4;
    double d = 3.0;
    double theta = 0.0;
};

struct PairOfPairs {
    double dx = 0.7;
    double d = 3.0;
};

using LatticeSpec = std::variant<SlabSquare, LineStack, TriangularLayer, TiltedLine, PairOfPairs>;

struct CouplingMatrix {
    Eigen::MatrixXd D;
    double eta = 0.0;
    double nu = std::numeric_limits<double>::quiet_NaN();
    Boundary boundary = Boundary::FreeSpace;
    double d = 0.0;
    double tilt_theta = 0.0;
    int image_cutoff = 0;
    double max_truncation_residual = 0.0;
    bool images_converged = true;
    // Image self-interaction of each dipole, removed from the diagonal of D.
    Eigen::VectorXd self_interaction;
    std::vector<std::string> warnings;

    std::size_t size() const { return static_cast<std::size_t>(D.rows()); }
};

inline void validate(const DipoleEnsemble& ens) {
    if (ens.positions.empty()) throw ArgumentError("ensemble must contain at least one dipole");
    if (ens.boundary == Boundary::InfinitePlates) {
        if (!(ens.d > 0.0)) throw GeometryError("plate separation must be positive");
        for (const auto& p : ens.positions) {
            if (!(p.z() > 0.0 && p.z() < ens.d))
                throw GeometryError("dipole outside the plates: z = " + std::to_string(p.z()));
        }
    }
}

namespace detail {

inline void require_positive(int v, const char* what) {
    if (v <= 0) throw ArgumentError(std::string(what) + " must be positive");
}

inline void require_extent(double extent, double d) {
    if (!(d > 0.0)) throw ArgumentError("plate separation must be positive");
    if (extent >= d) throw GeometryError("layer extent does not fit between the plates");
}

inline DipoleEnsemble build(const SlabSquare& s) {
    require_positive(s.Nx, "Nx");
    require_positive(s.layers, "layers");
    double extent = s.layers - 1.0;
    require_extent(extent, s.d);
    DipoleEnsemble e;
    e.d = s.d;
    double c = (s.Nx - 1) / 2.0;
    for (int l = 0; l < s.layers; ++l)
        for (int i = 0; i < s.Nx; ++i)
            for (int j = 0; j < s.Nx; ++j)
                e.positions.emplace_back(i - c, j - c, s.d / 2 + l - extent / 2);
    e.volume = double(s.Nx) * s.Nx * s.d;
    return e;
}

inline DipoleEnsemble build(const LineStack& s) {
    require_positive(s.N, "N");
    double extent = s.N - 1.0;
    require_extent(extent, s.d);
    DipoleEnsemble e;
    e.d = s.d;
    for (int k = 0; k < s.N; ++k) e.positions.emplace_back(0.0, 0.0, s.d / 2 + k - extent / 2);
    e.volume = s.d;
    return e;
}

inline DipoleEnsemble build(const TriangularLayer& s) {
    require_positive(s.Nx, "Nx");
    require_extent(0.0, s.d);
    DipoleEnsemble e;
    e.d = s.d;
    const double h = std::sqrt(3.0) / 2;
    double c = (s.Nx - 1) / 2.0;
    for (int i = 0; i < s.Nx; ++i)
        for (int j = 0; j < s.Nx; ++j)
            e.positions.emplace_back((i - c) + 0.5 * (j - c), h * (j - c), s.d / 2);
    e.volume = double(s.Nx) * s.Nx * h * s.d;
    return e;
}

inline DipoleEnsemble build(const TiltedLine& s) {
    require_positive(s.N, "N");
    require_extent(0.0, s.d);
    DipoleEnsemble e;
    e.d = s.d;
    e.tilt_theta = s.theta;
    double c = (s.N - 1) / 2.0;
    for (int k = 0; k < s.N; ++k) e.positions.emplace_back(k - c, 0.0, s.d / 2);
    // nu = 1/(4 pi)
    e.volume = 4 * pi * s.N;
    return e;
}

inline DipoleEnsemble build(const PairOfPairs& s) {
    if (s.dx < 0.0) throw ArgumentError("dx must be non-negative");
    require_extent(1.0, s.d);
    DipoleEnsemble e;
    e.d = s.d;
    for (double x : {-s.dx / 2, s.dx / 2}) {
        e.positions.emplace_back(x, 0.0, s.d / 2 - 0.5);
        e.positions.emplace_back(x, 0.0, s.d / 2 + 0.5);
    }
    e.volume = 16 * pi;
    return e;
}

// (R^2 u.v - 3 (R.u)(R.v)) / (4 pi R^5)
inline double kernel(const Vec3& R, const Vec3& u, const Vec3& v) {
    double R2 = R.squaredNorm();
    double R5 = R2 * R2 * std::sqrt(R2);
    return (R2 * u.dot(v) - 3.0 * R.dot(u) * R.dot(v)) / (4 * pi * R5);
}

inline Vec3 same_image(const Vec3& r, double d, int n) { return {r.x(), r.y(), r.z() + 2.0 * d * n}; }
inline Vec3 opposite_image(const Vec3& r, double d, int n) { return {r.x(), r.y(), -r.z() + 2.0 * d * n}; }

// Contribution of image order n to the interaction of dipole i with dipole j
// (or with its own images when ri == rj).
inline double image_order(const Vec3& ri, const Vec3& rj, const Vec3& u, const Vec3& us, double d, int n) {
    if (n == 0) return kernel(ri - opposite_image(rj, d, 0), u, us);
    double s = 0.0;
    for (int m : {n, -n}) {
        s += kernel(ri - same_image(rj, d, m), u, u);
        s += kernel(ri - opposite_image(rj, d, m), u, us);
    }
    return s;
}

inline double image_orders(const Vec3& ri, const Vec3& rj, const Vec3& u, const Vec3& us, double d, int from,
                           int to) {
    double s = 0.0;
    for (int n = from; n <= to; ++n) s += image_order(ri, rj, u, us, d, n);
    return s;
}

inline void finish(CouplingMatrix& c, const DipoleEnsemble& ens, int close_pairs) {
    const auto N = static_cast<Eigen::Index>(ens.size());
    c.self_interaction = c.D.diagonal();
    c.D.diagonal().setZero();
    c.eta = (c.D.sum()) / double(N);
    c.boundary = ens.boundary;
    c.d = ens.d;
    c.tilt_theta = ens.tilt_theta;
    if (ens.volume > 0.0) {
        c.nu = double(N) * ens.r0 * ens.r0 * ens.r0 / ens.volume;
        if (!(c.nu > 0.0 && c.nu <= 1.0))
            c.warnings.push_back("filling factor outside (0, 1]: " + std::to_string(c.nu));
    }
    if (close_pairs > 0)
        c.warnings.push_back(std::to_string(close_pairs) + " dipole pair(s) closer than r0");
}

inline int count_pair(const Vec3& R) {
    double R2 = R.squaredNorm();
    if (R2 == 0.0) throw SingularityError("coincident dipoles");
    return R2 < 0.999 * 0.999 ? 1 : 0;
}

}  // namespace detail

inline DipoleEnsemble build_lattice(const LatticeSpec& spec, Boundary boundary = Boundary::InfinitePlates,
                                    int image_cutoff = 50) {
    DipoleEnsemble e = std::visit([](const auto& s) { return detail::build(s); }, spec);
    e.boundary = boundary;
    e.image_cutoff = image_cutoff;
    validate(e);
    return e;
}

inline CouplingMatrix coupling_free_space(const DipoleEnsemble& ens) {
    validate(ens);
    const auto N = static_cast<Eigen::Index>(ens.size());
    const Vec3 u = ens.moment();
    CouplingMatrix c;
    c.D = Eigen::MatrixXd::Zero(N, N);
    int close = 0;
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = i + 1; j < N; ++j) {
            Vec3 R = ens.positions[i] - ens.positions[j];
            close += detail::count_pair(R);
            double v = detail::kernel(R, u, u);
            c.D(i, j) = v;
            c.D(j, i) = v;
        }
    }
    detail::finish(c, ens, close);
    c.boundary = Boundary::FreeSpace;
    return c;
}

struct ImageSumOptions {
    double tolerance = 1e-8;
    double convergence_flag = 1e-6;
    int max_cutoff = 1 << 14;
};

inline CouplingMatrix coupling_with_plates(const DipoleEnsemble& ens, const ImageSumOptions& opt = {}) {
    validate(ens);
    if (ens.boundary != Boundary::InfinitePlates) throw ArgumentError("ensemble has no plates");
    if (ens.image_cutoff < 1) throw ArgumentError("image cutoff must be at least 1");
    const auto N = static_cast<Eigen::Index>(ens.size());
    const Vec3 u = ens.moment();
    const Vec3 us = ens.mirrored_moment();
    const double d = ens.d;

    CouplingMatrix c;
    c.D = Eigen::MatrixXd::Zero(N, N);
    int close = 0;
    int cutoff = ens.image_cutoff;
    for (Eigen::Index i = 0; i < N; ++i) {
        const Vec3& ri = ens.positions[i];
        c.D(i, i) = detail::image_orders(ri, ri, u, us, d, 0, cutoff);
        for (Eigen::Index j = i + 1; j < N; ++j) {
            const Vec3& rj = ens.positions[j];
            close += detail::count_pair(ri - rj);
            double v = detail::kernel(ri - rj, u, u) + detail::image_orders(ri, rj, u, us, d, 0, cutoff);
            c.D(i, j) = v;
            c.D(j, i) = v;
        }
    }

    double residual = 0.0;
    while (true) {
        int next = 2 * cutoff;
        residual = 0.0;
        for (Eigen::Index i = 0; i < N; ++i) {
            const Vec3& ri = ens.positions[i];
            for (Eigen::Index j = i; j < N; ++j) {
                double delta = detail::image_orders(ri, ens.positions[j], u, us, d, cutoff + 1, next);
                c.D(i, j) += delta;
                if (j != i) c.D(j, i) += delta;
                residual = std::max(residual, std::abs(delta));
            }
        }
        cutoff = next;
        if (residual < opt.tolerance || cutoff >= opt.max_cutoff) break;
    }
    c.image_cutoff = cutoff;
    c.max_truncation_residual = residual;
    c.images_converged = residual <= opt.convergence_flag;
    detail::finish(c, ens, close);
    if (!c.images_converged) c.warnings.push_back("image sum not converged");
    return c;
}

inline CouplingMatrix coupling(const DipoleEnsemble& ens) {
    return ens.boundary == Boundary::FreeSpace ? coupling_free_space(ens) : coupling_with_plates(ens);
}

// F^n_ij summed over +n and -n (n = 0 gives the nearest mirror image only).
inline double image_order_contribution(const DipoleEnsemble& ens, std::size_t i, std::size_t j, int n) {
    return detail::image_order(ens.positions.at(i), ens.positions.at(j), ens.moment(), ens.mirrored_moment(), ens.d,
                               n);
}

inline double eta_of(const CouplingMatrix& c) {
    const double N = static_cast<double>(c.D.rows());
    return (c.D.sum() - c.D.trace()) / N;
}

inline double filling_factor(const DipoleEnsemble& ens, double volume) {
    if (!(volume > 0.0)) throw ArgumentError("volume must be positive");
    return static_cast<double>(ens.size()) * ens.r0 * ens.r0 * ens.r0 / volume;
}

inline double induced_charge_coefficient(const DipoleEnsemble& ens) {
    if (ens.boundary != Boundary::InfinitePlates) throw DomainError("induced charge requires plates");
    return -std::cos(ens.tilt_theta) / ens.d;
}

// Sum_j D_cj for the dipole nearest the centroid: the per-site value that
// eta approaches for an unbounded homogeneous layer.
inline double bulk_site_eta(const DipoleEnsemble& ens, const ImageSumOptions& opt = {}) {
    validate(ens);
    Vec3 centre = Vec3::Zero();
    for (const auto& p : ens.positions) centre += p;
    centre /= double(ens.size());
    std::size_t c = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ens.size(); ++i) {
        double r = (ens.positions[i] - centre).squaredNorm();
        if (r < best) {
            best = r;
            c = i;
        }
    }
    const Vec3 u = ens.moment();
    const Vec3 us = ens.mirrored_moment();
    const Vec3& rc = ens.positions[c];
    const bool plates = ens.boundary == Boundary::InfinitePlates;
    double s = 0.0;
    for (std::size_t j = 0; j < ens.size(); ++j) {
        if (j == c) continue;
        const Vec3& rj = ens.positions[j];
        detail::count_pair(rc - rj);
        s += detail::kernel(rc - rj, u, u);
        if (plates) {
            int cutoff = ens.image_cutoff;
            double v = detail::image_orders(rc, rj, u, us, ens.d, 0, cutoff);
            while (cutoff < opt.max_cutoff) {
                double delta = detail::image_orders(rc, rj, u, us, ens.d, cutoff + 1, 2 * cutoff);
                v += delta;
                cutoff *= 2;
                if (std::abs(delta) < opt.tolerance) break;
            }
            s += v;
        }
    }
    return s;
}

// Green's function of the 1D problem between grounded plates, Fourier
// transformed in the lateral directions.
inline double greens_fourier(double k, double z, double zp, double d) {
    if (!(d > 0.0)) throw DomainError("plate separation must be positive");
    if (z < 0.0 || z > d || zp < 0.0 || zp > d) throw DomainError("heights must lie within [0, d]");
    if (k < 0.0) throw DomainError("wavenumber must be non-negative");
    const double hi = std::max(z, zp);
    const double lo = std::min(z, zp);
    if (k * d < 1e-7) return lo * (d - hi) / d;
    // sinh(k lo) sinh(k (d - hi)) / (k sinh(k d)) with decaying exponentials only;
    // the factored form is exactly zero on either plate
    const double num = -std::expm1(-2 * k * lo) * -std::expm1(-2 * k * (d - hi));
    return std::exp(-k * (hi - lo)) * num / (2 * k * -std::expm1(-2 * k * d));
}

}  // namespace cavity_vacua::geometry
