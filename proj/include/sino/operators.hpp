#pragma once

#include <array>
#include <cmath>

#include "sino/volume.hpp"

namespace sino {

enum class Axis : int { U = 0, V = 1, Theta = 2 };

/// The three orthogonal planes of the stacked sinogram.
enum class Plane : int { UV = 0, VTheta = 1, ThetaU = 2 };

inline std::pair<Axis, Axis> plane_axes(Plane p)
{
    switch (p) {
        case Plane::UV: return {Axis::U, Axis::V};
        case Plane::VTheta: return {Axis::V, Axis::Theta};
        default: return {Axis::Theta, Axis::U};
    }
}

/// A difference stencil as (offset, coefficient) taps.
struct Stencil {
    struct Tap {
        long di, dj, dk;
        double s;
    };
    std::array<Tap, 4> taps{};
    int n = 0;
};

/// Stencil of the second-difference operator for an axis pair.
/// a == b: centered second difference. a != b: forward-forward mixed.
inline Stencil second_diff_stencil(Axis a, Axis b)
{
    auto unit = [](Axis ax, long m) -> std::array<long, 3> {
        std::array<long, 3> e{0, 0, 0};
        e[static_cast<size_t>(static_cast<int>(ax))] = m;
        return e;
    };
    Stencil st;
    if (a == b) {
        const auto p = unit(a, 1), m = unit(a, -1);
        st.taps = {{{p[0], p[1], p[2], 1.0}, {0, 0, 0, -2.0}, {m[0], m[1], m[2], 1.0}, {}}};
        st.n = 3;
    } else {
        const auto ea = unit(a, 1), eb = unit(b, 1);
        st.taps = {{{ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], 1.0},
                    {ea[0], ea[1], ea[2], -1.0},
                    {eb[0], eb[1], eb[2], -1.0},
                    {0, 0, 0, 1.0}}};
        st.n = 4;
    }
    return st;
}

/// Apply a stencil with mirror boundary (gather).
inline Volume3 apply_stencil(const Volume3& y, const Stencil& st)
{
    Volume3 out(y.nu(), y.nv(), y.ntheta());
    for (long k = 0; k < y.ntheta(); ++k)
        for (long j = 0; j < y.nv(); ++j)
            for (long i = 0; i < y.nu(); ++i) {
                double acc = 0.0;
                for (int m = 0; m < st.n; ++m) {
                    const auto& t = st.taps[static_cast<size_t>(m)];
                    acc += t.s * y.at_reflected(i + t.di, j + t.dj, k + t.dk);
                }
                out(i, j, k) = acc;
            }
    return out;
}

/// Exact adjoint of apply_stencil under the standard inner product (scatter).
inline Volume3 apply_stencil_adjoint(const Volume3& v, const Stencil& st)
{
    Volume3 out(v.nu(), v.nv(), v.ntheta());
    for (long k = 0; k < v.ntheta(); ++k)
        for (long j = 0; j < v.nv(); ++j)
            for (long i = 0; i < v.nu(); ++i) {
                const double val = v(i, j, k);
                for (int m = 0; m < st.n; ++m) {
                    const auto& t = st.taps[static_cast<size_t>(m)];
                    out(reflect_index(i + t.di, v.nu()), reflect_index(j + t.dj, v.nv()),
                        reflect_index(k + t.dk, v.ntheta())) += t.s * val;
                }
            }
    return out;
}

inline Volume3 second_diff(const Volume3& y, Axis a, Axis b)
{
    return apply_stencil(y, second_diff_stencil(a, b));
}

inline Volume3 second_diff_adjoint(const Volume3& v, Axis a, Axis b)
{
    return apply_stencil_adjoint(v, second_diff_stencil(a, b));
}

/// (D_aa y, D_ab y, D_bb y) for one plane.
struct HessianTriple {
    Volume3 aa, ab, bb;
};

inline HessianTriple hessian_plane(const Volume3& y, Plane p)
{
    const auto [a, b] = plane_axes(p);
    return {second_diff(y, a, a), second_diff(y, a, b), second_diff(y, b, b)};
}

inline std::array<HessianTriple, 3> hessian_planes(const Volume3& y)
{
    return {hessian_plane(y, Plane::UV), hessian_plane(y, Plane::VTheta),
            hessian_plane(y, Plane::ThetaU)};
}

/// Per-voxel isotropic magnitude sqrt(t_aa^2 + 2 t_ab^2 + t_bb^2).
inline Volume3 hessian_magnitude(const HessianTriple& t)
{
    Volume3 out(t.aa.nu(), t.aa.nv(), t.aa.ntheta());
    for (long n = 0; n < out.size(); ++n)
        out[n] = std::sqrt(t.aa[n] * t.aa[n] + 2.0 * t.ab[n] * t.ab[n] + t.bb[n] * t.bb[n]);
    return out;
}

/// Hessian smoothness term: sum of the three plane magnitudes over voxels.
inline double r_h(const Volume3& y)
{
    double total = 0.0;
    for (int p = 0; p < 3; ++p) {
        const auto triple = hessian_plane(y, static_cast<Plane>(p));
        const auto mag = hessian_magnitude(triple);
        for (long n = 0; n < mag.size(); ++n) total += mag[n];
    }
    return total;
}

/// Self-similarity term: squared distance to the non-local target.
inline double r_s(const Volume3& y, const Volume3& y_star)
{
    double total = 0.0;
    for (long n = 0; n < y.size(); ++n) {
        const double d = y[n] - y_star[n];
        total += d * d;
    }
    return total;
}

/// Full cost: weighted data fidelity over measured views plus both
/// regularizers. Diagnostic only.
inline double cost_J(const Volume3& y, const Volume3& y_n, const ViewMask& mask,
                     const Volume3& weights, const Volume3& y_star, double lambda_s,
                     double lambda_h)
{
    double data = 0.0;
    long mk = 0;
    for (long k = 0; k < y.ntheta(); ++k) {
        if (!mask.is_measured(k)) continue;
        for (long j = 0; j < y.nv(); ++j)
            for (long i = 0; i < y.nu(); ++i) {
                const double d = y(i, j, k) - y_n(i, j, mk);
                data += weights(i, j, mk) * d * d;
            }
        ++mk;
    }
    return data + lambda_s * r_s(y, y_star) + lambda_h * r_h(y);
}

/// Isotropic soft-thresholding of the Hessian triple: the exact minimizer of
/// t*|g|_iso + (1/2)|g - v|^2 per voxel, with the ab component carrying
/// weight 2 in both norms.
inline HessianTriple vector_shrink(const HessianTriple& v, double t)
{
    HessianTriple out{Volume3(v.aa.nu(), v.aa.nv(), v.aa.ntheta()),
                      Volume3(v.aa.nu(), v.aa.nv(), v.aa.ntheta()),
                      Volume3(v.aa.nu(), v.aa.nv(), v.aa.ntheta())};
    for (long n = 0; n < v.aa.size(); ++n) {
        const double m =
            std::sqrt(v.aa[n] * v.aa[n] + 2.0 * v.ab[n] * v.ab[n] + v.bb[n] * v.bb[n]);
        const double scale = (m > t) ? (m - t) / m : 0.0;
        out.aa[n] = scale * v.aa[n];
        out.ab[n] = scale * v.ab[n];
        out.bb[n] = scale * v.bb[n];
    }
    return out;
}

}  // namespace sino
