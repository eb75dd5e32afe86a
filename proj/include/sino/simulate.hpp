#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sino/rng.hpp"
#include "sino/volume.hpp"

namespace sino {

struct SpecError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// One additive ellipse; coordinates live in the unit field of view [-1, 1]^2.
struct Ellipse {
    double cx = 0.0, cy = 0.0;
    double a = 0.5, b = 0.5;   // semi-axes
    double angle = 0.0;        // rotation, radians
    double mu = 1.0;           // additive attenuation
    long slice_begin = 0;      // [begin, end) slice range
    long slice_end = 1;

    bool contains(double x, double y) const
    {
        const double dx = x - cx, dy = y - cy;
        const double c = std::cos(angle), s = std::sin(angle);
        const double xr = c * dx + s * dy;
        const double yr = -s * dx + c * dy;
        return (xr * xr) / (a * a) + (yr * yr) / (b * b) <= 1.0;
    }
};

struct PhantomSpec {
    long nx = 0, ny = 0, n_slices = 0;
    std::vector<Ellipse> ellipses;
};

/// Parallel-beam, per-slice geometry. Angles span [0, pi) uniformly unless
/// a custom list is supplied.
struct ScanGeometry {
    long n_theta = 0;
    long n_u = 0;
    double pitch = 0.0;                 // detector sampling pitch
    std::vector<double> angles;         // empty -> uniform [0, pi)

    double angle(long k) const
    {
        if (!angles.empty()) return angles[static_cast<size_t>(k)];
        return M_PI * static_cast<double>(k) / static_cast<double>(n_theta);
    }
    /// Detector offset of column i, centered on zero.
    double u(long i) const { return (static_cast<double>(i) + 0.5 - 0.5 * static_cast<double>(n_u)) * pitch; }

    void validate() const
    {
        if (n_theta < 2 || n_u < 2) throw SpecError("ScanGeometry: n_u, n_theta must be >= 2");
        if (pitch <= 0.0) throw SpecError("ScanGeometry: pitch must be positive");
        for (size_t k = 1; k < angles.size(); ++k)
            if (angles[k] <= angles[k - 1]) throw SpecError("ScanGeometry: angles must increase");
    }

    static ScanGeometry standard(long n_theta, long n_u)
    {
        ScanGeometry g;
        g.n_theta = n_theta;
        g.n_u = n_u;
        g.pitch = 2.0 / static_cast<double>(n_u);
        return g;
    }
};

struct NoiseSpec {
    double n0 = 1e6;       // incident photons per ray
    double sigma_e = 40.0; // electronic noise std, detector counts
    uint64_t seed = 0;

    void validate() const
    {
        if (n0 <= 0.0) throw SpecError("NoiseSpec: N0 must be positive");
        if (sigma_e < 0.0) throw SpecError("NoiseSpec: sigma_e must be non-negative");
    }
};

/// Per-pixel fidelity weights, same dims as the measured sinogram.
using Weights = Volume3;

/// Voxel value = sum of attenuations of the ellipses containing its center.
inline Volume3 make_phantom(const PhantomSpec& spec)
{
    if (spec.nx <= 0 || spec.ny <= 0 || spec.n_slices <= 0)
        throw SpecError("PhantomSpec: dims must be positive");
    Volume3 img(spec.nx, spec.ny, spec.n_slices);
    const double hx = 2.0 / static_cast<double>(spec.nx);
    const double hy = 2.0 / static_cast<double>(spec.ny);
    for (long s = 0; s < spec.n_slices; ++s)
        for (long j = 0; j < spec.ny; ++j)
            for (long i = 0; i < spec.nx; ++i) {
                const double x = (static_cast<double>(i) + 0.5) * hx - 1.0;
                const double y = (static_cast<double>(j) + 0.5) * hy - 1.0;
                double mu = 0.0;
                for (const auto& e : spec.ellipses)
                    if (s >= e.slice_begin && s < e.slice_end && e.contains(x, y)) mu += e.mu;
                if (mu < 0.0) throw SpecError("make_phantom: negative total attenuation");
                img(i, j, s) = mu;
            }
    return img;
}

/// Line integrals by ray marching (step <= half a voxel, bilinear samples).
/// Output dims (n_u, n_slices, n_theta).
inline Volume3 forward_project(const Volume3& image, const ScanGeometry& geom)
{
    geom.validate();
    const long nx = image.nu(), ny = image.nv(), ns = image.ntheta();
    Volume3 sino(geom.n_u, ns, geom.n_theta);

    const double hx = 2.0 / static_cast<double>(nx);
    const double hy = 2.0 / static_cast<double>(ny);
    const double step = 0.5 * std::min(hx, hy);
    const double t_max = 1.6;  // covers the unit field of view with margin
    const long n_steps = static_cast<long>(std::ceil(2.0 * t_max / step));
    const double dt = 2.0 * t_max / static_cast<double>(n_steps);

    for (long k = 0; k < geom.n_theta; ++k) {
        const double th = geom.angle(k);
        const double c = std::cos(th), s = std::sin(th);
        for (long slice = 0; slice < ns; ++slice) {
            for (long i = 0; i < geom.n_u; ++i) {
                const double u = geom.u(i);
                // ray: p(t) = u*(c,s) + t*(-s,c)
                double acc = 0.0;
                for (long m = 0; m <= n_steps; ++m) {
                    const double t = -t_max + dt * static_cast<double>(m);
                    const double x = u * c - t * s;
                    const double y = u * s + t * c;
                    // bilinear sample, zero outside the image
                    const double fi = (x + 1.0) / hx - 0.5;
                    const double fj = (y + 1.0) / hy - 0.5;
                    const long i0 = static_cast<long>(std::floor(fi));
                    const long j0 = static_cast<long>(std::floor(fj));
                    if (i0 < -1 || i0 >= nx || j0 < -1 || j0 >= ny) continue;
                    const double wi = fi - static_cast<double>(i0);
                    const double wj = fj - static_cast<double>(j0);
                    auto pix = [&](long ii, long jj) -> double {
                        if (ii < 0 || ii >= nx || jj < 0 || jj >= ny) return 0.0;
                        return image(ii, jj, slice);
                    };
                    // trapezoid-like endpoint weighting is unnecessary; ends lie outside
                    acc += dt * ((1.0 - wi) * (1.0 - wj) * pix(i0, j0) +
                                 wi * (1.0 - wj) * pix(i0 + 1, j0) +
                                 (1.0 - wi) * wj * pix(i0, j0 + 1) +
                                 wi * wj * pix(i0 + 1, j0 + 1));
                }
                sino(i, slice, k) = acc;
            }
        }
    }
    return sino;
}

/// Photon-counting noise: I ~ Poisson(N0 exp(-y_t)) + N(0, sigma_e^2),
/// clamped at one count, then y_n = ln(N0 / I). Per-voxel counter-based
/// streams keyed on (seed, flat index) make the result order-independent.
inline Volume3 add_noise(const Volume3& y_t, const NoiseSpec& noise)
{
    noise.validate();
    Volume3 y_n(y_t.nu(), y_t.nv(), y_t.ntheta());
    for (long n = 0; n < y_t.size(); ++n) {
        const double yt = y_t[n];
        if (yt < 0.0) throw SpecError("add_noise: negative line integral");
        Rng rng(noise.seed, static_cast<uint64_t>(n));
        const double lambda = noise.n0 * std::exp(-yt);
        double counts = static_cast<double>(rng.poisson(lambda));
        if (noise.sigma_e > 0.0) counts += noise.sigma_e * rng.normal();
        if (counts < 1.0) counts = 1.0;
        y_n[n] = std::log(noise.n0 / counts);
    }
    return y_n;
}

enum class SubsamplePattern { Alternate, Explicit };

/// Keep a subset of views; returns the measured sinogram (views in original
/// order) and the mask of kept positions.
inline std::pair<Volume3, ViewMask> subsample_views(const Volume3& y, SubsamplePattern pattern,
                                                    const std::vector<long>& keep = {})
{
    const long nth = y.ntheta();
    ViewMask mask(nth, false);
    if (pattern == SubsamplePattern::Alternate) {
        for (long k = 0; k < nth; k += 2) mask.measured[static_cast<size_t>(k)] = 1;
    } else {
        for (long k : keep) {
            if (k < 0 || k >= nth) throw SpecError("subsample_views: index out of range");
            mask.measured[static_cast<size_t>(k)] = 1;
        }
    }
    if (mask.count() == 0) throw SpecError("subsample_views: empty keep-set");

    Volume3 measured(y.nu(), y.nv(), mask.count());
    long out_k = 0;
    for (long k = 0; k < nth; ++k) {
        if (!mask.is_measured(k)) continue;
        for (long j = 0; j < y.nv(); ++j)
            for (long i = 0; i < y.nu(); ++i) measured(i, j, out_k) = y(i, j, k);
        ++out_k;
    }
    return {std::move(measured), std::move(mask)};
}

/// Inverse-variance fidelity weights: w = exp(-y) normalized to max 1.
inline Weights compute_weights(const Volume3& y_measured)
{
    Weights w(y_measured.nu(), y_measured.nv(), y_measured.ntheta());
    double wmax = 0.0;
    for (long n = 0; n < y_measured.size(); ++n) {
        w[n] = std::exp(-y_measured[n]);
        wmax = std::max(wmax, w[n]);
    }
    for (long n = 0; n < w.size(); ++n) w[n] /= wmax;
    return w;
}

}  // namespace sino
