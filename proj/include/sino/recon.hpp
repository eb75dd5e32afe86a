#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "sino/simulate.hpp"
#include "sino/volume.hpp"

namespace sino {

namespace detail {

/// In-place iterative radix-2 FFT (n must be a power of two).
inline void fft_pow2(std::vector<std::complex<double>>& a, bool inverse)
{
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t m = 0; m < len / 2; ++m) {
                const auto u = a[i + m];
                const auto v = a[i + m + len / 2] * w;
                a[i + m] = u + v;
                a[i + m + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

inline size_t next_pow2(size_t n)
{
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// Discrete Ram-Lak convolution kernel, spatial domain.
inline std::vector<double> ramlak_kernel(long n_u, double pitch)
{
    std::vector<double> h(static_cast<size_t>(2 * n_u - 1));
    for (long m = -(n_u - 1); m <= n_u - 1; ++m) {
        double v = 0.0;
        if (m == 0)
            v = 1.0 / (4.0 * pitch * pitch);
        else if (m % 2 != 0)
            v = -1.0 / (M_PI * M_PI * static_cast<double>(m * m) * pitch * pitch);
        h[static_cast<size_t>(m + n_u - 1)] = v;
    }
    return h;
}

}  // namespace detail

/// Ramp-filter every view (FFT convolution, zero-padded to the next power of
/// two >= 2 n_u) and backproject with linear interpolation, scaled by
/// pi / n_views. Per-slice parallel-beam.
inline Volume3 fbp_reconstruct(const Volume3& sino, const ScanGeometry& geom, long nx, long ny)
{
    geom.validate();
    if (sino.nu() != geom.n_u || sino.ntheta() != geom.n_theta)
        throw std::invalid_argument("fbp_reconstruct: sinogram/geometry mismatch");
    const long n_u = geom.n_u;
    const long ns = sino.nv();
    const size_t nfft = detail::next_pow2(static_cast<size_t>(2 * n_u));

    // frequency response of the padded kernel
    const auto kernel = detail::ramlak_kernel(n_u, geom.pitch);
    std::vector<std::complex<double>> kf(nfft, 0.0);
    for (size_t m = 0; m < kernel.size(); ++m) kf[m] = kernel[m];
    detail::fft_pow2(kf, false);

    Volume3 filtered(n_u, ns, geom.n_theta);
    std::vector<std::complex<double>> buf(nfft);
    for (long k = 0; k < geom.n_theta; ++k)
        for (long j = 0; j < ns; ++j) {
            std::fill(buf.begin(), buf.end(), std::complex<double>(0.0));
            for (long i = 0; i < n_u; ++i) buf[static_cast<size_t>(i)] = sino(i, j, k);
            detail::fft_pow2(buf, false);
            for (size_t m = 0; m < nfft; ++m) buf[m] *= kf[m];
            detail::fft_pow2(buf, true);
            // kernel center sits at index n_u - 1 of the padded convolution
            for (long i = 0; i < n_u; ++i)
                filtered(i, j, k) = buf[static_cast<size_t>(i + n_u - 1)].real() * geom.pitch;
        }

    Volume3 img(nx, ny, ns);
    const double hx = 2.0 / static_cast<double>(nx);
    const double hy = 2.0 / static_cast<double>(ny);
    const double scale = M_PI / static_cast<double>(geom.n_theta);
    for (long k = 0; k < geom.n_theta; ++k) {
        const double th = geom.angle(k);
        const double c = std::cos(th), s = std::sin(th);
        for (long j = 0; j < ny; ++j) {
            const double y = (static_cast<double>(j) + 0.5) * hy - 1.0;
            for (long i = 0; i < nx; ++i) {
                const double x = (static_cast<double>(i) + 0.5) * hx - 1.0;
                const double u = x * c + y * s;
                const double fu = (u / geom.pitch) + 0.5 * static_cast<double>(n_u) - 0.5;
                const long i0 = static_cast<long>(std::floor(fu));
                if (i0 < -1 || i0 >= n_u) continue;
                const double w = fu - static_cast<double>(i0);
                for (long sl = 0; sl < ns; ++sl) {
                    const double v0 = (i0 >= 0) ? filtered(i0, sl, k) : 0.0;
                    const double v1 = (i0 + 1 < n_u) ? filtered(i0 + 1, sl, k) : 0.0;
                    img(i, j, sl) += scale * ((1.0 - w) * v0 + w * v1);
                }
            }
        }
    }
    return img;
}

inline double rmse(const Volume3& a, const Volume3& b)
{
    if (!a.same_dims(b)) throw std::invalid_argument("rmse: dims mismatch");
    double acc = 0.0;
    for (long n = 0; n < a.size(); ++n) {
        const double d = a[n] - b[n];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.size()));
}

/// Mean local SSIM over slices: 11x11 Gaussian window sigma 1.5, constants
/// C1=(0.01 L)^2, C2=(0.03 L)^2, averaged over window centers whose support
/// lies fully inside the slice.
inline double ssim(const Volume3& a, const Volume3& b, double dynamic_range)
{
    if (!a.same_dims(b)) throw std::invalid_argument("ssim: dims mismatch");
    if (dynamic_range <= 0.0) throw std::invalid_argument("ssim: dynamic range must be positive");
    constexpr int R = 5;
    double win[2 * R + 1][2 * R + 1];
    double wsum = 0.0;
    for (int dy = -R; dy <= R; ++dy)
        for (int dx = -R; dx <= R; ++dx) {
            const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
            win[dy + R][dx + R] = w;
            wsum += w;
        }
    for (auto& row : win)
        for (auto& w : row) w /= wsum;

    const double c1 = 0.01 * dynamic_range * 0.01 * dynamic_range;
    const double c2 = 0.03 * dynamic_range * 0.03 * dynamic_range;

    double total = 0.0;
    long count = 0;
    for (long sl = 0; sl < a.ntheta(); ++sl)
        for (long j = R; j < a.nv() - R; ++j)
            for (long i = R; i < a.nu() - R; ++i) {
                double ma = 0.0, mb = 0.0;
                for (int dy = -R; dy <= R; ++dy)
                    for (int dx = -R; dx <= R; ++dx) {
                        const double w = win[dy + R][dx + R];
                        ma += w * a(i + dx, j + dy, sl);
                        mb += w * b(i + dx, j + dy, sl);
                    }
                double va = 0.0, vb = 0.0, cov = 0.0;
                for (int dy = -R; dy <= R; ++dy)
                    for (int dx = -R; dx <= R; ++dx) {
                        const double w = win[dy + R][dx + R];
                        const double da = a(i + dx, j + dy, sl) - ma;
                        const double db = b(i + dx, j + dy, sl) - mb;
                        va += w * da * da;
                        vb += w * db * db;
                        cov += w * da * db;
                    }
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                         ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
    if (count == 0) throw std::invalid_argument("ssim: image smaller than the window");
    return total / static_cast<double>(count);
}

/// Foreground/background regions for contrast-to-noise.
struct RoiSpec {
    std::vector<std::array<long, 3>> foreground;  // (x, y, slice)
    std::vector<std::array<long, 3>> background;

    static std::vector<std::array<long, 3>> box(long x0, long x1, long y0, long y1, long s0,
                                                long s1)
    {
        std::vector<std::array<long, 3>> out;
        for (long s = s0; s < s1; ++s)
            for (long y = y0; y < y1; ++y)
                for (long x = x0; x < x1; ++x) out.push_back({x, y, s});
        return out;
    }
};

struct CnrError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// |mean_fg - mean_bg| / std_bg, population std.
inline double cnr(const Volume3& img, const RoiSpec& roi)
{
    if (roi.foreground.empty() || roi.background.empty())
        throw std::invalid_argument("cnr: empty ROI");
    auto mean_of = [&](const std::vector<std::array<long, 3>>& pts) {
        double m = 0.0;
        for (const auto& p : pts) m += img(p[0], p[1], p[2]);
        return m / static_cast<double>(pts.size());
    };
    const double mfg = mean_of(roi.foreground);
    const double mbg = mean_of(roi.background);
    double var = 0.0;
    for (const auto& p : roi.background) {
        const double d = img(p[0], p[1], p[2]) - mbg;
        var += d * d;
    }
    var /= static_cast<double>(roi.background.size());
    const double sd = std::sqrt(var);
    if (sd == 0.0) throw CnrError("cnr: background std is zero");
    return std::fabs(mfg - mbg) / sd;
}

}  // namespace sino
