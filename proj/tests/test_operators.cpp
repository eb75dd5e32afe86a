#include <catch_amalgamated.hpp>

#include <vector>

#include "sino/operators.hpp"
#include "sino/rng.hpp"

using namespace sino;
using Catch::Approx;

namespace {

Volume3 random_volume(long nu, long nv, long nth, uint64_t seed)
{
    Volume3 v(nu, nv, nth);
    Rng rng(seed);
    for (long n = 0; n < v.size(); ++n) v[n] = rng.normal();
    return v;
}

double dot(const Volume3& a, const Volume3& b)
{
    double s = 0.0;
    for (long n = 0; n < a.size(); ++n) s += a[n] * b[n];
    return s;
}

// dense matrix of a stencil operator with mirror boundary, built column by
// column from unit vectors; used as the independent adjoint/solve oracle
std::vector<std::vector<double>> dense_operator(const Stencil& st, long nu, long nv, long nth)
{
    const long n = nu * nv * nth;
    std::vector<std::vector<double>> mat(static_cast<size_t>(n),
                                         std::vector<double>(static_cast<size_t>(n), 0.0));
    for (long col = 0; col < n; ++col) {
        Volume3 e(nu, nv, nth);
        e[col] = 1.0;
        const Volume3 de = apply_stencil(e, st);
        for (long row = 0; row < n; ++row) mat[static_cast<size_t>(row)][static_cast<size_t>(col)] = de[row];
    }
    return mat;
}

}  // namespace

TEST_CASE("D_uu is exactly 2 on a quadratic ramp")
{
    Volume3 y(8, 4, 4);
    for (long k = 0; k < 4; ++k)
        for (long j = 0; j < 4; ++j)
            for (long i = 0; i < 8; ++i) y(i, j, k) = static_cast<double>(i * i);
    const Volume3 d = second_diff(y, Axis::U, Axis::U);
    for (long k = 0; k < 4; ++k)
        for (long j = 0; j < 4; ++j)
            for (long i = 1; i < 7; ++i) CHECK(d(i, j, k) == Approx(2.0));
}

TEST_CASE("second differences annihilate affine volumes")
{
    Volume3 y(6, 6, 6);
    for (long k = 0; k < 6; ++k)
        for (long j = 0; j < 6; ++j)
            for (long i = 0; i < 6; ++i)
                y(i, j, k) = 1.5 + 2.0 * i - 0.5 * j + 0.25 * k;
    for (Axis a : {Axis::U, Axis::V, Axis::Theta}) {
        const Volume3 d = second_diff(y, a, a);
        for (long k = 1; k < 5; ++k)
            for (long j = 1; j < 5; ++j)
                for (long i = 1; i < 5; ++i) CHECK(d(i, j, k) == Approx(0.0).margin(1e-12));
    }
    const Volume3 duv = second_diff(y, Axis::U, Axis::V);
    for (long k = 1; k < 5; ++k)
        for (long j = 1; j < 4; ++j)
            for (long i = 1; i < 4; ++i) CHECK(duv(i, j, k) == Approx(0.0).margin(1e-12));
}

TEST_CASE("D_uv is 1 on a bilinear volume")
{
    Volume3 y(6, 6, 3);
    for (long k = 0; k < 3; ++k)
        for (long j = 0; j < 6; ++j)
            for (long i = 0; i < 6; ++i) y(i, j, k) = static_cast<double>(i * j);
    const Volume3 d = second_diff(y, Axis::U, Axis::V);
    for (long k = 0; k < 3; ++k)
        for (long j = 1; j < 4; ++j)
            for (long i = 1; i < 4; ++i) CHECK(d(i, j, k) == Approx(1.0));
}

TEST_CASE("hessian_planes matches the brute-force stencil on a random volume")
{
    const Volume3 y = random_volume(8, 8, 8, 11);
    const auto planes = hessian_planes(y);
    // independent oracle: explicit stencil evaluation with reflected reads
    auto ref = [&](long i, long j, long k) { return y.at_reflected(i, j, k); };
    for (long k = 0; k < 8; ++k)
        for (long j = 0; j < 8; ++j)
            for (long i = 0; i < 8; ++i) {
                const double duu = ref(i + 1, j, k) - 2.0 * ref(i, j, k) + ref(i - 1, j, k);
                const double dvv = ref(i, j + 1, k) - 2.0 * ref(i, j, k) + ref(i, j - 1, k);
                const double duv =
                    ref(i + 1, j + 1, k) - ref(i + 1, j, k) - ref(i, j + 1, k) + ref(i, j, k);
                CHECK(planes[0].aa(i, j, k) == Approx(duu).margin(1e-14));
                CHECK(planes[0].ab(i, j, k) == Approx(duv).margin(1e-14));
                CHECK(planes[0].bb(i, j, k) == Approx(dvv).margin(1e-14));
            }
}

TEST_CASE("cross terms vanish for separable volumes")
{
    Volume3 y(6, 6, 6);
    for (long k = 0; k < 6; ++k)
        for (long j = 0; j < 6; ++j)
            for (long i = 0; i < 6; ++i)
                y(i, j, k) = i * i + 3.0 * j * j * j + std::sin(0.3 * k);
    for (auto [a, b] : {std::pair{Axis::U, Axis::V}, {Axis::V, Axis::Theta},
                        {Axis::Theta, Axis::U}}) {
        const Volume3 d = second_diff(y, a, b);
        for (long k = 1; k < 4; ++k)
            for (long j = 1; j < 4; ++j)
                for (long i = 1; i < 4; ++i) CHECK(d(i, j, k) == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("hessian_magnitude evaluates the weighted Euclidean norm")
{
    HessianTriple t{Volume3(1, 1, 3), Volume3(1, 1, 3), Volume3(1, 1, 3)};
    t.aa[0] = 3.0; t.ab[0] = 0.0; t.bb[0] = 4.0;
    t.aa[1] = 0.0; t.ab[1] = 1.0; t.bb[1] = 0.0;
    t.aa[2] = 1.0; t.ab[2] = 1.0; t.bb[2] = 1.0;
    const Volume3 m = hessian_magnitude(t);
    CHECK(m[0] == Approx(5.0));
    CHECK(m[1] == Approx(std::sqrt(2.0)));
    CHECK(m[2] == Approx(2.0));
}

TEST_CASE("r_h vanishes on constants, on affine interiors, and is positively homogeneous")
{
    CHECK(r_h(Volume3(5, 5, 5, 4.2)) == Approx(0.0).margin(1e-12));

    // affine data: the interior magnitudes vanish (the reflected boundary
    // extension of a ramp is not affine, so boundary voxels contribute)
    Volume3 affine(7, 7, 7);
    for (long k = 0; k < 7; ++k)
        for (long j = 0; j < 7; ++j)
            for (long i = 0; i < 7; ++i) affine(i, j, k) = 1.0 + i - 2.0 * j + 0.5 * k;
    for (int p = 0; p < 3; ++p) {
        const auto mag = hessian_magnitude(hessian_plane(affine, static_cast<Plane>(p)));
        for (long k = 1; k < 5; ++k)
            for (long j = 1; j < 5; ++j)
                for (long i = 1; i < 5; ++i) CHECK(mag(i, j, k) == Approx(0.0).margin(1e-12));
    }

    Volume3 y = random_volume(5, 5, 5, 3);
    const double base = r_h(y);
    Volume3 scaled = y;
    for (long n = 0; n < y.size(); ++n) scaled[n] *= -2.5;
    CHECK(r_h(scaled) == Approx(2.5 * base).epsilon(1e-12));
}

TEST_CASE("r_h of i^2 matches a direct summation oracle")
{
    Volume3 y(10, 6, 6);
    for (long k = 0; k < 6; ++k)
        for (long j = 0; j < 6; ++j)
            for (long i = 0; i < 10; ++i) y(i, j, k) = static_cast<double>(i * i);
    double expected = 0.0;
    for (int p = 0; p < 3; ++p) {
        const auto triple = hessian_plane(y, static_cast<Plane>(p));
        for (long n = 0; n < y.size(); ++n)
            expected += std::sqrt(triple.aa[n] * triple.aa[n] +
                                  2.0 * triple.ab[n] * triple.ab[n] +
                                  triple.bb[n] * triple.bb[n]);
    }
    CHECK(r_h(y) == Approx(expected).epsilon(1e-12));
    // interior voxels contribute 2 in each of the two planes containing u
    const auto uv = hessian_plane(y, Plane::UV);
    for (long k = 1; k < 5; ++k)
        for (long j = 1; j < 5; ++j)
            for (long i = 1; i < 9; ++i) CHECK(uv.aa(i, j, k) == Approx(2.0));
}

TEST_CASE("r_s sums squared differences")
{
    const Volume3 a = random_volume(4, 4, 4, 5);
    Volume3 b = a;
    CHECK(r_s(a, b) == 0.0);
    for (long n = 0; n < b.size(); ++n) b[n] += 0.5;
    CHECK(r_s(a, b) == Approx(0.25 * a.size()).epsilon(1e-12));

    const Volume3 c = random_volume(4, 4, 4, 6);
    double expected = 0.0;
    for (long n = 0; n < a.size(); ++n) expected += (a[n] - c[n]) * (a[n] - c[n]);
    CHECK(r_s(a, c) == Approx(expected).epsilon(1e-12));
}

TEST_CASE("cost_J vanishes when every term vanishes")
{
    Volume3 y(4, 4, 4, 2.5);
    ViewMask mask(4, true);
    Volume3 w(4, 4, 4, 1.0);
    CHECK(cost_J(y, y, mask, w, y, 1.0, 1e-4) == Approx(0.0).margin(1e-12));
}

TEST_CASE("cost_J reduces to the weighted data term when lambdas vanish")
{
    const Volume3 y = random_volume(4, 3, 4, 8);
    ViewMask mask(4, false);
    mask.measured = {1, 0, 1, 0};
    Volume3 y_n(4, 3, 2);
    Volume3 w(4, 3, 2);
    Rng rng(9);
    for (long n = 0; n < y_n.size(); ++n) {
        y_n[n] = rng.normal();
        w[n] = 0.5 + rng.uniform();
    }
    const Volume3 y_star = random_volume(4, 3, 4, 10);
    double expected = 0.0;
    long mk = 0;
    for (long k = 0; k < 4; ++k) {
        if (!mask.is_measured(k)) continue;
        for (long j = 0; j < 3; ++j)
            for (long i = 0; i < 4; ++i) {
                const double d = y(i, j, k) - y_n(i, j, mk);
                expected += w(i, j, mk) * d * d;
            }
        ++mk;
    }
    CHECK(cost_J(y, y_n, mask, w, y_star, 0.0, 0.0) == Approx(expected).epsilon(1e-12));
}

TEST_CASE("vector_shrink scales toward zero by the threshold")
{
    HessianTriple v{Volume3(1, 1, 1), Volume3(1, 1, 1), Volume3(1, 1, 1)};
    v.aa[0] = 3.0; v.ab[0] = 0.0; v.bb[0] = 4.0;
    const auto out = vector_shrink(v, 1.0);
    CHECK(out.aa[0] == Approx(2.4));
    CHECK(out.ab[0] == Approx(0.0).margin(1e-15));
    CHECK(out.bb[0] == Approx(3.2));

    const auto zero = vector_shrink(v, 5.0);
    CHECK(zero.aa[0] == 0.0);
    CHECK(zero.bb[0] == 0.0);
}

TEST_CASE("vector_shrink matches a golden-section proximal oracle")
{
    // per voxel the prox reduces to a 1D problem in the scale of v
    Rng rng(13);
    const double t = 0.3;
    for (int trial = 0; trial < 20; ++trial) {
        HessianTriple v{Volume3(1, 1, 1), Volume3(1, 1, 1), Volume3(1, 1, 1)};
        v.aa[0] = rng.normal();
        v.ab[0] = rng.normal();
        v.bb[0] = rng.normal();
        const double m = std::sqrt(v.aa[0] * v.aa[0] + 2.0 * v.ab[0] * v.ab[0] +
                                   v.bb[0] * v.bb[0]);
        // minimize t*s + 0.5*(s - m)^2 over s >= 0 by golden-section search
        auto obj = [&](double s) { return t * s + 0.5 * (s - m) * (s - m); };
        double lo = 0.0, hi = m + 1.0;
        const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
        while (hi - lo > 1e-12) {
            const double x1 = hi - gr * (hi - lo);
            const double x2 = lo + gr * (hi - lo);
            if (obj(x1) < obj(x2)) hi = x2; else lo = x1;
        }
        const double s_opt = 0.5 * (lo + hi);
        const auto out = vector_shrink(v, t);
        const double m_out = std::sqrt(out.aa[0] * out.aa[0] + 2.0 * out.ab[0] * out.ab[0] +
                                       out.bb[0] * out.bb[0]);
        CHECK(m_out == Approx(s_opt).margin(1e-9));
    }
}

TEST_CASE("vector_shrink is non-expansive per voxel")
{
    Rng rng(21);
    HessianTriple v{Volume3(2, 2, 2), Volume3(2, 2, 2), Volume3(2, 2, 2)};
    for (long n = 0; n < 8; ++n) {
        v.aa[n] = rng.normal();
        v.ab[n] = rng.normal();
        v.bb[n] = rng.normal();
    }
    const auto out = vector_shrink(v, 0.7);
    const Volume3 m_in = hessian_magnitude(v);
    const Volume3 m_out = hessian_magnitude(out);
    for (long n = 0; n < 8; ++n) CHECK(m_out[n] <= m_in[n] + 1e-14);
}

TEST_CASE("adjoint identity holds for every axes pair")
{
    for (auto [a, b] : {std::pair{Axis::U, Axis::U}, {Axis::V, Axis::V},
                        {Axis::Theta, Axis::Theta}, {Axis::U, Axis::V},
                        {Axis::V, Axis::Theta}, {Axis::Theta, Axis::U}}) {
        const Volume3 x = random_volume(8, 8, 8, 100 + static_cast<int>(a));
        const Volume3 v = random_volume(8, 8, 8, 200 + static_cast<int>(b));
        const double lhs = dot(second_diff(x, a, b), v);
        const double rhs = dot(x, second_diff_adjoint(v, a, b));
        CHECK(lhs == Approx(rhs).epsilon(1e-10));
    }
}

TEST_CASE("adjoint of zero is zero")
{
    const Volume3 z(4, 4, 4);
    const Volume3 out = second_diff_adjoint(z, Axis::U, Axis::V);
    for (long n = 0; n < out.size(); ++n) CHECK(out[n] == 0.0);
}

TEST_CASE("adjoint matches the dense transpose at 6^3")
{
    const Stencil st = second_diff_stencil(Axis::U, Axis::V);
    const auto mat = dense_operator(st, 6, 6, 6);
    const Volume3 v = random_volume(6, 6, 6, 77);
    const Volume3 adj = second_diff_adjoint(v, Axis::U, Axis::V);
    const long n = 6 * 6 * 6;
    for (long row = 0; row < n; ++row) {
        double expected = 0.0;
        for (long col = 0; col < n; ++col)
            expected += mat[static_cast<size_t>(col)][static_cast<size_t>(row)] * v[col];
        CHECK(adj[row] == Approx(expected).margin(1e-12));
    }
}
