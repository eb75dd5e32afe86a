#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "sino/block_match.hpp"
#include "sino/operators.hpp"
#include "sino/simulate.hpp"
#include "sino/volume.hpp"

namespace sino {

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RestoreParams {
    double lambda_s = 1.0;
    double lambda_h = 1e-4;
    double mu1 = 1e-3;
    double mu2 = 1e-3;
    double eps = 1e-8;       // stop when mean squared change <= eps
    long max_iters = 100;
    long gs_sweeps = 4;
    MatchParams match;

    void validate() const
    {
        if (lambda_s < 0.0 || lambda_h < 0.0)
            throw std::invalid_argument("RestoreParams: lambdas must be non-negative");
        if (mu1 <= 0.0 || mu2 <= 0.0)
            throw std::invalid_argument("RestoreParams: mu1, mu2 must be positive");
        if (eps < 0.0) throw std::invalid_argument("RestoreParams: eps must be non-negative");
        if (max_iters < 1) throw std::invalid_argument("RestoreParams: max_iters must be >= 1");
        if (gs_sweeps < 1) throw std::invalid_argument("RestoreParams: gs_sweeps must be >= 1");
    }
};

struct IterationDiagnostics {
    long iter;
    double dy_sq;     // ||y^k - y^{k-1}||^2
    double res_yf;    // ||y - f||^2 / N
    double res_g[3];  // per-plane constraint residual / N
    double cost;
};

struct SolverState {
    Volume3 y, f;
    std::array<HessianTriple, 3> g;
    Volume3 b1;
    std::array<HessianTriple, 3> b;
    long iter = 0;
    std::vector<IterationDiagnostics> diagnostics;
};

/// Place measured views and fill each missing view by linear interpolation
/// along theta between its nearest measured neighbors (wrapping).
inline Volume3 interleave_views(const Volume3& y_measured, const ViewMask& mask)
{
    mask.validate();
    if (y_measured.ntheta() != mask.count())
        throw std::invalid_argument("interleave_views: mask/view-count mismatch");
    const long nth = mask.n_theta;
    Volume3 y(y_measured.nu(), y_measured.nv(), nth);

    std::vector<long> measured_of_full(static_cast<size_t>(nth), -1);
    {
        long mk = 0;
        for (long k = 0; k < nth; ++k)
            if (mask.is_measured(k)) measured_of_full[static_cast<size_t>(k)] = mk++;
    }
    for (long k = 0; k < nth; ++k) {
        if (measured_of_full[static_cast<size_t>(k)] >= 0) {
            const long mk = measured_of_full[static_cast<size_t>(k)];
            for (long j = 0; j < y.nv(); ++j)
                for (long i = 0; i < y.nu(); ++i) y(i, j, k) = y_measured(i, j, mk);
            continue;
        }
        long lo = k, d_lo = 0;
        while (measured_of_full[static_cast<size_t>(lo)] < 0) {
            lo = (lo - 1 + nth) % nth;
            ++d_lo;
        }
        long hi = k, d_hi = 0;
        while (measured_of_full[static_cast<size_t>(hi)] < 0) {
            hi = (hi + 1) % nth;
            ++d_hi;
        }
        const long mlo = measured_of_full[static_cast<size_t>(lo)];
        const long mhi = measured_of_full[static_cast<size_t>(hi)];
        const double w_hi = static_cast<double>(d_lo) / static_cast<double>(d_lo + d_hi);
        for (long j = 0; j < y.nv(); ++j)
            for (long i = 0; i < y.nu(); ++i)
                y(i, j, k) =
                    (1.0 - w_hi) * y_measured(i, j, mlo) + w_hi * y_measured(i, j, mhi);
    }
    return y;
}

inline SolverState initialize_state(const Volume3& y_measured, const ViewMask& mask)
{
    SolverState st;
    st.y = interleave_views(y_measured, mask);
    st.f = st.y;
    st.g = hessian_planes(st.y);
    st.b1 = Volume3(st.y.nu(), st.y.nv(), st.y.ntheta());
    for (auto& t : st.b)
        t = {Volume3(st.y.nu(), st.y.nv(), st.y.ntheta()),
             Volume3(st.y.nu(), st.y.nv(), st.y.ntheta()),
             Volume3(st.y.nu(), st.y.nv(), st.y.ntheta())};
    return st;
}

/// Closed-form pointwise f-subproblem.
inline Volume3 solve_f(const SolverState& st, const Volume3& y_n, const Weights& w,
                       const ViewMask& mask, const Volume3& y_star, const RestoreParams& p)
{
    Volume3 f(st.y.nu(), st.y.nv(), st.y.ntheta());
    const double half_mu1 = 0.5 * p.mu1;
    long mk = 0;
    for (long k = 0; k < f.ntheta(); ++k) {
        const bool measured = mask.is_measured(k);
        for (long j = 0; j < f.nv(); ++j)
            for (long i = 0; i < f.nu(); ++i) {
                const double anchor = st.y(i, j, k) + st.b1(i, j, k);
                double num = p.lambda_s * y_star(i, j, k) + half_mu1 * anchor;
                double den = p.lambda_s + half_mu1;
                if (measured) {
                    const double wij = w(i, j, mk);
                    num += wij * y_n(i, j, mk);
                    den += wij;
                }
                f(i, j, k) = num / den;
            }
        if (measured) ++mk;
    }
    return f;
}

/// Shrinkage g-subproblem for one plane.
inline HessianTriple solve_g(const HessianTriple& plane_hessian, const HessianTriple& b,
                             const RestoreParams& p)
{
    HessianTriple v{Volume3(b.aa.nu(), b.aa.nv(), b.aa.ntheta()),
                    Volume3(b.aa.nu(), b.aa.nv(), b.aa.ntheta()),
                    Volume3(b.aa.nu(), b.aa.nv(), b.aa.ntheta())};
    for (long n = 0; n < v.aa.size(); ++n) {
        v.aa[n] = plane_hessian.aa[n] + b.aa[n];
        v.ab[n] = plane_hessian.ab[n] + b.ab[n];
        v.bb[n] = plane_hessian.bb[n] + b.bb[n];
    }
    return vector_shrink(v, p.lambda_h / p.mu2);
}

namespace detail {

/// The weighted second-difference operators entering the y-subproblem normal
/// equations. Each pure operator appears in two planes, each mixed in one
/// with the isotropic-norm weight 2, so all six carry weight 2.
struct NormalOp {
    Stencil st;
    double weight;
    Axis a, b;
};

inline std::array<NormalOp, 6> normal_ops()
{
    using enum Axis;
    return {{{second_diff_stencil(U, U), 2.0, U, U},
             {second_diff_stencil(V, V), 2.0, V, V},
             {second_diff_stencil(Theta, Theta), 2.0, Theta, Theta},
             {second_diff_stencil(U, V), 2.0, U, V},
             {second_diff_stencil(V, Theta), 2.0, V, Theta},
             {second_diff_stencil(Theta, U), 2.0, Theta, U}}};
}

/// x values in [-1, n] whose reflection equals t (stencil taps reach at most
/// one sample past either end).
inline int preimages(long t, long n, long out[3])
{
    int c = 0;
    out[c++] = t;
    if (n > 1 && reflect_index(-1, n) == t) out[c++] = -1;
    if (n > 1 && reflect_index(n, n) == t) out[c++] = n;
    if (n == 1) {
        out[0] = -1;
        out[1] = 0;
        out[2] = 1;
        c = 3;
    }
    return c;
}

/// (D^T D y)(I) evaluated from the current contents of y, mirror boundary.
inline double dtd_at(const Volume3& y, const Stencil& st, long i, long j, long k)
{
    double acc = 0.0;
    for (int m = 0; m < st.n; ++m) {
        const auto& tap = st.taps[static_cast<size_t>(m)];
        long pi[3], pj[3], pk[3];
        const int ni = preimages(i, y.nu(), pi);
        const int nj = preimages(j, y.nv(), pj);
        const int nk = preimages(k, y.ntheta(), pk);
        for (int a = 0; a < ni; ++a) {
            const long ri = pi[a] - tap.di;
            if (ri < 0 || ri >= y.nu()) continue;
            for (int b = 0; b < nj; ++b) {
                const long rj = pj[b] - tap.dj;
                if (rj < 0 || rj >= y.nv()) continue;
                for (int c = 0; c < nk; ++c) {
                    const long rk = pk[c] - tap.dk;
                    if (rk < 0 || rk >= y.ntheta()) continue;
                    // v = (D y)(r), gathered fresh
                    double v = 0.0;
                    for (int m2 = 0; m2 < st.n; ++m2) {
                        const auto& t2 = st.taps[static_cast<size_t>(m2)];
                        v += t2.s * y.at_reflected(ri + t2.di, rj + t2.dj, rk + t2.dk);
                    }
                    acc += tap.s * v;
                }
            }
        }
    }
    return acc;
}

/// Interior composite stencil of A = mu1 I + mu2 sum_c w_c D_c^T D_c.
struct CompositeStencil {
    struct Tap {
        long di, dj, dk;
        double s;
    };
    std::vector<Tap> taps;
    double diag = 0.0;
};

inline CompositeStencil interior_composite(double mu1, double mu2)
{
    std::map<std::array<long, 3>, double> acc;
    for (const auto& op : normal_ops()) {
        for (int m = 0; m < op.st.n; ++m)
            for (int m2 = 0; m2 < op.st.n; ++m2) {
                const auto& t1 = op.st.taps[static_cast<size_t>(m)];
                const auto& t2 = op.st.taps[static_cast<size_t>(m2)];
                acc[{t2.di - t1.di, t2.dj - t1.dj, t2.dk - t1.dk}] +=
                    mu2 * op.weight * t1.s * t2.s;
            }
    }
    acc[{0, 0, 0}] += mu1;
    CompositeStencil cs;
    for (const auto& [o, s] : acc) {
        if (s == 0.0) continue;
        if (o[0] == 0 && o[1] == 0 && o[2] == 0) cs.diag = s;
        cs.taps.push_back({o[0], o[1], o[2], s});
    }
    return cs;
}

/// diag(A) including mirror-boundary merging, via one scatter pass per op.
inline Volume3 normal_diag(long nu, long nv, long nth, double mu1, double mu2)
{
    Volume3 diag(nu, nv, nth, mu1);
    for (const auto& op : normal_ops()) {
        for (long k = 0; k < nth; ++k)
            for (long j = 0; j < nv; ++j)
                for (long i = 0; i < nu; ++i) {
                    // merged row coefficients of D at row (i,j,k)
                    std::array<std::array<long, 3>, 4> pos;
                    std::array<double, 4> coef{};
                    int cnt = 0;
                    for (int m = 0; m < op.st.n; ++m) {
                        const auto& t = op.st.taps[static_cast<size_t>(m)];
                        const std::array<long, 3> p = {reflect_index(i + t.di, nu),
                                                       reflect_index(j + t.dj, nv),
                                                       reflect_index(k + t.dk, nth)};
                        int found = -1;
                        for (int c = 0; c < cnt; ++c)
                            if (pos[static_cast<size_t>(c)] == p) found = c;
                        if (found < 0) {
                            pos[static_cast<size_t>(cnt)] = p;
                            coef[static_cast<size_t>(cnt)] = t.s;
                            ++cnt;
                        } else {
                            coef[static_cast<size_t>(found)] += t.s;
                        }
                    }
                    for (int c = 0; c < cnt; ++c)
                        diag(pos[static_cast<size_t>(c)][0], pos[static_cast<size_t>(c)][1],
                             pos[static_cast<size_t>(c)][2]) +=
                            mu2 * op.weight * coef[static_cast<size_t>(c)] *
                            coef[static_cast<size_t>(c)];
                }
    }
    return diag;
}

/// (A y)(I) from the current y (in-place Gauss-Seidel reads).
inline double apply_normal_at(const Volume3& y, long i, long j, long k, double mu1, double mu2,
                              const std::array<NormalOp, 6>& ops, const CompositeStencil& cs,
                              bool interior)
{
    if (interior) {
        double acc = 0.0;
        for (const auto& t : cs.taps) acc += t.s * y(i + t.di, j + t.dj, k + t.dk);
        return acc;
    }
    double acc = mu1 * y(i, j, k);
    for (const auto& op : ops) acc += mu2 * op.weight * dtd_at(y, op.st, i, j, k);
    return acc;
}

}  // namespace detail

/// Right-hand side of the y-subproblem normal equations.
inline Volume3 normal_rhs(const SolverState& st, const RestoreParams& p)
{
    Volume3 rhs(st.y.nu(), st.y.nv(), st.y.ntheta());
    for (long n = 0; n < rhs.size(); ++n) rhs[n] = p.mu1 * (st.f[n] - st.b1[n]);
    for (int pl = 0; pl < 3; ++pl) {
        const auto [a, b] = plane_axes(static_cast<Plane>(pl));
        const auto& g = st.g[static_cast<size_t>(pl)];
        const auto& bb = st.b[static_cast<size_t>(pl)];
        Volume3 tmp(rhs.nu(), rhs.nv(), rhs.ntheta());
        auto add_component = [&](const Volume3& gc, const Volume3& bc, Axis x, Axis yax,
                                 double w) {
            for (long n = 0; n < tmp.size(); ++n) tmp[n] = gc[n] - bc[n];
            const Volume3 adj = second_diff_adjoint(tmp, x, yax);
            for (long n = 0; n < rhs.size(); ++n) rhs[n] += p.mu2 * w * adj[n];
        };
        add_component(g.aa, bb.aa, a, a, 1.0);
        add_component(g.ab, bb.ab, a, b, 2.0);
        add_component(g.bb, bb.bb, b, b, 1.0);
    }
    return rhs;
}

/// Lexicographic Gauss-Seidel sweeps on the y-subproblem normal equations.
inline Volume3 solve_y(const SolverState& st, const RestoreParams& p)
{
    const Volume3 rhs = normal_rhs(st, p);
    Volume3 y = st.y;
    const auto ops = detail::normal_ops();
    const auto cs = detail::interior_composite(p.mu1, p.mu2);
    const Volume3 diag = detail::normal_diag(y.nu(), y.nv(), y.ntheta(), p.mu1, p.mu2);
    for (long sweep = 0; sweep < p.gs_sweeps; ++sweep) {
        for (long k = 0; k < y.ntheta(); ++k) {
            const bool kin = (k >= 2 && k < y.ntheta() - 2);
            for (long j = 0; j < y.nv(); ++j) {
                const bool jin = kin && (j >= 2 && j < y.nv() - 2);
                for (long i = 0; i < y.nu(); ++i) {
                    const bool interior = jin && (i >= 2 && i < y.nu() - 2);
                    const double ay =
                        detail::apply_normal_at(y, i, j, k, p.mu1, p.mu2, ops, cs, interior);
                    y(i, j, k) += (rhs(i, j, k) - ay) / diag(i, j, k);
                }
            }
        }
    }
    return y;
}

inline void update_bregman(SolverState& st)
{
    for (long n = 0; n < st.y.size(); ++n) st.b1[n] += st.y[n] - st.f[n];
    const auto h = hessian_planes(st.y);
    for (int pl = 0; pl < 3; ++pl) {
        auto& b = st.b[static_cast<size_t>(pl)];
        const auto& hp = h[static_cast<size_t>(pl)];
        const auto& g = st.g[static_cast<size_t>(pl)];
        for (long n = 0; n < b.aa.size(); ++n) {
            b.aa[n] += hp.aa[n] - g.aa[n];
            b.ab[n] += hp.ab[n] - g.ab[n];
            b.bb[n] += hp.bb[n] - g.bb[n];
        }
    }
}

struct SolveResult {
    Volume3 y;
    Volume3 y_star;
    std::vector<IterationDiagnostics> diagnostics;
};

/// Full split Bregman restoration. The non-local target is fixed once, from
/// the view-interpolated initialization, before the loop.
inline SolveResult run_solver(const Volume3& y_measured, const ViewMask& mask,
                              const Weights& weights, const Volume3& z,
                              const RestoreParams& params)
{
    params.validate();
    SolverState st = initialize_state(y_measured, mask);
    const long n_total = st.y.size();

    Volume3 y_star;
    if (params.lambda_s > 0.0) {
        const MatchField field = patchmatch_knn(st.y, z, mask, params.match);
        const double a =
            params.match.bandwidth > 0.0 ? params.match.bandwidth : estimate_bandwidth(field);
        y_star = compute_nlm_target(st.y, z, field, a, mask);
    } else {
        y_star = Volume3(st.y.nu(), st.y.nv(), st.y.ntheta());
    }

    for (long it = 1; it <= params.max_iters; ++it) {
        const Volume3 y_prev = st.y;
        st.f = solve_f(st, y_measured, weights, mask, y_star, params);
        const auto h = hessian_planes(st.y);
        for (int pl = 0; pl < 3; ++pl)
            st.g[static_cast<size_t>(pl)] =
                solve_g(h[static_cast<size_t>(pl)], st.b[static_cast<size_t>(pl)], params);
        st.y = solve_y(st, params);
        update_bregman(st);
        st.iter = it;

        if (!st.y.all_finite())
            throw NumericalError("solver: non-finite value at iteration " + std::to_string(it));

        IterationDiagnostics d{};
        d.iter = it;
        d.dy_sq = 0.0;
        for (long n = 0; n < n_total; ++n) {
            const double dd = st.y[n] - y_prev[n];
            d.dy_sq += dd * dd;
        }
        d.res_yf = 0.0;
        for (long n = 0; n < n_total; ++n) {
            const double dd = st.y[n] - st.f[n];
            d.res_yf += dd * dd;
        }
        d.res_yf /= static_cast<double>(n_total);
        const auto hk = hessian_planes(st.y);
        for (int pl = 0; pl < 3; ++pl) {
            double r = 0.0;
            const auto& hp = hk[static_cast<size_t>(pl)];
            const auto& g = st.g[static_cast<size_t>(pl)];
            for (long n = 0; n < n_total; ++n) {
                const double daa = hp.aa[n] - g.aa[n];
                const double dab = hp.ab[n] - g.ab[n];
                const double dbb = hp.bb[n] - g.bb[n];
                r += daa * daa + 2.0 * dab * dab + dbb * dbb;
            }
            d.res_g[pl] = r / static_cast<double>(n_total);
        }
        d.cost = cost_J(st.y, y_measured, mask, weights, y_star, params.lambda_s,
                        params.lambda_h);
        st.diagnostics.push_back(d);

        if (d.dy_sq <= params.eps * static_cast<double>(n_total)) break;
    }
    return {std::move(st.y), std::move(y_star), std::move(st.diagnostics)};
}

inline void write_diagnostics_csv(const std::vector<IterationDiagnostics>& diag,
                                  const std::string& path)
{
    std::ofstream f(path);
    if (!f) throw IoError("write_diagnostics_csv: cannot open " + path);
    f << "iter,dy_sq,res_yf,res_g1,res_g2,res_g3,J\n";
    char buf[256];
    for (const auto& d : diag) {
        std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", d.iter,
                      d.dy_sq, d.res_yf, d.res_g[0], d.res_g[1], d.res_g[2], d.cost);
        f << buf;
    }
}

}  // namespace sino
