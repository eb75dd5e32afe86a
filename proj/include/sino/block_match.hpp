#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sino/rng.hpp"
#include "sino/volume.hpp"

namespace sino {

struct MatchEntry {
    long oi = 0, oj = 0, ok = 0;  // block center in the reference scan
    double dist = std::numeric_limits<double>::infinity();
};

/// Per-voxel list of the K best reference-block candidates, sorted by
/// non-decreasing distance.
struct MatchField {
    long nu = 0, nv = 0, nth = 0;
    long k_best = 0;
    std::vector<MatchEntry> entries;  // size * k_best, contiguous per voxel

    MatchField() = default;
    MatchField(long nu_, long nv_, long nth_, long k)
        : nu(nu_), nv(nv_), nth(nth_), k_best(k),
          entries(static_cast<size_t>(nu_) * nv_ * nth_ * k, MatchEntry{})
    {
    }

    long size() const { return nu * nv * nth; }
    MatchEntry* voxel(long flat) { return entries.data() + static_cast<size_t>(flat) * k_best; }
    const MatchEntry* voxel(long flat) const
    {
        return entries.data() + static_cast<size_t>(flat) * k_best;
    }

    /// Insert candidate if it improves the list; keeps sorted order and
    /// rejects duplicate offsets. Returns true on insertion.
    bool try_insert(long flat, const MatchEntry& cand)
    {
        MatchEntry* list = voxel(flat);
        if (cand.dist >= list[k_best - 1].dist) return false;
        for (long m = 0; m < k_best; ++m)
            if (std::isfinite(list[m].dist) && list[m].oi == cand.oi && list[m].oj == cand.oj &&
                list[m].ok == cand.ok)
                return false;
        long pos = k_best - 1;
        while (pos > 0 && list[pos - 1].dist > cand.dist) {
            list[pos] = list[pos - 1];
            --pos;
        }
        list[pos] = cand;
        return true;
    }
};

struct MatchParams {
    BlockSpec block;
    long k_best = 8;
    long iterations = 5;
    double alpha = 0.5;      // random-search window decay
    uint64_t seed = 0;
    double bandwidth = 0.0;  // <= 0 means "auto" (median K-th distance)

    void validate() const
    {
        if (k_best < 1) throw std::invalid_argument("MatchParams: K must be >= 1");
        if (iterations < 1) throw std::invalid_argument("MatchParams: iterations must be >= 1");
        if (alpha <= 0.0 || alpha >= 1.0)
            throw std::invalid_argument("MatchParams: alpha must be in (0,1)");
    }
};

/// Mean squared block difference restricted to measured views (theta index
/// taken in y's frame, after mirror reflection). +inf if nothing overlaps.
inline double block_distance(const Volume3& y, long ci, long cj, long ck, const Volume3& z,
                             long zi, long zj, long zk, const BlockSpec& spec,
                             const ViewMask& mask)
{
    double acc = 0.0;
    long count = 0;
    for (long dk = -spec.rth; dk <= spec.rth; ++dk) {
        const long ky = reflect_index(ck + dk, y.ntheta());
        if (!mask.is_measured(ky)) continue;
        const long kz = reflect_index(zk + dk, z.ntheta());
        for (long dj = -spec.rv; dj <= spec.rv; ++dj) {
            const long jy = reflect_index(cj + dj, y.nv());
            const long jz = reflect_index(zj + dj, z.nv());
            for (long di = -spec.ru; di <= spec.ru; ++di) {
                const double d = y(reflect_index(ci + di, y.nu()), jy, ky) -
                                 z(reflect_index(zi + di, z.nu()), jz, kz);
                acc += d * d;
                ++count;
            }
        }
    }
    if (count == 0) return std::numeric_limits<double>::infinity();
    return acc / static_cast<double>(count);
}

/// Generalized PatchMatch restricted to k-NN retrieval: random init, then
/// alternating causal propagation and exponentially shrinking random search.
/// Sequential scan order; deterministic for a fixed seed.
inline MatchField patchmatch_knn(const Volume3& y, const Volume3& z, const ViewMask& mask,
                                 const MatchParams& params)
{
    params.validate();
    MatchField field(y.nu(), y.nv(), y.ntheta(), params.k_best);
    Rng rng(params.seed);

    auto dist_at = [&](long i, long j, long k, long zi, long zj, long zk) {
        return block_distance(y, i, j, k, z, zi, zj, zk, params.block, mask);
    };
    auto propose = [&](long flat, long i, long j, long k, long zi, long zj, long zk) {
        zi = std::clamp(zi, 0L, z.nu() - 1);
        zj = std::clamp(zj, 0L, z.nv() - 1);
        zk = std::clamp(zk, 0L, z.ntheta() - 1);
        MatchEntry cand{zi, zj, zk, 0.0};
        // duplicate check before the expensive distance
        const MatchEntry* list = field.voxel(flat);
        for (long m = 0; m < params.k_best; ++m)
            if (std::isfinite(list[m].dist) && list[m].oi == zi && list[m].oj == zj &&
                list[m].ok == zk)
                return;
        cand.dist = dist_at(i, j, k, zi, zj, zk);
        field.try_insert(flat, cand);
    };

    // random initialization
    for (long k = 0; k < y.ntheta(); ++k)
        for (long j = 0; j < y.nv(); ++j)
            for (long i = 0; i < y.nu(); ++i) {
                const long flat = y.flat_index(i, j, k);
                long attempts = 0;
                while (attempts < 2 * params.k_best ||
                       (!std::isfinite(field.voxel(flat)[params.k_best - 1].dist) &&
                        attempts < 16 * params.k_best)) {
                    propose(flat, i, j, k, rng.uniform_int(z.nu()), rng.uniform_int(z.nv()),
                            rng.uniform_int(z.ntheta()));
                    ++attempts;
                }
            }

    const long w0 = std::max({z.nu(), z.nv(), z.ntheta()});
    for (long sweep = 0; sweep < params.iterations; ++sweep) {
        const bool forward = (sweep % 2 == 0);
        const long step = forward ? 1 : -1;
        const long k0 = forward ? 0 : y.ntheta() - 1;
        const long j0 = forward ? 0 : y.nv() - 1;
        const long i0 = forward ? 0 : y.nu() - 1;
        for (long k = k0; k >= 0 && k < y.ntheta(); k += step)
            for (long j = j0; j >= 0 && j < y.nv(); j += step)
                for (long i = i0; i >= 0 && i < y.nu(); i += step) {
                    const long flat = y.flat_index(i, j, k);
                    // propagation from the three causal neighbors
                    auto propagate = [&](long ni, long nj, long nk, long si, long sj, long sk) {
                        if (ni < 0 || ni >= y.nu() || nj < 0 || nj >= y.nv() || nk < 0 ||
                            nk >= y.ntheta())
                            return;
                        const MatchEntry* nb = field.voxel(y.flat_index(ni, nj, nk));
                        for (long m = 0; m < params.k_best; ++m) {
                            if (!std::isfinite(nb[m].dist)) continue;
                            propose(flat, i, j, k, nb[m].oi + si, nb[m].oj + sj, nb[m].ok + sk);
                        }
                    };
                    propagate(i - step, j, k, step, 0, 0);
                    propagate(i, j - step, k, 0, step, 0);
                    propagate(i, j, k - step, 0, 0, step);
                    // random search around each current best
                    for (long m = 0; m < params.k_best; ++m) {
                        const MatchEntry base = field.voxel(flat)[m];
                        if (!std::isfinite(base.dist)) continue;
                        for (double w = static_cast<double>(w0); w >= 1.0; w *= params.alpha) {
                            const long r = static_cast<long>(w);
                            propose(flat, i, j, k,
                                    base.oi + rng.uniform_int(2 * r + 1) - r,
                                    base.oj + rng.uniform_int(2 * r + 1) - r,
                                    base.ok + rng.uniform_int(2 * r + 1) - r);
                        }
                    }
                }
    }
    return field;
}

/// Kernel bandwidth for "auto" mode: a with a^2 = median over voxels of the
/// K-th best distance, clamped below.
inline double estimate_bandwidth(const MatchField& field)
{
    std::vector<double> worst;
    worst.reserve(static_cast<size_t>(field.size()));
    for (long n = 0; n < field.size(); ++n) {
        const double d = field.voxel(n)[field.k_best - 1].dist;
        if (std::isfinite(d)) worst.push_back(d);
    }
    double a_sq = 1e-12;
    if (!worst.empty()) {
        const size_t mid = worst.size() / 2;
        std::nth_element(worst.begin(), worst.begin() + static_cast<long>(mid), worst.end());
        a_sq = std::max(worst[mid], 1e-12);
    }
    return std::sqrt(a_sq);
}

/// Non-local target y*: per voxel, the Gaussian-weighted convex combination
/// of reference values at the matched block centers. Weights use the stored
/// masked distances with the max exponent subtracted before exponentiation;
/// if everything underflows the best match takes weight one.
inline Volume3 compute_nlm_target(const Volume3& y, const Volume3& z, const MatchField& field,
                                  double a, const ViewMask& mask)
{
    (void)y;
    (void)mask;
    if (a <= 0.0) throw std::invalid_argument("compute_nlm_target: bandwidth must be positive");
    const double a_sq = a * a;
    Volume3 out(field.nu, field.nv, field.nth);
    for (long n = 0; n < field.size(); ++n) {
        const MatchEntry* list = field.voxel(n);
        double emax = -std::numeric_limits<double>::infinity();
        for (long m = 0; m < field.k_best; ++m)
            if (std::isfinite(list[m].dist)) emax = std::max(emax, -list[m].dist / a_sq);
        double wsum = 0.0, vsum = 0.0;
        if (std::isfinite(emax)) {
            for (long m = 0; m < field.k_best; ++m) {
                if (!std::isfinite(list[m].dist)) continue;
                const double w = std::exp(-list[m].dist / a_sq - emax);
                wsum += w;
                vsum += w * z(list[m].oi, list[m].oj, list[m].ok);
            }
        }
        if (wsum <= 0.0) {
            out[n] = z(list[0].oi, list[0].oj, list[0].ok);
        } else {
            out[n] = vsum / wsum;
        }
    }
    return out;
}

/// Debug dump: best distances as a volume plus a JSON offsets file.
inline void dump_match_field(const MatchField& field, const std::string& path_base)
{
    Volume3 best(field.nu, field.nv, field.nth);
    nlohmann::json offsets = nlohmann::json::array();
    for (long n = 0; n < field.size(); ++n) {
        const MatchEntry* list = field.voxel(n);
        best[n] = std::isfinite(list[0].dist) ? list[0].dist : -1.0;
        nlohmann::json vox = nlohmann::json::array();
        for (long m = 0; m < field.k_best; ++m)
            vox.push_back({list[m].oi, list[m].oj, list[m].ok});
        offsets.push_back(std::move(vox));
    }
    save_volume(best, path_base + "_dist");
    std::ofstream f(path_base + "_offsets.json");
    if (!f) throw IoError("dump_match_field: cannot open offsets file");
    f << offsets.dump() << "\n";
}

}  // namespace sino
