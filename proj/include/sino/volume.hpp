#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace sino {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IndexError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

/// Mirror reflection without edge repetition: -m -> m, (n-1)+m -> (n-1)-m.
inline long reflect_index(long i, long n)
{
    if (n == 1) return 0;
    const long period = 2 * (n - 1);
    long m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - m;
}

/// Dense 3D scalar grid, u-fastest layout (u, then v, then theta).
class Volume3 {
public:
    Volume3() = default;
    Volume3(long nu, long nv, long nth, double fill = 0.0)
        : nu_(nu), nv_(nv), nth_(nth), data_(check_dims(nu, nv, nth), fill)
    {
    }

    long nu() const { return nu_; }
    long nv() const { return nv_; }
    long ntheta() const { return nth_; }
    long size() const { return static_cast<long>(data_.size()); }

    double& operator()(long i, long j, long k) { return data_[idx(i, j, k)]; }
    double operator()(long i, long j, long k) const { return data_[idx(i, j, k)]; }

    /// Value at a possibly out-of-range coordinate, mirror boundary.
    double at_reflected(long i, long j, long k) const
    {
        return data_[idx(reflect_index(i, nu_), reflect_index(j, nv_), reflect_index(k, nth_))];
    }

    double& operator[](long flat) { return data_[static_cast<size_t>(flat)]; }
    double operator[](long flat) const { return data_[static_cast<size_t>(flat)]; }

    long flat_index(long i, long j, long k) const { return i + nu_ * (j + nv_ * k); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_dims(const Volume3& o) const
    {
        return nu_ == o.nu_ && nv_ == o.nv_ && nth_ == o.nth_;
    }

    bool all_finite() const
    {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

private:
    static size_t check_dims(long nu, long nv, long nth)
    {
        if (nu <= 0 || nv <= 0 || nth <= 0)
            throw std::invalid_argument("Volume3: dims must be positive");
        return static_cast<size_t>(nu) * static_cast<size_t>(nv) * static_cast<size_t>(nth);
    }
    size_t idx(long i, long j, long k) const
    {
        if (i < 0 || i >= nu_ || j < 0 || j >= nv_ || k < 0 || k >= nth_)
            throw IndexError("Volume3: index out of bounds");
        return static_cast<size_t>(i + nu_ * (j + nv_ * k));
    }

    long nu_ = 0, nv_ = 0, nth_ = 0;
    std::vector<double> data_;
};

/// Which projection views are measured.
struct ViewMask {
    long n_theta = 0;
    std::vector<uint8_t> measured;

    ViewMask() = default;
    explicit ViewMask(long n, bool all = true)
        : n_theta(n), measured(static_cast<size_t>(n), all ? 1 : 0)
    {
    }

    long count() const
    {
        long c = 0;
        for (auto m : measured) c += m;
        return c;
    }
    bool is_measured(long k) const { return measured[static_cast<size_t>(k)] != 0; }

    /// Measured view indices in ascending order.
    std::vector<long> measured_indices() const
    {
        std::vector<long> out;
        for (long k = 0; k < n_theta; ++k)
            if (measured[static_cast<size_t>(k)]) out.push_back(k);
        return out;
    }

    void validate() const
    {
        if (n_theta <= 0 || static_cast<long>(measured.size()) != n_theta)
            throw std::invalid_argument("ViewMask: inconsistent n_theta");
        if (count() == 0) throw std::invalid_argument("ViewMask: no measured views");
    }
};

/// Block radii per axis; block dims are 2r+1 per axis.
struct BlockSpec {
    long ru = 2, rv = 2, rth = 2;
    long count() const { return (2 * ru + 1) * (2 * rv + 1) * (2 * rth + 1); }
};

/// Block around `center` with mirror boundary; u-fastest order.
inline std::vector<double> extract_block(const Volume3& vol, long ci, long cj, long ck,
                                         const BlockSpec& spec)
{
    if (ci < 0 || ci >= vol.nu() || cj < 0 || cj >= vol.nv() || ck < 0 || ck >= vol.ntheta())
        throw IndexError("extract_block: center out of bounds");
    std::vector<double> out;
    out.reserve(static_cast<size_t>(spec.count()));
    for (long dk = -spec.rth; dk <= spec.rth; ++dk)
        for (long dj = -spec.rv; dj <= spec.rv; ++dj)
            for (long di = -spec.ru; di <= spec.ru; ++di)
                out.push_back(vol.at_reflected(ci + di, cj + dj, ck + dk));
    return out;
}

// --- file I/O: <name>.json sidecar + <name>.raw of little-endian f32 ---

inline void save_volume(const Volume3& vol, const std::string& path_base)
{
    nlohmann::json meta = {
        {"dims", {vol.nu(), vol.nv(), vol.ntheta()}},
        {"dtype", "f32"},
        {"order", "u-fastest"},
        {"endianness", "little"},
    };
    std::ofstream js(path_base + ".json");
    if (!js) throw IoError("save_volume: cannot open " + path_base + ".json");
    js << meta.dump(2) << "\n";

    std::ofstream raw(path_base + ".raw", std::ios::binary);
    if (!raw) throw IoError("save_volume: cannot open " + path_base + ".raw");
    std::vector<float> buf(vol.data().begin(), vol.data().end());
    raw.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

inline Volume3 load_volume(const std::string& path_base)
{
    std::ifstream js(path_base + ".json");
    if (!js) throw IoError("load_volume: cannot open " + path_base + ".json");
    nlohmann::json meta;
    try {
        js >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_volume: malformed header: " + std::string(e.what()));
    }
    if (!meta.contains("dims") || !meta["dims"].is_array() || meta["dims"].size() != 3)
        throw IoError("load_volume: header missing dims");
    if (meta.value("dtype", "") != "f32")
        throw IoError("load_volume: unsupported dtype '" + meta.value("dtype", "") + "'");
    if (meta.value("order", "") != "u-fastest")
        throw IoError("load_volume: unsupported order");

    const long nu = meta["dims"][0].get<long>();
    const long nv = meta["dims"][1].get<long>();
    const long nth = meta["dims"][2].get<long>();
    if (nu <= 0 || nv <= 0 || nth <= 0) throw IoError("load_volume: non-positive dims");

    std::ifstream raw(path_base + ".raw", std::ios::binary | std::ios::ate);
    if (!raw) throw IoError("load_volume: cannot open " + path_base + ".raw");
    const auto bytes = static_cast<size_t>(raw.tellg());
    const size_t expect = static_cast<size_t>(nu) * nv * nth * sizeof(float);
    if (bytes != expect)
        throw IoError("load_volume: payload size mismatch (" + std::to_string(bytes) +
                      " bytes, expected " + std::to_string(expect) + ")");
    raw.seekg(0);
    std::vector<float> buf(static_cast<size_t>(nu) * nv * nth);
    raw.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));

    Volume3 vol(nu, nv, nth);
    for (size_t n = 0; n < buf.size(); ++n) {
        if (!std::isfinite(buf[n])) throw IoError("load_volume: non-finite value in payload");
        vol.data()[n] = buf[n];
    }
    return vol;
}

inline void save_mask(const ViewMask& mask, const std::string& path)
{
    nlohmann::json j = {{"n_theta", mask.n_theta}, {"measured", nlohmann::json::array()}};
    for (auto m : mask.measured) j["measured"].push_back(static_cast<int>(m));
    std::ofstream f(path);
    if (!f) throw IoError("save_mask: cannot open " + path);
    f << j.dump() << "\n";
}

inline ViewMask load_mask(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw IoError("load_mask: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("load_mask: malformed file: " + std::string(e.what()));
    }
    ViewMask mask;
    mask.n_theta = j.at("n_theta").get<long>();
    for (const auto& m : j.at("measured")) mask.measured.push_back(m.get<int>() != 0 ? 1 : 0);
    mask.validate();
    return mask;
}

}  // namespace sino
