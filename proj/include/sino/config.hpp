#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sino/recon.hpp"
#include "sino/simulate.hpp"
#include "sino/solver.hpp"

namespace sino {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace cfg {

using nlohmann::json;

inline void require_keys(const json& j, const std::string& where,
                         std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional = {})
{
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const char* k : required)
        if (!j.contains(k)) throw ConfigError(where + ": missing required key '" + k + "'");
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (const char* k : required)
            if (key == k) known = true;
        for (const char* k : optional)
            if (key == k) known = true;
        if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

inline double number(const json& j, const std::string& where)
{
    if (!j.is_number()) throw ConfigError(where + ": expected a number");
    return j.get<double>();
}

inline long integer(const json& j, const std::string& where)
{
    if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
    return j.get<long>();
}

}  // namespace cfg

struct ReferenceSpec {
    bool simulate_sibling = false;
    PhantomSpec sibling;    // when simulate_sibling
    std::string path;       // otherwise: path base of a saved z volume
};

struct PipelineConfig {
    uint64_t seed = 0;
    std::string output_dir = "out";
    PhantomSpec phantom;
    ScanGeometry geometry;
    NoiseSpec noise;
    std::string noise_preset;  // "low-noise", "high-noise", or "" for explicit
    SubsamplePattern pattern = SubsamplePattern::Alternate;
    std::vector<long> keep_views;
    ReferenceSpec reference;
    RestoreParams restore;
    RoiSpec roi;
    double window_lo = 0.0, window_hi = 1.0;
};

inline PhantomSpec parse_phantom(const cfg::json& j, const std::string& where)
{
    cfg::require_keys(j, where, {"nx", "ny", "n_slices", "ellipses"});
    PhantomSpec spec;
    spec.nx = cfg::integer(j["nx"], where + ".nx");
    spec.ny = cfg::integer(j["ny"], where + ".ny");
    spec.n_slices = cfg::integer(j["n_slices"], where + ".n_slices");
    if (!j["ellipses"].is_array()) throw ConfigError(where + ".ellipses: expected an array");
    for (size_t n = 0; n < j["ellipses"].size(); ++n) {
        const auto& je = j["ellipses"][n];
        const std::string ew = where + ".ellipses[" + std::to_string(n) + "]";
        cfg::require_keys(je, ew, {"cx", "cy", "a", "b", "mu"},
                          {"angle", "slice_begin", "slice_end"});
        Ellipse e;
        e.cx = cfg::number(je["cx"], ew + ".cx");
        e.cy = cfg::number(je["cy"], ew + ".cy");
        e.a = cfg::number(je["a"], ew + ".a");
        e.b = cfg::number(je["b"], ew + ".b");
        e.mu = cfg::number(je["mu"], ew + ".mu");
        e.angle = je.contains("angle") ? cfg::number(je["angle"], ew + ".angle") : 0.0;
        e.slice_begin =
            je.contains("slice_begin") ? cfg::integer(je["slice_begin"], ew) : 0;
        e.slice_end =
            je.contains("slice_end") ? cfg::integer(je["slice_end"], ew) : spec.n_slices;
        spec.ellipses.push_back(e);
    }
    return spec;
}

inline cfg::json phantom_to_json(const PhantomSpec& spec)
{
    cfg::json j = {{"nx", spec.nx}, {"ny", spec.ny}, {"n_slices", spec.n_slices},
                   {"ellipses", cfg::json::array()}};
    for (const auto& e : spec.ellipses)
        j["ellipses"].push_back({{"cx", e.cx},
                                 {"cy", e.cy},
                                 {"a", e.a},
                                 {"b", e.b},
                                 {"angle", e.angle},
                                 {"mu", e.mu},
                                 {"slice_begin", e.slice_begin},
                                 {"slice_end", e.slice_end}});
    return j;
}

inline PipelineConfig parse_config(const cfg::json& j)
{
    cfg::require_keys(j, "config",
                      {"seed", "phantom", "geometry", "noise", "subsample", "reference"},
                      {"output_dir", "restore", "roi", "preview_window"});
    PipelineConfig c;
    if (!j["seed"].is_number_integer() ||
        (!j["seed"].is_number_unsigned() && j["seed"].get<int64_t>() < 0))
        throw ConfigError("config.seed: expected a non-negative integer");
    c.seed = j["seed"].get<uint64_t>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();

    c.phantom = parse_phantom(j["phantom"], "config.phantom");

    {
        const auto& jg = j["geometry"];
        cfg::require_keys(jg, "config.geometry", {"n_theta", "n_u"}, {"pitch"});
        c.geometry.n_theta = cfg::integer(jg["n_theta"], "config.geometry.n_theta");
        c.geometry.n_u = cfg::integer(jg["n_u"], "config.geometry.n_u");
        c.geometry.pitch = jg.contains("pitch")
                               ? cfg::number(jg["pitch"], "config.geometry.pitch")
                               : 2.0 / static_cast<double>(c.geometry.n_u);
        try {
            c.geometry.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config.geometry: ") + e.what());
        }
    }

    {
        const auto& jn = j["noise"];
        if (jn.is_string()) {
            c.noise_preset = jn.get<std::string>();
            if (c.noise_preset == "low-noise") {
                c.noise.n0 = 1e6;
                c.noise.sigma_e = 40.0;
            } else if (c.noise_preset == "high-noise") {
                c.noise.n0 = 5e4;
                c.noise.sigma_e = 40.0;
            } else {
                throw ConfigError("config.noise: unknown preset '" + c.noise_preset + "'");
            }
        } else {
            cfg::require_keys(jn, "config.noise", {"n0", "sigma_e"});
            c.noise.n0 = cfg::number(jn["n0"], "config.noise.n0");
            c.noise.sigma_e = cfg::number(jn["sigma_e"], "config.noise.sigma_e");
        }
        c.noise.seed = c.seed;
        try {
            c.noise.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config.noise: ") + e.what());
        }
    }

    {
        const auto& js = j["subsample"];
        cfg::require_keys(js, "config.subsample", {"pattern"}, {"keep"});
        const std::string p = js["pattern"].get<std::string>();
        if (p == "alternate") {
            c.pattern = SubsamplePattern::Alternate;
        } else if (p == "explicit") {
            c.pattern = SubsamplePattern::Explicit;
            if (!js.contains("keep"))
                throw ConfigError("config.subsample: explicit pattern requires 'keep'");
            for (const auto& k : js["keep"])
                c.keep_views.push_back(cfg::integer(k, "config.subsample.keep"));
        } else {
            throw ConfigError("config.subsample.pattern: unknown pattern '" + p + "'");
        }
    }

    {
        const auto& jr = j["reference"];
        cfg::require_keys(jr, "config.reference", {"source"}, {"phantom", "path"});
        const std::string src = jr["source"].get<std::string>();
        if (src == "simulate-sibling") {
            if (!jr.contains("phantom"))
                throw ConfigError("config.reference: simulate-sibling requires 'phantom'");
            c.reference.simulate_sibling = true;
            c.reference.sibling = parse_phantom(jr["phantom"], "config.reference.phantom");
        } else if (src == "path") {
            if (!jr.contains("path"))
                throw ConfigError("config.reference: source 'path' requires 'path'");
            c.reference.path = jr["path"].get<std::string>();
        } else {
            throw ConfigError("config.reference.source: unknown source '" + src + "'");
        }
    }

    if (j.contains("restore")) {
        const auto& jr = j["restore"];
        cfg::require_keys(jr, "config.restore", {},
                          {"lambda_s", "lambda_h", "mu1", "mu2", "eps", "max_iters",
                           "gs_sweeps", "match"});
        auto& r = c.restore;
        if (jr.contains("lambda_s")) r.lambda_s = cfg::number(jr["lambda_s"], "lambda_s");
        if (jr.contains("lambda_h")) r.lambda_h = cfg::number(jr["lambda_h"], "lambda_h");
        if (jr.contains("mu1")) r.mu1 = cfg::number(jr["mu1"], "mu1");
        if (jr.contains("mu2")) r.mu2 = cfg::number(jr["mu2"], "mu2");
        if (jr.contains("eps")) r.eps = cfg::number(jr["eps"], "eps");
        if (jr.contains("max_iters")) r.max_iters = cfg::integer(jr["max_iters"], "max_iters");
        if (jr.contains("gs_sweeps")) r.gs_sweeps = cfg::integer(jr["gs_sweeps"], "gs_sweeps");
        if (jr.contains("match")) {
            const auto& jm = jr["match"];
            cfg::require_keys(jm, "config.restore.match", {},
                              {"block_radius", "k_best", "iterations", "alpha", "bandwidth"});
            auto& m = r.match;
            if (jm.contains("block_radius")) {
                const auto& br = jm["block_radius"];
                if (!br.is_array() || br.size() != 3)
                    throw ConfigError("config.restore.match.block_radius: expected 3 integers");
                m.block.ru = cfg::integer(br[0], "block_radius[0]");
                m.block.rv = cfg::integer(br[1], "block_radius[1]");
                m.block.rth = cfg::integer(br[2], "block_radius[2]");
            }
            if (jm.contains("k_best")) m.k_best = cfg::integer(jm["k_best"], "k_best");
            if (jm.contains("iterations"))
                m.iterations = cfg::integer(jm["iterations"], "iterations");
            if (jm.contains("alpha")) m.alpha = cfg::number(jm["alpha"], "alpha");
            if (jm.contains("bandwidth")) {
                if (jm["bandwidth"].is_string()) {
                    if (jm["bandwidth"].get<std::string>() != "auto")
                        throw ConfigError("config.restore.match.bandwidth: expected number or 'auto'");
                    m.bandwidth = 0.0;
                } else {
                    m.bandwidth = cfg::number(jm["bandwidth"], "bandwidth");
                }
            }
        }
        try {
            r.validate();
            r.match.validate();
        } catch (const std::exception& e) {
            throw ConfigError(std::string("config.restore: ") + e.what());
        }
    }
    c.restore.match.seed = c.seed;

    if (j.contains("roi")) {
        const auto& jr = j["roi"];
        cfg::require_keys(jr, "config.roi", {"foreground", "background"});
        auto parse_box = [&](const cfg::json& jb, const char* name) {
            if (!jb.is_array() || jb.size() != 6)
                throw ConfigError(std::string("config.roi.") + name +
                                  ": expected [x0,x1,y0,y1,s0,s1]");
            return RoiSpec::box(jb[0].get<long>(), jb[1].get<long>(), jb[2].get<long>(),
                                jb[3].get<long>(), jb[4].get<long>(), jb[5].get<long>());
        };
        c.roi.foreground = parse_box(jr["foreground"], "foreground");
        c.roi.background = parse_box(jr["background"], "background");
    }

    if (j.contains("preview_window")) {
        const auto& jw = j["preview_window"];
        if (!jw.is_array() || jw.size() != 2)
            throw ConfigError("config.preview_window: expected [lo, hi]");
        c.window_lo = cfg::number(jw[0], "preview_window[0]");
        c.window_hi = cfg::number(jw[1], "preview_window[1]");
    }
    return c;
}

inline PipelineConfig load_config(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    cfg::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("malformed config JSON: " + std::string(e.what()));
    }
    return parse_config(j);
}

/// Every field made explicit, for the output directory.
inline cfg::json resolved_config_json(const PipelineConfig& c)
{
    cfg::json j;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    j["phantom"] = phantom_to_json(c.phantom);
    j["geometry"] = {{"n_theta", c.geometry.n_theta},
                     {"n_u", c.geometry.n_u},
                     {"pitch", c.geometry.pitch}};
    j["noise"] = {{"n0", c.noise.n0}, {"sigma_e", c.noise.sigma_e}};
    if (!c.noise_preset.empty()) j["noise"]["preset"] = c.noise_preset;
    j["subsample"] = {{"pattern", c.pattern == SubsamplePattern::Alternate ? "alternate"
                                                                           : "explicit"}};
    if (c.pattern == SubsamplePattern::Explicit) j["subsample"]["keep"] = c.keep_views;
    if (c.reference.simulate_sibling)
        j["reference"] = {{"source", "simulate-sibling"},
                          {"phantom", phantom_to_json(c.reference.sibling)}};
    else
        j["reference"] = {{"source", "path"}, {"path", c.reference.path}};
    const auto& r = c.restore;
    j["restore"] = {{"lambda_s", r.lambda_s},
                    {"lambda_h", r.lambda_h},
                    {"mu1", r.mu1},
                    {"mu2", r.mu2},
                    {"eps", r.eps},
                    {"max_iters", r.max_iters},
                    {"gs_sweeps", r.gs_sweeps},
                    {"match",
                     {{"block_radius", {r.match.block.ru, r.match.block.rv, r.match.block.rth}},
                      {"k_best", r.match.k_best},
                      {"iterations", r.match.iterations},
                      {"alpha", r.match.alpha},
                      {"bandwidth", r.match.bandwidth}}}};
    j["preview_window"] = {c.window_lo, c.window_hi};
    return j;
}

}  // namespace sino
