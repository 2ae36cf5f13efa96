// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fhr/io.hpp"
#include "fhr/phantom.hpp"
#include "fhr/recon.hpp"
#include "fhr/refine.hpp"
#include "fhr/scansim.hpp"

namespace fhr {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// How the discriminator's training pools are built: `train_phantoms` phantoms from the
/// same family, each scanned along the configured trajectory; the ground-truth
/// reconstruction is a real sample and `fakes_per_phantom` noisy-estimate reconstructions are fakes.
struct PriorConfig {
    FeatureSpec features;
    int train_phantoms = 8;
    int fakes_per_phantom = 2;
    std::uint64_t seed = 1000;  // phantom k uses seed + k; disjoint from experiment seeds

    void validate() const {
        if (features.pool < 1 || features.bins < 2) throw std::invalid_argument("prior: bad feature spec");
        if (train_phantoms < 1 || fakes_per_phantom < 1) throw std::invalid_argument("prior: pools must be non-empty");
    }
};

struct ExperimentConfig {
    PhantomSpec phantom;
    TrajectorySpec trajectory;
    FrameGeometry frame;
    Pose start;  // pose of frame 1 in phantom coordinates
    NoiseModel noise;
    ReconParams recon;
    RefineConfig refine;  // refine.recon is kept equal to recon
    PriorConfig prior;
    int bench_seeds = 10;
    std::string out_dir = "out";
    std::uint64_t seed = 0;

    void validate() const {
        if (phantom.empty()) throw std::invalid_argument("config: phantom has no structures");
        phantom.grid.validate();
        trajectory.validate();
        frame.validate();
        if (!start.is_finite()) throw std::invalid_argument("config: start pose must be finite");
        noise.validate();
        recon.validate();
        refine.validate();
        prior.validate();
        if (bench_seeds < 1) throw std::invalid_argument("config: bench.seeds must be >= 1");
    }
};

/// Sphere + tube phantom scanned along a loop / fast-slow / sector hybrid of 24 frames,
/// with a biased noisy estimator. Reconstruction happens in frame-1 coordinates.
inline ExperimentConfig default_config() {
    ExperimentConfig c;
    c.phantom.grid = Grid{{56, 56, 56}, {1.0, 1.0, 1.0}, {-27.5, -27.5, -27.5}};
    c.phantom.background = 0.2;
    c.phantom.sigma = 1.0;
    c.phantom.jitter = 1.0;
    c.phantom.texture = 0.1;
    c.phantom.ellipsoids = {{{0.0, 0.0, 4.0}, {8.0, 8.0, 8.0}, 0.75}};
    c.phantom.tubes = {{{-15.0, -10.0, -12.0}, {12.0, 10.0, 18.0}, 2.5, 1.0}};

    TrajectorySpec loop;
    loop.kind = TrajectoryKind::loop;
    loop.n_frames = 9;
    loop.step = 0.5;
    loop.turn_back = 6;
    TrajectorySpec fast_slow;
    fast_slow.kind = TrajectoryKind::fast_slow;
    fast_slow.n_frames = 9;
    fast_slow.step = 0.5;
    fast_slow.amplitude = 0.5;
    fast_slow.period = 4;
    TrajectorySpec sector;
    sector.kind = TrajectoryKind::sector;
    sector.n_frames = 8;
    sector.step = 0.5;
    sector.tilt = 0.02;
    c.trajectory.kind = TrajectoryKind::hybrid;
    c.trajectory.segments = {loop, fast_slow, sector};

    c.frame = FrameGeometry{64, 64, 0.5};
    c.start = Pose{0.0, 0.0, -5.0, 0.02, -0.03, 0.05};
    c.noise.bias = {0.05, 0.05, 0.05, 0.0, 0.0, 0.0};
    c.noise.sigma = {0.02, 0.02, 0.02, 0.02, 0.02, 0.02};
    c.recon.grid = Grid{{32, 32, 20}, {1.0, 1.0, 1.0}, {-15.5, -15.5, -3.5}};
    c.refine.recon = c.recon;
    return c;
}

namespace detail {

inline std::string join_doubles(std::span<const double> v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

inline std::string vec3_list(const Vec3& v) {
    const double a[3] = {v.x, v.y, v.z};
    return join_doubles(a);
}

inline std::vector<double> doubles(const std::string& key, const std::string& value, std::size_t n) {
    const auto f = split(value, ',');
    if (f.size() != n)
        throw ConfigError(key + ": expected " + std::to_string(n) + " comma-separated values, got " +
                          std::to_string(f.size()));
    std::vector<double> out;
    for (const auto& s : f) out.push_back(parse_double(s));
    return out;
}

inline Vec3 vec3_value(const std::string& key, const std::string& value) {
    const auto d = doubles(key, value, 3);
    return {d[0], d[1], d[2]};
}

inline std::array<double, 6> six_values(const std::string& key, const std::string& value) {
    const auto d = doubles(key, value, 6);
    return {d[0], d[1], d[2], d[3], d[4], d[5]};
}

inline int int_value(const std::string& key, const std::string& value) {
    try {
        return static_cast<int>(parse_int(value));
    } catch (const IoError& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

inline double double_value(const std::string& key, const std::string& value) {
    try {
        return parse_double(value);
    } catch (const IoError& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

inline std::uint64_t seed_value(const std::string& key, const std::string& value) {
    const std::string t = trim(value);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (t.empty() || t[0] == '-' || end != t.c_str() + t.size()) throw ConfigError(key + ": not a seed: '" + t + "'");
    return v;
}

// segments: kind,n_frames,step,turn_back,amplitude,period,tilt
inline std::string segment_text(const TrajectorySpec& s) {
    return to_string(s.kind) + "," + std::to_string(s.n_frames) + "," + format_double(s.step) + "," +
           std::to_string(s.turn_back) + "," + format_double(s.amplitude) + "," + std::to_string(s.period) + "," +
           format_double(s.tilt);
}

inline TrajectorySpec segment_value(const std::string& key, const std::string& value) {
    const auto f = split(value, ',');
    if (f.size() != 7) throw ConfigError(key + ": expected kind,n_frames,step,turn_back,amplitude,period,tilt");
    TrajectorySpec s;
    try {
        s.kind = parse_trajectory_kind(f[0]);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(key + ": " + e.what());
    }
    s.n_frames = int_value(key, f[1]);
    s.step = double_value(key, f[2]);
    s.turn_back = int_value(key, f[3]);
    s.amplitude = double_value(key, f[4]);
    s.period = int_value(key, f[5]);
    s.tilt = double_value(key, f[6]);
    return s;
}

/// Parses "<prefix><index>" keys such as segment0, ellipsoid12.
inline bool indexed_key(const std::string& key, const std::string& prefix, std::size_t& index) {
    if (key.rfind(prefix, 0) != 0 || key.size() == prefix.size()) return false;
    const std::string digits = key.substr(prefix.size());
    for (char c : digits)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    index = static_cast<std::size_t>(std::stoul(digits));
    return true;
}

template <class T>
void put_indexed(std::vector<T>& list, std::size_t index, T value, std::vector<bool>& seen, const std::string& key) {
    if (index >= list.size()) {
        list.resize(index + 1);
        seen.resize(index + 1, false);
    }
    if (seen[index]) throw ConfigError(key + ": given twice");
    seen[index] = true;
    list[index] = value;
}

}  // namespace detail

/// Keys not present keep their default_config() values. Indexed entries must be numbered
/// contiguously from 0; any phantom.ellipsoidK / phantom.tubeK replaces the default structures,
/// any trajectory.segmentK replaces the default segments. refine.recon always mirrors recon.
inline ExperimentConfig parse_config(std::istream& is) {
    ExperimentConfig c = default_config();
    std::vector<Ellipsoid> ellipsoids;
    std::vector<Tube> tubes;
    std::vector<TrajectorySpec> segments;
    std::vector<bool> seen_e, seen_t, seen_s;
    std::map<std::string, int> seen_keys;

    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (seen_keys[key]++) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + key);
        const auto dot = key.find('.');
        if (dot == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": key needs a section: " + key);
        const std::string section = key.substr(0, dot);
        const std::string name = key.substr(dot + 1);
        std::size_t index = 0;

        auto unknown = [&] { throw ConfigError("line " + std::to_string(lineno) + ": unknown key " + key); };
        try {
            if (section == "experiment") {
                if (name == "seed") c.seed = detail::seed_value(key, val);
                else if (name == "out") c.out_dir = val;
                else unknown();
            } else if (section == "phantom") {
                if (name == "dims") {
                    const auto f = detail::split(val, ',');
                    if (f.size() != 3) throw ConfigError(key + ": expected 3 values");
                    for (int a = 0; a < 3; ++a) c.phantom.grid.dims[a] = detail::int_value(key, f[a]);
                } else if (name == "spacing") c.phantom.grid.spacing = detail::vec3_value(key, val);
                else if (name == "origin") c.phantom.grid.origin = detail::vec3_value(key, val);
                else if (name == "background") c.phantom.background = detail::double_value(key, val);
                else if (name == "sigma") c.phantom.sigma = detail::double_value(key, val);
                else if (name == "jitter") c.phantom.jitter = detail::double_value(key, val);
                else if (name == "texture") c.phantom.texture = detail::double_value(key, val);
                else if (detail::indexed_key(name, "ellipsoid", index)) {
                    const auto d = detail::doubles(key, val, 7);
                    detail::put_indexed(ellipsoids, index, Ellipsoid{{d[0], d[1], d[2]}, {d[3], d[4], d[5]}, d[6]},
                                        seen_e, key);
                } else if (detail::indexed_key(name, "tube", index)) {
                    const auto d = detail::doubles(key, val, 8);
                    detail::put_indexed(tubes, index, Tube{{d[0], d[1], d[2]}, {d[3], d[4], d[5]}, d[6], d[7]}, seen_t,
                                        key);
                } else unknown();
            } else if (section == "trajectory") {
                if (name == "kind") c.trajectory.kind = parse_trajectory_kind(val);
                else if (name == "n_frames") c.trajectory.n_frames = detail::int_value(key, val);
                else if (name == "step") c.trajectory.step = detail::double_value(key, val);
                else if (name == "turn_back") c.trajectory.turn_back = detail::int_value(key, val);
                else if (name == "amplitude") c.trajectory.amplitude = detail::double_value(key, val);
                else if (name == "period") c.trajectory.period = detail::int_value(key, val);
                else if (name == "tilt") c.trajectory.tilt = detail::double_value(key, val);
                else if (detail::indexed_key(name, "segment", index))
                    detail::put_indexed(segments, index, detail::segment_value(key, val), seen_s, key);
                else unknown();
            } else if (section == "frame") {
                if (name == "height") c.frame.height = detail::int_value(key, val);
                else if (name == "width") c.frame.width = detail::int_value(key, val);
                else if (name == "spacing") c.frame.spacing = detail::double_value(key, val);
                else unknown();
            } else if (section == "scan") {
                if (name == "start") c.start = Pose::from_array(detail::six_values(key, val));
                else unknown();
            } else if (section == "noise") {
                if (name == "bias") c.noise.bias = detail::six_values(key, val);
                else if (name == "sigma") c.noise.sigma = detail::six_values(key, val);
                else unknown();
            } else if (section == "recon") {
                if (name == "epsilon") c.recon.epsilon = detail::double_value(key, val);
                else if (name == "mode") c.recon.mode = parse_weight_mode(val);
                else if (name == "k_nearest") c.recon.k_nearest = detail::int_value(key, val);
                else if (name == "dims") {
                    const auto f = detail::split(val, ',');
                    if (f.size() != 3) throw ConfigError(key + ": expected 3 values");
                    for (int a = 0; a < 3; ++a) c.recon.grid.dims[a] = detail::int_value(key, f[a]);
                } else if (name == "spacing") c.recon.grid.spacing = detail::vec3_value(key, val);
                else if (name == "origin") c.recon.grid.origin = detail::vec3_value(key, val);
                else unknown();
            } else if (section == "refine") {
                if (name == "proportion") c.refine.proportion = detail::double_value(key, val);
                else if (name == "iterations") c.refine.iterations = detail::int_value(key, val);
                else if (name == "lr_translation") c.refine.lr_translation = detail::double_value(key, val);
                else if (name == "lr_rotation") c.refine.lr_rotation = detail::double_value(key, val);
                else if (name == "lr_disc") c.refine.lr_disc = detail::double_value(key, val);
                else if (name == "adv_weight") c.refine.adv_weight = detail::double_value(key, val);
                else if (name == "ssl_weight") c.refine.ssl_weight = detail::double_value(key, val);
                else if (name == "backtracking") c.refine.backtracking = detail::int_value(key, val);
                else if (name == "optimizer") c.refine.optimizer = parse_pose_optimizer(val);
                else unknown();
            } else if (section == "prior") {
                if (name == "pool") c.prior.features.pool = detail::int_value(key, val);
                else if (name == "bins") c.prior.features.bins = detail::int_value(key, val);
                else if (name == "train_phantoms") c.prior.train_phantoms = detail::int_value(key, val);
                else if (name == "fakes_per_phantom") c.prior.fakes_per_phantom = detail::int_value(key, val);
                else if (name == "seed") c.prior.seed = detail::seed_value(key, val);
                else unknown();
            } else if (section == "bench") {
                if (name == "seeds") c.bench_seeds = detail::int_value(key, val);
                else unknown();
            } else {
                unknown();
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + key + ": " + e.what());
        }
    }

    auto check_contiguous = [](const std::vector<bool>& seen, const char* what) {
        for (std::size_t i = 0; i < seen.size(); ++i)
            if (!seen[i]) throw ConfigError(std::string(what) + std::to_string(i) + " is missing");
    };
    check_contiguous(seen_e, "phantom.ellipsoid");
    check_contiguous(seen_t, "phantom.tube");
    check_contiguous(seen_s, "trajectory.segment");
    if (!seen_e.empty() || !seen_t.empty()) {
        c.phantom.ellipsoids = ellipsoids;
        c.phantom.tubes = tubes;
    }
    if (!seen_s.empty()) c.trajectory.segments = segments;
    else if (c.trajectory.kind != TrajectoryKind::hybrid) c.trajectory.segments.clear();
    c.refine.recon = c.recon;
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config " + path.string());
    return parse_config(f);
}

/// Writes every key, so the output parses back to the same configuration.
inline std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "experiment.seed = " << c.seed << '\n';
    o << "experiment.out = " << c.out_dir << '\n';

    const Grid& pg = c.phantom.grid;
    o << "phantom.dims = " << pg.dims[0] << ',' << pg.dims[1] << ',' << pg.dims[2] << '\n';
    o << "phantom.spacing = " << detail::vec3_list(pg.spacing) << '\n';
    o << "phantom.origin = " << detail::vec3_list(pg.origin) << '\n';
    o << "phantom.background = " << format_double(c.phantom.background) << '\n';
    o << "phantom.sigma = " << format_double(c.phantom.sigma) << '\n';
    o << "phantom.jitter = " << format_double(c.phantom.jitter) << '\n';
    o << "phantom.texture = " << format_double(c.phantom.texture) << '\n';
    for (std::size_t i = 0; i < c.phantom.ellipsoids.size(); ++i) {
        const Ellipsoid& e = c.phantom.ellipsoids[i];
        o << "phantom.ellipsoid" << i << " = " << detail::vec3_list(e.center) << ',' << detail::vec3_list(e.radii) << ','
          << format_double(e.gray) << '\n';
    }
    for (std::size_t i = 0; i < c.phantom.tubes.size(); ++i) {
        const Tube& t = c.phantom.tubes[i];
        o << "phantom.tube" << i << " = " << detail::vec3_list(t.a) << ',' << detail::vec3_list(t.b) << ','
          << format_double(t.radius) << ',' << format_double(t.gray) << '\n';
    }

    const TrajectorySpec& t = c.trajectory;
    o << "trajectory.kind = " << to_string(t.kind) << '\n';
    o << "trajectory.n_frames = " << t.n_frames << '\n';
    o << "trajectory.step = " << format_double(t.step) << '\n';
    o << "trajectory.turn_back = " << t.turn_back << '\n';
    o << "trajectory.amplitude = " << format_double(t.amplitude) << '\n';
    o << "trajectory.period = " << t.period << '\n';
    o << "trajectory.tilt = " << format_double(t.tilt) << '\n';
    for (std::size_t i = 0; i < t.segments.size(); ++i)
        o << "trajectory.segment" << i << " = " << detail::segment_text(t.segments[i]) << '\n';

    o << "frame.height = " << c.frame.height << '\n';
    o << "frame.width = " << c.frame.width << '\n';
    o << "frame.spacing = " << format_double(c.frame.spacing) << '\n';
    o << "scan.start = " << detail::join_doubles(c.start.as_array()) << '\n';
    o << "noise.bias = " << detail::join_doubles(c.noise.bias) << '\n';
    o << "noise.sigma = " << detail::join_doubles(c.noise.sigma) << '\n';

    const Grid& rg = c.recon.grid;
    o << "recon.epsilon = " << format_double(c.recon.epsilon) << '\n';
    o << "recon.mode = " << to_string(c.recon.mode) << '\n';
    o << "recon.k_nearest = " << c.recon.k_nearest << '\n';
    o << "recon.dims = " << rg.dims[0] << ',' << rg.dims[1] << ',' << rg.dims[2] << '\n';
    o << "recon.spacing = " << detail::vec3_list(rg.spacing) << '\n';
    o << "recon.origin = " << detail::vec3_list(rg.origin) << '\n';

    const RefineConfig& r = c.refine;
    o << "refine.proportion = " << format_double(r.proportion) << '\n';
    o << "refine.iterations = " << r.iterations << '\n';
    o << "refine.lr_translation = " << format_double(r.lr_translation) << '\n';
    o << "refine.lr_rotation = " << format_double(r.lr_rotation) << '\n';
    o << "refine.lr_disc = " << format_double(r.lr_disc) << '\n';
    o << "refine.adv_weight = " << format_double(r.adv_weight) << '\n';
    o << "refine.ssl_weight = " << format_double(r.ssl_weight) << '\n';
    o << "refine.backtracking = " << r.backtracking << '\n';
    o << "refine.optimizer = " << to_string(r.optimizer) << '\n';

    o << "prior.pool = " << c.prior.features.pool << '\n';
    o << "prior.bins = " << c.prior.features.bins << '\n';
    o << "prior.train_phantoms = " << c.prior.train_phantoms << '\n';
    o << "prior.fakes_per_phantom = " << c.prior.fakes_per_phantom << '\n';
    o << "prior.seed = " << c.prior.seed << '\n';
    o << "bench.seeds = " << c.bench_seeds << '\n';
    return o.str();
}

}  // namespace fhr
