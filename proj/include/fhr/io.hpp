// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fhr/imaging.hpp"
#include "fhr/losses.hpp"
#include "fhr/metrics.hpp"

namespace fhr {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline double parse_double(const std::string& s) {
    const std::string t = trim(s);
    if (t.empty()) throw IoError("expected a number, got an empty field");
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) throw IoError("not a number: '" + t + "'");
    return v;
}

inline long long parse_int(const std::string& s) {
    const std::string t = trim(s);
    if (t.empty()) throw IoError("expected an integer, got an empty field");
    char* end = nullptr;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size()) throw IoError("not an integer: '" + t + "'");
    return v;
}

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
    std::ofstream f(p, binary ? std::ios::binary : std::ios::out);
    if (!f) throw IoError("cannot write " + p.string());
    return f;
}

inline std::ifstream open_in(const std::filesystem::path& p, bool binary = false) {
    std::ifstream f(p, binary ? std::ios::binary : std::ios::in);
    if (!f) throw IoError("cannot read " + p.string());
    return f;
}

inline void put_f32le(std::ostream& os, double v) {
    const float f = static_cast<float>(v);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    const char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                       static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
    os.write(b, 4);
}

inline double get_f32le(const unsigned char* b) {
    const std::uint32_t u = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                            (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    return static_cast<double>(f);
}

inline std::string vec_text(const Vec3& v) {
    return format_double(v.x) + " " + format_double(v.y) + " " + format_double(v.z);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Volumes: text header, blank line, f32le grays (x fastest), then one mask byte per voxel.

inline void write_volume(const std::filesystem::path& path, const Volume& v) {
    v.validate();
    std::ofstream f = detail::open_out(path, true);
    const Grid& g = v.grid;
    f << "dims: " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << '\n';
    f << "spacing: " << detail::vec_text(g.spacing) << '\n';
    f << "origin: " << detail::vec_text(g.origin) << '\n';
    f << "dtype: f32le\n\n";
    for (double x : v.values) detail::put_f32le(f, x);
    for (std::uint8_t m : v.mask) f.put(static_cast<char>(m ? 1 : 0));
    if (!f) throw IoError("write failed: " + path.string());
}

inline Volume read_volume(const std::filesystem::path& path) {
    std::ifstream f = detail::open_in(path, true);
    Grid g;
    bool have_dims = false, have_spacing = false, have_origin = false, have_dtype = false;
    std::string line;
    while (std::getline(f, line)) {
        line = detail::trim(line);
        if (line.empty()) break;
        const auto colon = line.find(':');
        if (colon == std::string::npos) throw IoError("volume header: malformed line '" + line + "'");
        const std::string key = detail::trim(line.substr(0, colon));
        std::istringstream rest(line.substr(colon + 1));
        std::vector<std::string> tok;
        for (std::string t; rest >> t;) tok.push_back(t);
        if (key == "dtype") {
            if (tok.size() != 1 || tok[0] != "f32le") throw IoError("volume header: unsupported dtype");
            have_dtype = true;
            continue;
        }
        if (tok.size() != 3) throw IoError("volume header: '" + key + "' needs three values");
        if (key == "dims") {
            for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(detail::parse_int(tok[a]));
            have_dims = true;
        } else if (key == "spacing") {
            g.spacing = {detail::parse_double(tok[0]), detail::parse_double(tok[1]), detail::parse_double(tok[2])};
            have_spacing = true;
        } else if (key == "origin") {
            g.origin = {detail::parse_double(tok[0]), detail::parse_double(tok[1]), detail::parse_double(tok[2])};
            have_origin = true;
        } else {
            throw IoError("volume header: unknown key '" + key + "'");
        }
    }
    if (!(have_dims && have_spacing && have_origin && have_dtype)) throw IoError("volume header incomplete: " + path.string());
    try {
        g.validate();
    } catch (const std::invalid_argument& e) {
        throw IoError(std::string("volume header: ") + e.what());
    }

    Volume v(g);
    const std::size_t n = g.size();
    std::vector<unsigned char> raw(n * 5);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(f.gcount()) != raw.size()) throw IoError("volume payload truncated: " + path.string());
    if (f.peek() != std::char_traits<char>::eof()) throw IoError("volume payload has trailing bytes: " + path.string());
    for (std::size_t i = 0; i < n; ++i) v.values[i] = detail::get_f32le(raw.data() + 4 * i);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned char m = raw[4 * n + i];
        if (m > 1) throw IoError("volume mask byte must be 0 or 1");
        v.mask[i] = m;
    }
    return v;
}

// ---------------------------------------------------------------------------
// Frames as 8-bit binary PGM.

inline void write_pgm(const std::filesystem::path& path, const Frame& fr) {
    std::ofstream f = detail::open_out(path, true);
    const FrameGeometry& g = fr.geometry;
    f << "P5\n" << g.width << ' ' << g.height << "\n255\n";
    for (double x : fr.values) {
        const long q = std::lround(std::clamp(x, 0.0, 1.0) * 255.0);
        f.put(static_cast<char>(static_cast<unsigned char>(q)));
    }
    if (!f) throw IoError("write failed: " + path.string());
}

/// Pixel spacing is not stored in a PGM; it comes from the caller.
inline Frame read_pgm(const std::filesystem::path& path, double spacing) {
    std::ifstream f = detail::open_in(path, true);
    auto token = [&]() {
        std::string t;
        char c;
        while (f.get(c)) {
            if (c == '#') {
                std::string skip;
                std::getline(f, skip);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!t.empty()) break;
                continue;
            }
            t += c;
        }
        return t;
    };
    if (token() != "P5") throw IoError("not a binary PGM: " + path.string());
    const long long w = detail::parse_int(token());
    const long long h = detail::parse_int(token());
    const long long maxval = detail::parse_int(token());
    if (maxval != 255) throw IoError("PGM maxval must be 255: " + path.string());
    FrameGeometry g{static_cast<int>(h), static_cast<int>(w), spacing};
    Frame fr(g);
    std::vector<unsigned char> raw(g.pixel_count());
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(f.gcount()) != raw.size()) throw IoError("PGM payload truncated: " + path.string());
    for (std::size_t i = 0; i < raw.size(); ++i) fr.values[i] = raw[i] / 255.0;
    return fr;
}

// ---------------------------------------------------------------------------
// Pose lists: header "tx,ty,tz,rx,ry,rz", one row per pose.

inline void write_poses(std::ostream& os, std::span<const Pose> poses) {
    os << "tx,ty,tz,rx,ry,rz\n";
    for (const Pose& p : poses) {
        const auto a = p.as_array();
        for (std::size_t k = 0; k < a.size(); ++k) os << (k ? "," : "") << format_double(a[k]);
        os << '\n';
    }
}

inline void write_poses(const std::filesystem::path& path, std::span<const Pose> poses) {
    std::ofstream f = detail::open_out(path);
    write_poses(f, poses);
}

inline RelativeParams read_poses(std::istream& is) {
    RelativeParams out;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        line = detail::trim(line);
        if (line.empty()) continue;
        if (first && line.rfind("tx", 0) == 0) {
            first = false;
            continue;
        }
        first = false;
        const auto f = detail::split(line, ',');
        if (f.size() != 6) throw IoError("pose row needs 6 fields: '" + line + "'");
        std::array<double, 6> a{};
        for (std::size_t k = 0; k < 6; ++k) a[k] = detail::parse_double(f[k]);
        Pose p = Pose::from_array(a);
        if (!p.is_finite()) throw IoError("pose row is not finite: '" + line + "'");
        out.push_back(p);
    }
    return out;
}

inline RelativeParams read_poses(const std::filesystem::path& path) {
    std::ifstream f = detail::open_in(path);
    return read_poses(f);
}

// ---------------------------------------------------------------------------
// Sequences: frame_NNN.pgm, geometry.txt and an optional gt_relative.csv.

inline std::string frame_file_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "frame_%03zu.pgm", i);
    return buf;
}

inline void write_sequence(const std::filesystem::path& dir, const Sequence& seq) {
    seq.validate();
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) write_pgm(dir / frame_file_name(i), seq.frames[i]);
    std::ofstream g = detail::open_out(dir / "geometry.txt");
    g << "frames: " << seq.frames.size() << '\n';
    g << "height: " << seq.geometry.height << '\n';
    g << "width: " << seq.geometry.width << '\n';
    g << "spacing: " << format_double(seq.geometry.spacing) << '\n';
    if (seq.ground_truth) write_poses(dir / "gt_relative.csv", *seq.ground_truth);
}

inline Sequence read_sequence(const std::filesystem::path& dir) {
    std::ifstream g = detail::open_in(dir / "geometry.txt");
    Sequence seq;
    long long frames = -1;
    std::string line;
    while (std::getline(g, line)) {
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) throw IoError("geometry.txt: malformed line '" + line + "'");
        const std::string key = detail::trim(line.substr(0, colon));
        const std::string val = line.substr(colon + 1);
        if (key == "frames") frames = detail::parse_int(val);
        else if (key == "height") seq.geometry.height = static_cast<int>(detail::parse_int(val));
        else if (key == "width") seq.geometry.width = static_cast<int>(detail::parse_int(val));
        else if (key == "spacing") seq.geometry.spacing = detail::parse_double(val);
        else throw IoError("geometry.txt: unknown key '" + key + "'");
    }
    if (frames < 0) {
        frames = 0;
        while (std::filesystem::exists(dir / frame_file_name(static_cast<std::size_t>(frames)))) ++frames;
    }
    for (long long i = 0; i < frames; ++i) {
        Frame f = read_pgm(dir / frame_file_name(static_cast<std::size_t>(i)), seq.geometry.spacing);
        if (!(f.geometry == seq.geometry)) throw IoError("frame size disagrees with geometry.txt");
        seq.frames.push_back(std::move(f));
    }
    if (std::filesystem::exists(dir / "gt_relative.csv")) seq.ground_truth = read_poses(dir / "gt_relative.csv");
    try {
        seq.validate();
    } catch (const std::invalid_argument& e) {
        throw IoError(std::string("sequence ") + dir.string() + ": " + e.what());
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Discriminator: "pool=P,bins=B" header, one weight per line, "bias=b" last.

inline void write_discriminator(const std::filesystem::path& path, const DiscriminatorParams& c) {
    std::ofstream f = detail::open_out(path);
    f << "pool=" << c.spec.pool << ",bins=" << c.spec.bins << '\n';
    for (double w : c.weights) f << format_double(w) << '\n';
    f << "bias=" << format_double(c.bias) << '\n';
}

inline DiscriminatorParams read_discriminator(const std::filesystem::path& path) {
    std::ifstream f = detail::open_in(path);
    std::string line;
    if (!std::getline(f, line)) throw IoError("discriminator file is empty");
    FeatureSpec spec{0, 0};
    for (const std::string& kv : detail::split(detail::trim(line), ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw IoError("discriminator header: malformed '" + kv + "'");
        const std::string k = kv.substr(0, eq);
        if (k == "pool") spec.pool = static_cast<int>(detail::parse_int(kv.substr(eq + 1)));
        else if (k == "bins") spec.bins = static_cast<int>(detail::parse_int(kv.substr(eq + 1)));
        else throw IoError("discriminator header: unknown key '" + k + "'");
    }
    if (spec.pool < 1 || spec.bins < 2) throw IoError("discriminator header: bad feature spec");
    DiscriminatorParams c(spec);
    std::size_t k = 0;
    bool have_bias = false;
    while (std::getline(f, line)) {
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.rfind("bias=", 0) == 0) {
            c.bias = detail::parse_double(line.substr(5));
            have_bias = true;
            continue;
        }
        if (have_bias || k >= c.weights.size()) throw IoError("discriminator: too many rows");
        c.weights[k++] = detail::parse_double(line);
    }
    if (k != c.weights.size() || !have_bias) throw IoError("discriminator: expected " +
                                                           std::to_string(c.weights.size()) + " weights and a bias");
    return c;
}

// ---------------------------------------------------------------------------
// Metrics and refinement history.

inline const char* metrics_header() { return "fdr,adr,md,sd,hd,final_drift"; }

inline std::string metrics_row(const MetricsReport& m) {
    return format_double(m.fdr) + "," + format_double(m.adr) + "," + format_double(m.md) + "," + format_double(m.sd) +
           "," + format_double(m.hd) + "," + format_double(m.final_drift);
}

inline void write_metrics(const std::filesystem::path& path, const MetricsReport& m) {
    std::ofstream f = detail::open_out(path);
    f << metrics_header() << '\n' << metrics_row(m) << '\n';
}

inline MetricsReport read_metrics(const std::filesystem::path& path) {
    std::ifstream f = detail::open_in(path);
    std::string header, row;
    std::getline(f, header);
    if (detail::trim(header) != metrics_header()) throw IoError("metrics file: unexpected header");
    if (!std::getline(f, row)) throw IoError("metrics file: missing row");
    const auto v = detail::split(detail::trim(row), ',');
    if (v.size() != 6) throw IoError("metrics file: row needs 6 fields");
    MetricsReport m;
    m.fdr = detail::parse_double(v[0]);
    m.adr = detail::parse_double(v[1]);
    m.md = detail::parse_double(v[2]);
    m.sd = detail::parse_double(v[3]);
    m.hd = detail::parse_double(v[4]);
    m.final_drift = detail::parse_double(v[5]);
    return m;
}

/// Metric columns stay empty when the sequence had no ground truth.
inline void write_history(std::ostream& os, const std::vector<RefineLossReport>& losses,
                          const std::vector<MetricsReport>& metrics) {
    os << "iteration,L_d,L_g,ssl,adv,fdr,adr,md,sd,hd\n";
    for (std::size_t i = 0; i < losses.size(); ++i) {
        const RefineLossReport& l = losses[i];
        os << i + 1 << ',' << format_double(l.L_d) << ',' << format_double(l.L_g) << ',' << format_double(l.ssl_term)
           << ',' << format_double(l.adv_term);
        if (i < metrics.size()) {
            const MetricsReport& m = metrics[i];
            os << ',' << format_double(m.fdr) << ',' << format_double(m.adr) << ',' << format_double(m.md) << ','
               << format_double(m.sd) << ',' << format_double(m.hd);
        } else {
            os << ",,,,,";
        }
        os << '\n';
    }
}

inline void write_history(const std::filesystem::path& path, const std::vector<RefineLossReport>& losses,
                          const std::vector<MetricsReport>& metrics) {
    std::ofstream f = detail::open_out(path);
    write_history(f, losses, metrics);
}

}  // namespace fhr
