// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fhr/imaging.hpp"

namespace fhr {

enum class TrajectoryKind { linear, loop, fast_slow, sector, hybrid };

inline std::string to_string(TrajectoryKind k) {
    switch (k) {
        case TrajectoryKind::linear: return "linear";
        case TrajectoryKind::loop: return "loop";
        case TrajectoryKind::fast_slow: return "fast-slow";
        case TrajectoryKind::sector: return "sector";
        case TrajectoryKind::hybrid: return "hybrid";
    }
    return "?";
}

inline TrajectoryKind parse_trajectory_kind(const std::string& s) {
    if (s == "linear") return TrajectoryKind::linear;
    if (s == "loop") return TrajectoryKind::loop;
    if (s == "fast-slow" || s == "fast_slow") return TrajectoryKind::fast_slow;
    if (s == "sector") return TrajectoryKind::sector;
    if (s == "hybrid") return TrajectoryKind::hybrid;
    throw std::invalid_argument("unknown trajectory kind: " + s);
}

struct TrajectorySpec {
    TrajectoryKind kind = TrajectoryKind::linear;
    int n_frames = 16;
    double step = 0.5;    // mm per frame
    int turn_back = 0;    // loop: number of forward entries before reversing
    double amplitude = 0.0;  // fast-slow: speed modulation in [0,1)
    int period = 4;          // fast-slow: frames per speed cycle
    double tilt = 0.0;       // sector: rotation increment about the frame x axis, rad
    std::vector<TrajectorySpec> segments;  // hybrid

    /// Number of frames a hybrid produces: segments share no frames, so entries add up.
    int frame_count() const {
        if (kind != TrajectoryKind::hybrid) return n_frames;
        int entries = 0;
        for (const TrajectorySpec& s : segments) entries += s.frame_count() - 1;
        return entries + 1;
    }

    void validate() const {
        if (kind == TrajectoryKind::hybrid) {
            if (segments.empty()) throw std::invalid_argument("trajectory: hybrid needs segments");
            for (const TrajectorySpec& s : segments) {
                if (s.kind == TrajectoryKind::hybrid) throw std::invalid_argument("trajectory: nested hybrid");
                s.validate();
            }
            return;
        }
        if (n_frames < 2) throw std::invalid_argument("trajectory: n_frames must be >= 2");
        if (!(step > 0.0)) throw std::invalid_argument("trajectory: step must be > 0");
        if (kind == TrajectoryKind::fast_slow) {
            if (!(amplitude >= 0.0 && amplitude < 1.0)) throw std::invalid_argument("trajectory: amplitude must be in [0,1)");
            if (period < 1) throw std::invalid_argument("trajectory: period must be >= 1");
        }
        if (kind == TrajectoryKind::loop && (turn_back < 0 || turn_back > n_frames - 1))
            throw std::invalid_argument("trajectory: turn-back index out of range");
    }
};

inline RelativeParams generate_trajectory(const TrajectorySpec& spec) {
    spec.validate();
    RelativeParams rel;
    if (spec.kind == TrajectoryKind::hybrid) {
        for (const TrajectorySpec& s : spec.segments) {
            const RelativeParams part = generate_trajectory(s);
            rel.insert(rel.end(), part.begin(), part.end());
        }
        return rel;
    }
    for (int i = 1; i < spec.n_frames; ++i) {
        Pose p;
        switch (spec.kind) {
            case TrajectoryKind::linear: p.tz = spec.step; break;
            case TrajectoryKind::loop: p.tz = i <= spec.turn_back ? spec.step : -spec.step; break;
            case TrajectoryKind::fast_slow:
                p.tz = spec.step * (1.0 + spec.amplitude * std::sin(2.0 * std::numbers::pi * i / spec.period));
                break;
            case TrajectoryKind::sector:
                p.tz = spec.step;
                p.rx = spec.tilt;
                break;
            case TrajectoryKind::hybrid: break;
        }
        rel.push_back(p);
    }
    return rel;
}

/// Reslices the volume along the chained trajectory, placed in the volume by `start`.
/// Frames with fewer than half of their pixels inside the volume are reported on stderr.
inline Sequence simulate_scan(const Volume& v, const RelativeParams& rel, const FrameGeometry& g, const Pose& start) {
    g.validate();
    Sequence seq;
    seq.geometry = g;
    seq.ground_truth = rel;
    const RigidTransform placement = pose_to_transform(start);
    for (const RigidTransform& T : chain_transforms(rel)) {
        SliceSample s = extract_slice_masked(v, placement * T, g);
        const double cov = static_cast<double>(s.valid_count()) / static_cast<double>(g.pixel_count());
        if (cov < 0.5)
            std::clog << "simulate_scan: frame " << seq.frames.size() << " has only " << cov * 100.0
                      << "% of its pixels inside the volume\n";
        seq.coverage.push_back(cov);
        seq.frames.push_back(std::move(s.frame));
    }
    return seq;
}

struct NoiseModel {
    std::array<double, 6> bias{};
    std::array<double, 6> sigma{};
    std::uint64_t seed = 0;

    void validate() const {
        for (double s : sigma)
            if (!(s >= 0.0)) throw std::invalid_argument("noise: sigma must be >= 0");
    }
};

/// Stand-in for a learned motion estimator: ground truth plus per-component bias and seeded Gaussian noise.
inline RelativeParams perturb_estimates(const RelativeParams& gt, const NoiseModel& nm) {
    nm.validate();
    std::mt19937_64 rng(nm.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    RelativeParams out;
    out.reserve(gt.size());
    for (const Pose& p : gt) {
        auto a = p.as_array();
        for (std::size_t k = 0; k < 6; ++k) {
            const double z = gauss(rng);
            a[k] += nm.bias[k] + nm.sigma[k] * z;
        }
        out.push_back(Pose::from_array(a));
    }
    return out;
}

}  // namespace fhr
