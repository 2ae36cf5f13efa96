// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fhr/imaging.hpp"

namespace fhr {

enum class WeightMode {
    softmax,           // softmax of reciprocal distances
    nearest_emphasis,  // softmax re-weighted by the reciprocal distance and renormalised
};

inline std::string to_string(WeightMode m) { return m == WeightMode::softmax ? "softmax" : "nearest"; }

inline WeightMode parse_weight_mode(const std::string& s) {
    if (s == "softmax") return WeightMode::softmax;
    if (s == "nearest" || s == "nearest-emphasis") return WeightMode::nearest_emphasis;
    throw std::invalid_argument("unknown weighting mode: " + s);
}

struct ReconParams {
    double epsilon = 1e-6;  // mm
    WeightMode mode = WeightMode::softmax;
    int k_nearest = 0;  // 0 keeps every slice
    Grid grid;

    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("recon: epsilon must be > 0");
        if (k_nearest < 0) throw std::invalid_argument("recon: k must be >= 1 when k-nearest support is used");
        grid.validate();
    }
};

/// Orthogonal projection of a point onto a slice plane.
struct Projection {
    double distance = 0.0;  // |signed_distance|, mm
    double signed_distance = 0.0;
    double row = 0.0;  // continuous pixel coordinates
    double col = 0.0;
    bool in_bounds = false;
};

inline Projection project_to_slice(const Vec3& pt, const RigidTransform& T, const FrameGeometry& g) {
    const Vec3 rel = pt - T.t;
    // Local coordinates are R^T (pt - t): the columns of R are the frame axes.
    const double lx = T.R(0, 0) * rel.x + T.R(1, 0) * rel.y + T.R(2, 0) * rel.z;
    const double ly = T.R(0, 1) * rel.x + T.R(1, 1) * rel.y + T.R(2, 1) * rel.z;
    const double lz = T.R(0, 2) * rel.x + T.R(1, 2) * rel.y + T.R(2, 2) * rel.z;
    Projection p;
    p.signed_distance = lz;
    p.distance = std::abs(lz);
    p.col = lx / g.spacing + 0.5 * (g.width - 1);
    p.row = ly / g.spacing + 0.5 * (g.height - 1);
    p.in_bounds = p.col >= 0.0 && p.col <= g.width - 1 && p.row >= 0.0 && p.row <= g.height - 1;
    return p;
}

inline Projection project_to_slice(const Vec3& pt, const Pose& p, const FrameGeometry& g) {
    return project_to_slice(pt, pose_to_transform(p), g);
}

namespace detail {

inline void check_distances(std::span<const double> d, double eps) {
    if (d.empty()) throw std::invalid_argument("weights: distance list is empty");
    if (!(eps > 0.0)) throw std::invalid_argument("weights: epsilon must be > 0");
    for (double x : d)
        if (!(x >= 0.0)) throw std::invalid_argument("weights: distances must be >= 0");
}

/// Softmax of r_j = 1/(d_j + eps) with max subtraction; also returns the reciprocals.
inline void softmax_reciprocal(std::span<const double> d, double eps, std::vector<double>& recip,
                               std::vector<double>& soft) {
    recip.resize(d.size());
    soft.resize(d.size());
    double rmax = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        recip[j] = 1.0 / (d[j] + eps);
        rmax = std::max(rmax, recip[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        soft[j] = std::exp(recip[j] - rmax);
        total += soft[j];
    }
    for (double& s : soft) s /= total;
}

/// Nearest-emphasis weights from the softmax: u_j = r_j s_j, w = u / sum(u). Returns sum(u).
inline double emphasise_nearest(const std::vector<double>& recip, std::vector<double>& w) {
    double z = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
        w[j] *= recip[j];
        z += w[j];
    }
    for (double& x : w) x /= z;
    return z;
}

}  // namespace detail

inline std::vector<double> weights_softmax(std::span<const double> d, double eps) {
    detail::check_distances(d, eps);
    std::vector<double> recip, w;
    detail::softmax_reciprocal(d, eps, recip, w);
    return w;
}

inline std::vector<double> weights_nearest(std::span<const double> d, double eps) {
    detail::check_distances(d, eps);
    std::vector<double> recip, w;
    detail::softmax_reciprocal(d, eps, recip, w);
    detail::emphasise_nearest(recip, w);
    return w;
}

namespace detail {

/// Per-voxel scratch shared by the forward and backward passes.
struct VoxelSlices {
    std::vector<std::size_t> slice;  // surviving slice indices, ascending
    std::vector<Projection> proj;
    std::vector<double> gray, d_row, d_col;
    std::vector<double> dist, recip, soft, weight;
    double scale = 1.0;  // sum(u) for nearest emphasis

    void clear() {
        slice.clear();
        proj.clear();
        gray.clear();
        d_row.clear();
        d_col.clear();
        dist.clear();
    }
};

/// Gathers in-bounds projections of a voxel centre and evaluates the weighted gray.
/// Returns false when no slice contributes.
inline bool reconstruct_voxel(const Vec3& x, std::span<const Frame> frames, std::span<const RigidTransform> poses,
                              const ReconParams& params, VoxelSlices& s, double& out) {
    s.clear();
    for (std::size_t j = 0; j < frames.size(); ++j) {
        const Projection p = project_to_slice(x, poses[j], frames[j].geometry);
        if (!p.in_bounds) continue;
        double dr = 0.0, dc = 0.0;
        const Sample g = bilinear_sample(frames[j], p.row, p.col, &dr, &dc);
        if (!g.valid) continue;
        s.slice.push_back(j);
        s.proj.push_back(p);
        s.gray.push_back(g.gray);
        s.d_row.push_back(dr);
        s.d_col.push_back(dc);
        s.dist.push_back(p.distance);
    }
    if (s.slice.empty()) return false;

    if (params.k_nearest > 0 && s.slice.size() > static_cast<std::size_t>(params.k_nearest)) {
        std::vector<std::size_t> order(s.slice.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.dist[a] < s.dist[b]; });
        order.resize(static_cast<std::size_t>(params.k_nearest));
        std::sort(order.begin(), order.end());
        VoxelSlices kept;
        for (std::size_t o : order) {
            kept.slice.push_back(s.slice[o]);
            kept.proj.push_back(s.proj[o]);
            kept.gray.push_back(s.gray[o]);
            kept.d_row.push_back(s.d_row[o]);
            kept.d_col.push_back(s.d_col[o]);
            kept.dist.push_back(s.dist[o]);
        }
        s.slice.swap(kept.slice);
        s.proj.swap(kept.proj);
        s.gray.swap(kept.gray);
        s.d_row.swap(kept.d_row);
        s.d_col.swap(kept.d_col);
        s.dist.swap(kept.dist);
    }

    softmax_reciprocal(s.dist, params.epsilon, s.recip, s.soft);
    s.weight = s.soft;
    if (params.mode == WeightMode::nearest_emphasis) s.scale = emphasise_nearest(s.recip, s.weight);

    double acc = 0.0;
    for (std::size_t j = 0; j < s.slice.size(); ++j) acc += s.weight[j] * s.gray[j];
    out = acc;
    return true;
}

}  // namespace detail

/// Soft-interpolated volume: every voxel is the distance-weighted sum of the bilinear
/// projections onto all slices it projects inside. Voxels without a contributing slice are masked.
inline Volume reconstruct(std::span<const Frame> frames, std::span<const RigidTransform> poses,
                          const ReconParams& params) {
    if (frames.empty() || frames.size() != poses.size())
        throw std::invalid_argument("reconstruct: frames and poses must be non-empty and of equal length");
    params.validate();
    Volume v(params.grid, 0.0);
    detail::VoxelSlices scratch;
    for (std::size_t idx = 0; idx < v.values.size(); ++idx) {
        double gray = 0.0;
        if (detail::reconstruct_voxel(params.grid.voxel_center(idx), frames, poses, params, scratch, gray)) {
            v.values[idx] = gray;
        } else {
            v.values[idx] = 0.0;
            v.mask[idx] = 0;
        }
    }
    return v;
}

inline Volume reconstruct(std::span<const Frame> frames, std::span<const Pose> poses, const ReconParams& params) {
    std::vector<RigidTransform> T;
    T.reserve(poses.size());
    for (const Pose& p : poses) T.push_back(pose_to_transform(p));
    return reconstruct(frames, std::span<const RigidTransform>(T), params);
}

}  // namespace fhr
