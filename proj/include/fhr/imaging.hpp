// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fhr/geometry.hpp"

namespace fhr {

/// Regular voxel lattice. origin is the centre of voxel (0,0,0); x index varies fastest.
struct Grid {
    std::array<int, 3> dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{};

    std::size_t size() const {
        return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
               static_cast<std::size_t>(dims[2]);
    }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
    }
    std::array<int, 3> coords(std::size_t idx) const {
        const auto nx = static_cast<std::size_t>(dims[0]);
        const auto ny = static_cast<std::size_t>(dims[1]);
        return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny), static_cast<int>(idx / (nx * ny))};
    }
    Vec3 voxel_center(int i, int j, int k) const {
        return {origin.x + i * spacing.x, origin.y + j * spacing.y, origin.z + k * spacing.z};
    }
    Vec3 voxel_center(std::size_t idx) const {
        const auto c = coords(idx);
        return voxel_center(c[0], c[1], c[2]);
    }

    void validate() const {
        for (int d = 0; d < 3; ++d) {
            if (dims[static_cast<std::size_t>(d)] < 1) throw std::invalid_argument("grid: dims must be >= 1");
            if (!(spacing[static_cast<std::size_t>(d)] > 0.0)) throw std::invalid_argument("grid: spacing must be > 0");
        }
    }
    friend bool operator==(const Grid&, const Grid&) = default;
};

struct Volume {
    Grid grid;
    std::vector<double> values;
    std::vector<std::uint8_t> mask;

    Volume() = default;
    explicit Volume(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill), mask(g.size(), 1) {
        g.validate();
    }

    double& at(int i, int j, int k) { return values[grid.index(i, j, k)]; }
    double at(int i, int j, int k) const { return values[grid.index(i, j, k)]; }
    bool valid(std::size_t idx) const { return mask[idx] != 0; }

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto m : mask) n += m != 0;
        return n;
    }

    /// Throws if any stored invariant is broken (sizes, grays in [0,1], masked voxels at 0).
    void validate() const {
        grid.validate();
        if (values.size() != grid.size() || mask.size() != grid.size())
            throw std::invalid_argument("volume: payload size does not match dims");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!(values[i] >= 0.0 && values[i] <= 1.0)) throw std::invalid_argument("volume: gray outside [0,1]");
            if (mask[i] == 0 && values[i] != 0.0) throw std::invalid_argument("volume: masked voxel must hold 0");
        }
    }
};

struct FrameGeometry {
    int height = 64;
    int width = 64;
    double spacing = 0.5;  // mm per pixel

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }

    /// Local in-plane position of pixel (r, c); the frame centre is the local origin.
    Vec3 local_point(int r, int c) const {
        return {(c - 0.5 * (width - 1)) * spacing, (r - 0.5 * (height - 1)) * spacing, 0.0};
    }

    void validate() const {
        if (height < 2 || width < 2) throw std::invalid_argument("frame geometry: dimensions must be >= 2");
        if (!(spacing > 0.0)) throw std::invalid_argument("frame geometry: spacing must be > 0");
    }
    friend bool operator==(const FrameGeometry&, const FrameGeometry&) = default;
};

struct Frame {
    FrameGeometry geometry;
    std::vector<double> values;  // row-major, height x width

    Frame() = default;
    explicit Frame(const FrameGeometry& g, double fill = 0.0) : geometry(g), values(g.pixel_count(), fill) {
        g.validate();
    }

    double& at(int r, int c) { return values[static_cast<std::size_t>(r * geometry.width + c)]; }
    double at(int r, int c) const { return values[static_cast<std::size_t>(r * geometry.width + c)]; }
};

struct Sequence {
    FrameGeometry geometry;
    std::vector<Frame> frames;
    std::optional<RelativeParams> ground_truth;
    /// Fraction of in-volume pixels per frame, filled by the simulator.
    std::vector<double> coverage;

    std::size_t size() const { return frames.size(); }

    void validate() const {
        geometry.validate();
        for (const Frame& f : frames)
            if (!(f.geometry == geometry)) throw std::invalid_argument("sequence: frame geometry mismatch");
        if (ground_truth && ground_truth->size() + 1 != frames.size())
            throw std::invalid_argument("sequence: ground truth must have N-1 entries");
    }
};

struct Sample {
    double gray = 0.0;
    bool valid = false;
};

namespace detail {

/// Linear interpolation cell along one axis of n samples. Right-continuous: at an interior
/// lattice point the upper cell is used; the last lattice point falls into the last cell.
struct AxisCell {
    int i0 = 0;
    int i1 = 0;
    double frac = 0.0;
};

inline bool axis_cell(double u, int n, AxisCell& cell) {
    if (!(u >= 0.0) || u > static_cast<double>(n - 1)) return false;
    if (n == 1) {
        cell = {0, 0, 0.0};
        return true;
    }
    int i0 = static_cast<int>(std::floor(u));
    if (i0 >= n - 1) i0 = n - 2;
    cell = {i0, i0 + 1, u - i0};
    return true;
}

}  // namespace detail

/// Trilinear interpolation with the gradient (per mm) of the gray with respect to the sample point.
inline Sample trilinear_sample(const Volume& v, const Vec3& pt, Vec3* gradient = nullptr,
                               std::array<std::size_t, 8>* corners = nullptr,
                               std::array<double, 8>* corner_weights = nullptr) {
    const Grid& g = v.grid;
    detail::AxisCell cx, cy, cz;
    if (!detail::axis_cell((pt.x - g.origin.x) / g.spacing.x, g.dims[0], cx) ||
        !detail::axis_cell((pt.y - g.origin.y) / g.spacing.y, g.dims[1], cy) ||
        !detail::axis_cell((pt.z - g.origin.z) / g.spacing.z, g.dims[2], cz))
        return {};

    std::array<std::size_t, 8> idx{};
    int n = 0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                idx[static_cast<std::size_t>(n)] =
                    g.index(dx ? cx.i1 : cx.i0, dy ? cy.i1 : cy.i0, dz ? cz.i1 : cz.i0);
                if (!v.valid(idx[static_cast<std::size_t>(n)])) return {};
                ++n;
            }

    const double fx = cx.frac, fy = cy.frac, fz = cz.frac;
    const std::array<double, 2> wx{1.0 - fx, fx}, wy{1.0 - fy, fy}, wz{1.0 - fz, fz};
    double gray = 0.0, gx = 0.0, gy = 0.0, gz = 0.0;
    n = 0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const double val = v.values[idx[static_cast<std::size_t>(n)]];
                const double w = wx[static_cast<std::size_t>(dx)] * wy[static_cast<std::size_t>(dy)] *
                                 wz[static_cast<std::size_t>(dz)];
                gray += w * val;
                gx += (dx ? 1.0 : -1.0) * wy[static_cast<std::size_t>(dy)] * wz[static_cast<std::size_t>(dz)] * val;
                gy += (dy ? 1.0 : -1.0) * wx[static_cast<std::size_t>(dx)] * wz[static_cast<std::size_t>(dz)] * val;
                gz += (dz ? 1.0 : -1.0) * wx[static_cast<std::size_t>(dx)] * wy[static_cast<std::size_t>(dy)] * val;
                if (corner_weights) (*corner_weights)[static_cast<std::size_t>(n)] = w;
                ++n;
            }
    if (corners) *corners = idx;
    // Degenerate (single-voxel) axes carry no slope.
    if (gradient)
        *gradient = {g.dims[0] > 1 ? gx / g.spacing.x : 0.0, g.dims[1] > 1 ? gy / g.spacing.y : 0.0,
                     g.dims[2] > 1 ? gz / g.spacing.z : 0.0};
    return {gray, true};
}

/// Bilinear sample of a frame at continuous (row, col); gradient is per pixel.
inline Sample bilinear_sample(const Frame& f, double row, double col, double* d_row = nullptr,
                              double* d_col = nullptr) {
    detail::AxisCell cr, cc;
    if (!detail::axis_cell(row, f.geometry.height, cr) || !detail::axis_cell(col, f.geometry.width, cc)) return {};
    const double v00 = f.at(cr.i0, cc.i0), v01 = f.at(cr.i0, cc.i1);
    const double v10 = f.at(cr.i1, cc.i0), v11 = f.at(cr.i1, cc.i1);
    const double fr = cr.frac, fc = cc.frac;
    const double top = v00 + fc * (v01 - v00);
    const double bottom = v10 + fc * (v11 - v10);
    if (d_row) *d_row = bottom - top;
    if (d_col) *d_col = (1.0 - fr) * (v01 - v00) + fr * (v11 - v10);
    return {top + fr * (bottom - top), true};
}

/// A resliced frame together with its per-pixel validity.
struct SliceSample {
    Frame frame;
    std::vector<std::uint8_t> valid;

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (auto m : valid) n += m != 0;
        return n;
    }
};

inline SliceSample extract_slice_masked(const Volume& v, const RigidTransform& T, const FrameGeometry& g) {
    SliceSample out{Frame(g), std::vector<std::uint8_t>(g.pixel_count(), 0)};
    for (int r = 0; r < g.height; ++r)
        for (int c = 0; c < g.width; ++c) {
            const Sample s = trilinear_sample(v, apply_transform(T, g.local_point(r, c)));
            if (s.valid) {
                out.frame.at(r, c) = s.gray;
                out.valid[static_cast<std::size_t>(r * g.width + c)] = 1;
            }
        }
    return out;
}

/// Reslices the volume on the plane of a frame at pose p; samples outside the volume are 0.
inline Frame extract_slice(const Volume& v, const Pose& p, const FrameGeometry& g) {
    return extract_slice_masked(v, pose_to_transform(p), g).frame;
}

}  // namespace fhr
