// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "fhr/imaging.hpp"

namespace fhr {

struct Ellipsoid {
    Vec3 center;
    Vec3 radii;  // mm, axis aligned
    double gray = 1.0;
};

/// Cylinder of the given radius around segment a-b (flat ends).
struct Tube {
    Vec3 a;
    Vec3 b;
    double radius = 1.0;
    double gray = 1.0;
};

struct PhantomSpec {
    Grid grid{{48, 48, 48}, {1.0, 1.0, 1.0}, {-23.5, -23.5, -23.5}};
    double background = 0.0;
    double sigma = 0.0;  // Gaussian smoothing, voxels
    std::vector<Ellipsoid> ellipsoids;
    std::vector<Tube> tubes;
    double jitter = 0.0;   // seeded uniform shift of every structure, mm
    double texture = 0.0;  // amplitude of seeded smooth texture added before smoothing

    bool empty() const { return ellipsoids.empty() && tubes.empty(); }
};

/// True if some structure is not symmetric under reflection through the grid centre,
/// so that slices along any non-degenerate trajectory differ.
inline bool has_asymmetric_structure(const PhantomSpec& spec) {
    const Grid& g = spec.grid;
    const Vec3 mid{g.origin.x + 0.5 * (g.dims[0] - 1) * g.spacing.x, g.origin.y + 0.5 * (g.dims[1] - 1) * g.spacing.y,
                   g.origin.z + 0.5 * (g.dims[2] - 1) * g.spacing.z};
    for (const Ellipsoid& e : spec.ellipsoids) {
        const bool centered = distance(e.center, mid) < 1e-9;
        const bool round = e.radii.x == e.radii.y && e.radii.y == e.radii.z;
        if (!centered || !round) return true;
    }
    for (const Tube& t : spec.tubes)
        if (distance(0.5 * (t.a + t.b), mid) > 1e-9) return true;
    return false;
}

namespace detail {

inline bool inside(const Ellipsoid& e, const Vec3& p) {
    const double dx = (p.x - e.center.x) / e.radii.x;
    const double dy = (p.y - e.center.y) / e.radii.y;
    const double dz = (p.z - e.center.z) / e.radii.z;
    return dx * dx + dy * dy + dz * dz <= 1.0;
}

inline bool inside(const Tube& t, const Vec3& p) {
    const Vec3 axis = t.b - t.a;
    const double len2 = dot(axis, axis);
    if (len2 == 0.0) return false;
    const double s = dot(p - t.a, axis) / len2;
    if (s < 0.0 || s > 1.0) return false;
    return distance(p, t.a + s * axis) <= t.radius;
}

/// Separable Gaussian blur (clamp-to-edge), sigma in voxels.
inline void gaussian_blur(std::vector<double>& data, const std::array<int, 3>& dims, double sigma) {
    if (!(sigma > 0.0)) return;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        total += kernel[static_cast<std::size_t>(i + radius)];
    }
    for (double& k : kernel) k /= total;

    const std::array<std::size_t, 3> stride{1, static_cast<std::size_t>(dims[0]),
                                            static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1])};
    std::vector<double> tmp(data.size());
    for (std::size_t axis = 0; axis < 3; ++axis) {
        const int n = dims[axis];
        for (std::size_t idx = 0; idx < data.size(); ++idx) {
            const int pos = static_cast<int>((idx / stride[axis]) % static_cast<std::size_t>(n));
            const std::size_t base = idx - static_cast<std::size_t>(pos) * stride[axis];
            double acc = 0.0;
            for (int o = -radius; o <= radius; ++o) {
                const int q = std::clamp(pos + o, 0, n - 1);
                acc += kernel[static_cast<std::size_t>(o + radius)] * data[base + static_cast<std::size_t>(q) * stride[axis]];
            }
            tmp[idx] = acc;
        }
        data.swap(tmp);
    }
}

}  // namespace detail

/// Voxelises the structures at voxel centres (later structures overwrite earlier ones),
/// adds optional seeded texture, then smooths. Deterministic for a fixed (spec, seed).
inline Volume generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
    if (spec.empty()) throw std::invalid_argument("generate_phantom: spec has no structures");
    spec.grid.validate();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto shift = [&]() { return Vec3{spec.jitter * unit(rng), spec.jitter * unit(rng), spec.jitter * unit(rng)}; };

    std::vector<Ellipsoid> ellipsoids = spec.ellipsoids;
    std::vector<Tube> tubes = spec.tubes;
    if (spec.jitter > 0.0) {
        for (Ellipsoid& e : ellipsoids) e.center += shift();
        for (Tube& t : tubes) {
            const Vec3 s = shift();
            t.a += s;
            t.b += s;
        }
    }

    Volume v(spec.grid, spec.background);
    for (std::size_t idx = 0; idx < v.values.size(); ++idx) {
        const Vec3 p = spec.grid.voxel_center(idx);
        for (const Ellipsoid& e : ellipsoids)
            if (detail::inside(e, p)) v.values[idx] = e.gray;
        for (const Tube& t : tubes)
            if (detail::inside(t, p)) v.values[idx] = t.gray;
    }

    if (spec.texture > 0.0) {
        std::vector<double> noise(v.values.size());
        for (double& n : noise) n = unit(rng);
        detail::gaussian_blur(noise, spec.grid.dims, 2.0);
        for (std::size_t i = 0; i < noise.size(); ++i) v.values[i] += spec.texture * noise[i];
    }

    detail::gaussian_blur(v.values, spec.grid.dims, spec.sigma);
    for (double& x : v.values) x = std::clamp(x, 0.0, 1.0);
    return v;
}

}  // namespace fhr
