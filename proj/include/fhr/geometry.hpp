// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fhr {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

    friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

/// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> m{};

    static Mat3 identity() { return {{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }

    double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }
    double& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }

    Mat3 transposed() const {
        Mat3 t;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
        return t;
    }

    friend Mat3 operator*(const Mat3& a, const Mat3& b) {
        Mat3 out;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                out(r, c) = a(r, 0) * b(0, c) + a(r, 1) * b(1, c) + a(r, 2) * b(2, c);
        return out;
    }
    friend Vec3 operator*(const Mat3& a, const Vec3& v) {
        return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
                a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
                a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
    }
    Mat3& operator+=(const Mat3& o) {
        for (std::size_t i = 0; i < 9; ++i) m[i] += o.m[i];
        return *this;
    }
    friend bool operator==(const Mat3&, const Mat3&) = default;
};

inline double determinant(const Mat3& a) {
    return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
           a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
           a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

/// 6-DOF rigid motion: translation in mm, Euler angles in radians.
struct Pose {
    double tx = 0.0, ty = 0.0, tz = 0.0;
    double rx = 0.0, ry = 0.0, rz = 0.0;

    static constexpr std::size_t kDof = 6;

    std::array<double, 6> as_array() const { return {tx, ty, tz, rx, ry, rz}; }
    static Pose from_array(const std::array<double, 6>& a) { return {a[0], a[1], a[2], a[3], a[4], a[5]}; }

    double operator[](std::size_t i) const { return as_array()[i]; }

    bool is_finite() const {
        for (double v : as_array())
            if (!std::isfinite(v)) return false;
        return true;
    }
    friend bool operator==(const Pose&, const Pose&) = default;
};

/// Entry i is the motion of frame i+1 expressed in frame i's local coordinates.
using RelativeParams = std::vector<Pose>;

/// Homogeneous rigid transform x -> R x + t.
struct RigidTransform {
    Mat3 R = Mat3::identity();
    Vec3 t{};

    static RigidTransform identity() { return {}; }

    /// Row-major 4x4 homogeneous matrix.
    std::array<double, 16> matrix() const {
        return {R(0, 0), R(0, 1), R(0, 2), t.x, R(1, 0), R(1, 1), R(1, 2), t.y,
                R(2, 0), R(2, 1), R(2, 2), t.z, 0.0,     0.0,     0.0,     1.0};
    }

    static RigidTransform from_matrix(const std::array<double, 16>& m) {
        if (m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0)
            throw std::invalid_argument("rigid transform: bottom row must be (0,0,0,1)");
        RigidTransform T;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) T.R(r, c) = m[static_cast<std::size_t>(4 * r + c)];
        T.t = {m[3], m[7], m[11]};
        return T;
    }

    RigidTransform inverse() const {
        RigidTransform inv;
        inv.R = R.transposed();
        inv.t = -1.0 * (inv.R * t);
        return inv;
    }

    friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
        return {a.R * b.R, a.R * b.t + a.t};
    }
};

/// Maximum elementwise deviation of R^T R from identity.
inline double orthonormality_error(const Mat3& R) {
    const Mat3 g = R.transposed() * R;
    const Mat3 I = Mat3::identity();
    double worst = 0.0;
    for (std::size_t i = 0; i < 9; ++i) worst = std::max(worst, std::abs(g.m[i] - I.m[i]));
    return worst;
}

inline Mat3 rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{1, 0, 0, 0, c, -s, 0, s, c}};
}
inline Mat3 rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{c, 0, s, 0, 1, 0, -s, 0, c}};
}
inline Mat3 rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{c, -s, 0, s, c, 0, 0, 0, 1}};
}

/// T = Trans(tx,ty,tz) * Rz(rz) * Ry(ry) * Rx(rx).
inline RigidTransform pose_to_transform(const Pose& p) {
    if (!p.is_finite()) throw std::invalid_argument("pose_to_transform: non-finite pose component");
    return {rot_z(p.rz) * rot_y(p.ry) * rot_x(p.rx), {p.tx, p.ty, p.tz}};
}

/// Inverse of pose_to_transform. At gimbal lock (|ry| = pi/2) rx is fixed to 0.
inline Pose transform_to_pose(const RigidTransform& T) {
    for (double v : T.R.m)
        if (!std::isfinite(v)) throw std::invalid_argument("transform_to_pose: non-finite matrix");
    if (!std::isfinite(T.t.x) || !std::isfinite(T.t.y) || !std::isfinite(T.t.z))
        throw std::invalid_argument("transform_to_pose: non-finite translation");
    if (orthonormality_error(T.R) > 1e-9 || determinant(T.R) <= 0.0)
        throw std::invalid_argument("transform_to_pose: rotation block is not a proper rotation");

    const Mat3& R = T.R;
    Pose p{T.t.x, T.t.y, T.t.z, 0.0, 0.0, 0.0};
    const double cos_ry = std::hypot(R(0, 0), R(1, 0));
    p.ry = std::atan2(-R(2, 0), cos_ry);
    if (cos_ry < 1e-9) {
        p.rx = 0.0;
        p.rz = std::atan2(-R(0, 1), R(1, 1));
    } else {
        p.rx = std::atan2(R(2, 1), R(2, 2));
        p.rz = std::atan2(R(1, 0), R(0, 0));
    }
    return p;
}

inline Vec3 apply_transform(const RigidTransform& T, const Vec3& pt) { return T.R * pt + T.t; }

/// Absolute transforms of every frame relative to the first one (length rel.size() + 1).
inline std::vector<RigidTransform> chain_transforms(std::span<const Pose> rel) {
    if (rel.empty()) throw std::invalid_argument("chain_relative: relative parameter list is empty");
    std::vector<RigidTransform> out;
    out.reserve(rel.size() + 1);
    out.push_back(RigidTransform::identity());
    for (const Pose& step : rel) out.push_back(out.back() * pose_to_transform(step));
    return out;
}

inline std::vector<Pose> chain_relative(std::span<const Pose> rel) {
    std::vector<Pose> poses;
    for (const RigidTransform& T : chain_transforms(rel)) poses.push_back(transform_to_pose(T));
    return poses;
}

/// Recovers relative parameters from absolute transforms: T_i^-1 * T_{i+1}.
inline RelativeParams relative_from_absolute(std::span<const RigidTransform> abs) {
    RelativeParams rel;
    for (std::size_t i = 0; i + 1 < abs.size(); ++i)
        rel.push_back(transform_to_pose(abs[i].inverse() * abs[i + 1]));
    return rel;
}

/// Frame centre (local origin) of every chained frame.
inline std::vector<Vec3> frame_centers(std::span<const Pose> rel) {
    std::vector<Vec3> c;
    for (const RigidTransform& T : chain_transforms(rel)) c.push_back(T.t);
    return c;
}

}  // namespace fhr
