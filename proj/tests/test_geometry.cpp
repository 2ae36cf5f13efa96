// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "fhr/geometry.hpp"
#include "oracles.hpp"

using namespace fhr;

namespace {

constexpr double kPi = std::numbers::pi;

Pose random_pose(std::mt19937_64& rng, double max_angle = 1.4) {
    std::uniform_real_distribution<double> t(-20.0, 20.0), a(-max_angle, max_angle);
    return {t(rng), t(rng), t(rng), a(rng), a(rng), a(rng)};
}

void expect_vec_near(const Vec3& a, const Vec3& b, double tol) {
    EXPECT_NEAR(a.x, b.x, tol);
    EXPECT_NEAR(a.y, b.y, tol);
    EXPECT_NEAR(a.z, b.z, tol);
}

double max_matrix_diff(const RigidTransform& a, const RigidTransform& b) {
    const auto ma = a.matrix(), mb = b.matrix();
    double d = 0.0;
    for (std::size_t i = 0; i < 16; ++i) d = std::max(d, std::abs(ma[i] - mb[i]));
    return d;
}

}  // namespace

TEST(PoseToTransform, ZeroPoseIsIdentity) {
    const auto m = pose_to_transform(Pose{}).matrix();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) EXPECT_EQ(m[static_cast<std::size_t>(4 * r + c)], r == c ? 1.0 : 0.0);
}

TEST(PoseToTransform, PureTranslationKeepsIdentityRotation) {
    const RigidTransform T = pose_to_transform({0, 0, 1, 0, 0, 0});
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) EXPECT_EQ(T.R(r, c), r == c ? 1.0 : 0.0);
    expect_vec_near(T.t, {0, 0, 1}, 0.0);
}

TEST(PoseToTransform, QuarterTurnAboutX) {
    const Vec3 p = apply_transform(pose_to_transform({0, 0, 0, kPi / 2, 0, 0}), {0, 0, 1});
    expect_vec_near(p, {0, -1, 0}, 1e-15);
}

TEST(PoseToTransform, MatchesHandWrittenEulerProduct) {
    std::mt19937_64 rng(11);
    for (int n = 0; n < 200; ++n) {
        const Pose p = random_pose(rng, 3.0);
        const auto m = pose_to_transform(p).matrix();
        const oracle::M4 o = oracle::pose_matrix(p);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) EXPECT_NEAR(m[static_cast<std::size_t>(4 * r + c)], o[r][c], 1e-14);
    }
}

TEST(PoseToTransform, RotationBlockIsOrthonormal) {
    std::mt19937_64 rng(12);
    for (int n = 0; n < 200; ++n) {
        const RigidTransform T = pose_to_transform(random_pose(rng, 3.0));
        EXPECT_LT(orthonormality_error(T.R), 1e-12);
        EXPECT_NEAR(determinant(T.R), 1.0, 1e-12);
    }
}

TEST(PoseToTransform, RejectsNonFinite) {
    EXPECT_THROW(pose_to_transform({std::nan(""), 0, 0, 0, 0, 0}), std::invalid_argument);
    EXPECT_THROW(pose_to_transform({0, 0, 0, 0, std::numeric_limits<double>::infinity(), 0}), std::invalid_argument);
}

TEST(TransformToPose, IdentityGivesZeroPose) { EXPECT_EQ(transform_to_pose(RigidTransform::identity()), Pose{}); }

TEST(TransformToPose, PureTranslation) {
    RigidTransform T;
    T.t = {0, 0, 2};
    EXPECT_EQ(transform_to_pose(T), (Pose{0, 0, 2, 0, 0, 0}));
}

TEST(TransformToPose, RoundTripWithinNonDegenerateRange) {
    std::mt19937_64 rng(13);
    for (int n = 0; n < 500; ++n) {
        const Pose p = random_pose(rng, kPi / 2 - 0.05);
        const Pose q = transform_to_pose(pose_to_transform(p));
        const auto a = p.as_array(), b = q.as_array();
        for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(a[k], b[k], 1e-9);
    }
}

TEST(TransformToPose, ReproducesTransformForAnyAngles) {
    std::mt19937_64 rng(14);
    for (int n = 0; n < 500; ++n) {
        const RigidTransform T = pose_to_transform(random_pose(rng, 3.1));
        EXPECT_LT(max_matrix_diff(pose_to_transform(transform_to_pose(T)), T), 1e-9);
    }
}

TEST(TransformToPose, GimbalLockFixesRx) {
    for (double ry : {kPi / 2, -kPi / 2}) {
        const RigidTransform T = pose_to_transform({1, 2, 3, 0.4, ry, -0.3});
        const Pose q = transform_to_pose(T);
        EXPECT_EQ(q.rx, 0.0);
        EXPECT_NEAR(q.ry, ry, 1e-9);
        EXPECT_LT(max_matrix_diff(pose_to_transform(q), T), 1e-9);
    }
}

TEST(TransformToPose, RejectsNonOrthonormal) {
    RigidTransform T;
    T.R(0, 0) = 1.1;
    EXPECT_THROW(transform_to_pose(T), std::invalid_argument);
    RigidTransform M;
    M.R(2, 2) = -1.0;  // reflection
    EXPECT_THROW(transform_to_pose(M), std::invalid_argument);
}

TEST(RigidTransformMatrix, RejectsBadBottomRow) {
    auto m = RigidTransform::identity().matrix();
    m[14] = 0.5;
    EXPECT_THROW(RigidTransform::from_matrix(m), std::invalid_argument);
    m[14] = 0.0;
    EXPECT_NO_THROW(RigidTransform::from_matrix(m));
}

TEST(ChainRelative, StraightSteps) {
    const RelativeParams rel{{0, 0, 1, 0, 0, 0}, {0, 0, 1, 0, 0, 0}};
    const auto c = frame_centers(rel);
    ASSERT_EQ(c.size(), 3u);
    for (int i = 0; i < 3; ++i) expect_vec_near(c[static_cast<std::size_t>(i)], {0, 0, static_cast<double>(i)}, 0.0);
}

TEST(ChainRelative, EmptyIsRejectedSingleEntryGivesTwoPoses) {
    EXPECT_THROW(chain_relative(RelativeParams{}), std::invalid_argument);
    const auto abs = chain_relative(RelativeParams{{1, 0, 0, 0, 0, 0}});
    ASSERT_EQ(abs.size(), 2u);
    EXPECT_EQ(abs[0], Pose{});
}

TEST(ChainRelative, RotationThenStepMovesAlongRotatedAxis) {
    const RelativeParams rel{{0, 0, 0, kPi / 2, 0, 0}, {0, 0, 1, 0, 0, 0}};
    const auto c = frame_centers(rel);
    expect_vec_near(c[2], {0, -1, 0}, 1e-15);
}

TEST(ChainRelative, ZeroParamsGiveIdentityPoses) {
    const auto abs = chain_relative(RelativeParams(7));
    for (const Pose& p : abs) EXPECT_EQ(p, Pose{});
}

TEST(ChainRelative, MatchesHomogeneousMatrixProduct) {
    std::mt19937_64 rng(15);
    RelativeParams rel;
    for (int i = 0; i < 30; ++i) rel.push_back(random_pose(rng, 0.3));
    const auto mine = chain_transforms(rel);
    const auto ref = oracle::chain(rel);
    ASSERT_EQ(mine.size(), ref.size());
    for (std::size_t i = 0; i < mine.size(); ++i) {
        const auto m = mine[i].matrix();
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) EXPECT_NEAR(m[static_cast<std::size_t>(4 * r + c)], ref[i][r][c], 1e-11);
    }
}

TEST(ChainRelative, RelativeParamsRecoveredFromAbsoluteTransforms) {
    std::mt19937_64 rng(16);
    RelativeParams rel;
    for (int i = 0; i < 25; ++i) rel.push_back(random_pose(rng, 1.2));
    const RelativeParams back = relative_from_absolute(chain_transforms(rel));
    ASSERT_EQ(back.size(), rel.size());
    for (std::size_t i = 0; i < rel.size(); ++i)
        for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(back[i][k], rel[i][k], 1e-9);
}

TEST(Composition, IsAssociative) {
    std::mt19937_64 rng(17);
    for (int n = 0; n < 200; ++n) {
        const RigidTransform a = pose_to_transform(random_pose(rng, 3.0));
        const RigidTransform b = pose_to_transform(random_pose(rng, 3.0));
        const RigidTransform c = pose_to_transform(random_pose(rng, 3.0));
        EXPECT_LT(max_matrix_diff((a * b) * c, a * (b * c)), 1e-9);
    }
}

TEST(Composition, InverseCancels) {
    std::mt19937_64 rng(18);
    for (int n = 0; n < 100; ++n) {
        const RigidTransform a = pose_to_transform(random_pose(rng, 3.0));
        EXPECT_LT(max_matrix_diff(a * a.inverse(), RigidTransform::identity()), 1e-12);
    }
}

TEST(ApplyTransform, Examples) {
    expect_vec_near(apply_transform(RigidTransform::identity(), {1, 2, 3}), {1, 2, 3}, 0.0);
    expect_vec_near(apply_transform(pose_to_transform({0, 0, 5, 0, 0, 0}), {0, 0, 0}), {0, 0, 5}, 0.0);
    expect_vec_near(apply_transform(pose_to_transform({0, 0, 0, kPi / 2, 0, 0}), {0, 1, 0}), {0, 0, 1}, 1e-15);
}
