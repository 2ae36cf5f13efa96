// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fhr/losses.hpp"

using namespace fhr;

namespace {

RelativeParams random_params(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RelativeParams r(n);
    for (Pose& p : r) p = {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    return r;
}

const Grid kSmall{{2, 2, 2}, {1, 1, 1}, {0, 0, 0}};

Volume random_volume(std::mt19937_64& rng, const Grid& g, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Volume v(g);
    for (double& x : v.values) x = u(rng);
    return v;
}

}  // namespace

TEST(LossTrain, ZeroAtGroundTruth) {
    std::mt19937_64 rng(1);
    const RelativeParams gt = random_params(rng, 9);
    EXPECT_NEAR(loss_train(gt, gt), 0.0, 1e-12);
}

TEST(LossTrain, ConstantShiftCostsOnlyTheShift) {
    std::mt19937_64 rng(2);
    const RelativeParams gt = random_params(rng, 9);
    RelativeParams est = gt;
    for (Pose& p : est) {
        auto a = p.as_array();
        for (double& x : a) x += 0.3;
        p = Pose::from_array(a);
    }
    EXPECT_NEAR(loss_train(est, gt), 0.3, 1e-12);
}

TEST(LossTrain, NegatedZeroMeanGroundTruth) {
    std::mt19937_64 rng(3);
    RelativeParams gt = random_params(rng, 8);
    // Centre the flattened vector.
    double mean = 0.0;
    for (const Pose& p : gt)
        for (std::size_t k = 0; k < 6; ++k) mean += p[k];
    mean /= 48.0;
    double mean_abs = 0.0;
    for (Pose& p : gt) {
        auto a = p.as_array();
        for (double& x : a) {
            x -= mean;
            mean_abs += std::abs(2.0 * x);
        }
        p = Pose::from_array(a);
    }
    mean_abs /= 48.0;
    RelativeParams est = gt;
    for (Pose& p : est) {
        auto a = p.as_array();
        for (double& x : a) x = -x;
        p = Pose::from_array(a);
    }
    EXPECT_NEAR(loss_train(est, gt), mean_abs + 2.0, 1e-12);
}

TEST(LossTrain, NonNegativeAndRejectsMismatch) {
    std::mt19937_64 rng(4);
    for (int n = 0; n < 200; ++n) {
        const RelativeParams a = random_params(rng, 5), b = random_params(rng, 5);
        EXPECT_GE(loss_train(a, b), 0.0);
    }
    const RelativeParams a = random_params(rng, 5), b = random_params(rng, 4);
    EXPECT_THROW(loss_train(a, b), std::invalid_argument);
    // Zero-variance side takes the full correlation penalty.
    const RelativeParams zero(5);
    EXPECT_NEAR(loss_train(zero, zero), 1.0, 1e-15);
}

TEST(DiscFeatures, DefaultLengthIs528) {
    EXPECT_EQ(FeatureSpec{}.length(), 528u);
    EXPECT_EQ(disc_features(Volume(Grid{{10, 9, 7}, {1, 1, 1}, {0, 0, 0}}, 0.3)).size(), 528u);
}

TEST(DiscFeatures, ConstantVolume) {
    const double g = 8.5 / 16.0;  // centre of bin 8
    const auto f = disc_features(Volume(Grid{{16, 16, 16}, {1, 1, 1}, {0, 0, 0}}, g));
    for (std::size_t c = 0; c < 512; ++c) EXPECT_DOUBLE_EQ(f[c], g);
    for (std::size_t b = 0; b < 16; ++b) EXPECT_DOUBLE_EQ(f[512 + b], b == 8 ? 1.0 : 0.0);
}

TEST(DiscFeatures, AllInvalidGivesZeroVector) {
    Volume v(Grid{{8, 8, 8}, {1, 1, 1}, {0, 0, 0}}, 0.0);
    std::fill(v.mask.begin(), v.mask.end(), 0);
    for (double x : disc_features(v)) EXPECT_EQ(x, 0.0);
}

TEST(DiscFeatures, HalfBlackHalfWhite) {
    Volume v(Grid{{8, 8, 8}, {1, 1, 1}, {0, 0, 0}}, 0.0);
    for (std::size_t i = 0; i < v.values.size(); i += 2) v.values[i] = 1.0;
    const auto f = disc_features(v);
    EXPECT_DOUBLE_EQ(f[512], 0.5);
    EXPECT_DOUBLE_EQ(f[527], 0.5);
    double mass = 0.0;
    for (std::size_t b = 0; b < 16; ++b) mass += f[512 + b];
    EXPECT_DOUBLE_EQ(mass, 1.0);
}

TEST(DiscFeatures, InvalidVoxelsAreExcludedFromPools) {
    const FeatureSpec spec{1, 4};
    Volume v(kSmall, 0.1);
    v.values[0] = 0.9;
    v.values[1] = 0.0;
    v.mask[1] = 0;
    const auto f = disc_features(v, spec);
    ASSERT_EQ(f.size(), 5u);
    EXPECT_NEAR(f[0], (0.9 + 6 * 0.1) / 7.0, 1e-15);
    EXPECT_NEAR(f[1], 6.0 / 7.0, 1e-15);
    EXPECT_NEAR(f[4], 1.0 / 7.0, 1e-15);
}

TEST(DiscScore, BiasOnlyAndLinearity) {
    std::mt19937_64 rng(5);
    const Volume v = random_volume(rng, Grid{{9, 9, 9}, {1, 1, 1}, {0, 0, 0}}, 0.0, 1.0);
    DiscriminatorParams c;
    c.bias = 0.7;
    EXPECT_DOUBLE_EQ(disc_score(v, c), 0.7);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& w : c.weights) w = n(rng);
    DiscriminatorParams c2 = c;
    for (double& w : c2.weights) w *= 2.0;
    c2.bias *= 2.0;
    EXPECT_NEAR(disc_score(v, c2), 2.0 * disc_score(v, c), 1e-12);
    c2.weights.pop_back();
    EXPECT_THROW(disc_score(v, c2), std::invalid_argument);
}

TEST(DiscScore, HandComputedDotProduct) {
    // Every voxel is its own pool cell; grays sit well inside their histogram bins.
    const FeatureSpec spec{2, 4};
    Volume v(kSmall);
    v.values = {0.1, 0.4, 0.6, 0.9, 0.05, 0.35, 0.65, 0.95};
    DiscriminatorParams c(spec);
    for (std::size_t i = 0; i < 12; ++i) c.weights[i] = static_cast<double>(i + 1);
    c.bias = -0.5;
    const double pooled = 1 * 0.1 + 2 * 0.4 + 3 * 0.6 + 4 * 0.9 + 5 * 0.05 + 6 * 0.35 + 7 * 0.65 + 8 * 0.95;
    const double hist = (9 + 10 + 11 + 12) * 0.25;
    EXPECT_NEAR(disc_score(v, c), pooled + hist - 0.5, 1e-12);
}

TEST(DiscScore, GradientMatchesDifferences) {
    std::mt19937_64 rng(6);
    const FeatureSpec spec{2, 4};
    Volume v = random_volume(rng, Grid{{4, 3, 3}, {1, 1, 1}, {0, 0, 0}}, 0.0, 1.0);
    v.mask[5] = 0;
    v.values[5] = 0.0;
    // Park one gray inside a soft edge so the histogram path is exercised.
    v.values[7] = 0.26;
    DiscriminatorParams c(spec);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& w : c.weights) w = n(rng);
    const auto g = disc_score_gradient(v, c);
    for (std::size_t i = 0; i < v.values.size(); ++i) {
        Volume p = v, m = v;
        p.values[i] += 1e-6;
        m.values[i] -= 1e-6;
        const double fd = v.valid(i) ? (disc_score(p, c) - disc_score(m, c)) / 2e-6 : 0.0;
        EXPECT_NEAR(g[i], fd, 1e-6) << i;
    }
}

TEST(DiscPretrain, SeparablePools) {
    std::mt19937_64 rng(7);
    const Grid g{{8, 8, 8}, {1, 1, 1}, {0, 0, 0}};
    std::vector<Volume> real, fake;
    for (int i = 0; i < 6; ++i) {
        real.push_back(random_volume(rng, g, 0.6, 0.9));
        fake.push_back(random_volume(rng, g, 0.1, 0.4));
    }
    const DiscriminatorParams c = disc_pretrain(real, fake, 11);
    EXPECT_GE(disc_accuracy(real, fake, c), 0.95);
    const DiscriminatorParams c2 = disc_pretrain(real, fake, 11);
    EXPECT_EQ(c.weights, c2.weights);
    EXPECT_EQ(c.bias, c2.bias);
}

TEST(DiscPretrain, IdenticalPoolsAreAtChance) {
    std::mt19937_64 rng(8);
    const Grid g{{8, 8, 8}, {1, 1, 1}, {0, 0, 0}};
    std::vector<Volume> pool;
    for (int i = 0; i < 6; ++i) pool.push_back(random_volume(rng, g, 0.0, 1.0));
    EXPECT_NEAR(disc_accuracy(pool, pool, disc_pretrain(pool, pool, 12)), 0.5, 0.1);
    EXPECT_THROW(disc_pretrain(pool, std::vector<Volume>{}, 1), std::invalid_argument);
}

TEST(LossDiscriminator, ScoreExamples) {
    EXPECT_EQ(loss_discriminator_scores(0.4, 0.4, 3.0), 0.0);
    EXPECT_NEAR(loss_discriminator_scores(0.0, 1.0, 10.0), -0.95, 1e-15);
    EXPECT_EQ(loss_discriminator_scores(0.0, 1.0, 0.0), -1.0);
}

TEST(LossDiscriminator, SwapAndShiftProperties) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-3, 3), l(0.1, 50);
    for (int n = 0; n < 500; ++n) {
        const double a = u(rng), b = u(rng), d = l(rng), k = u(rng);
        const double quad = (a - b) * (a - b) / (2 * d);
        EXPECT_GE(quad, 0.0);
        EXPECT_NEAR(loss_discriminator_scores(a, b, d) - quad, -(loss_discriminator_scores(b, a, d) - quad), 1e-12);
        EXPECT_NEAR(loss_discriminator_scores(a + k, b + k, d), loss_discriminator_scores(a, b, d), 1e-12);
    }
}

TEST(LossDiscriminator, OnVolumes) {
    std::mt19937_64 rng(10);
    const Grid g{{6, 6, 6}, {1, 1, 1}, {0, 0, 0}};
    const Volume f = random_volume(rng, g, 0, 1), r = random_volume(rng, g, 0, 1);
    DiscriminatorParams c;
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& w : c.weights) w = n(rng);
    double l1 = 0.0;
    for (std::size_t i = 0; i < f.values.size(); ++i) l1 += std::abs(f.values[i] - r.values[i]);
    const double cf = disc_score(f, c), cr = disc_score(r, c);
    EXPECT_NEAR(loss_discriminator(f, r, c), cf - cr + (cf - cr) * (cf - cr) / (2 * l1), 1e-12);
    EXPECT_EQ(loss_discriminator(f, f, c), 0.0);
    EXPECT_THROW(loss_discriminator(f, Volume(Grid{{6, 6, 5}, {1, 1, 1}, {0, 0, 0}}), c), std::invalid_argument);
}

TEST(LossGenerator, Examples) {
    const FrameGeometry fg{4, 5, 1.0};
    const Volume v(kSmall, 0.3);
    std::vector<Frame> ref{Frame(fg, 0.2), Frame(fg, 0.6)};
    std::vector<SliceSample> gen;
    for (const Frame& f : ref) gen.push_back({f, std::vector<std::uint8_t>(fg.pixel_count(), 1)});

    DiscriminatorParams c;
    c.bias = 0.5;
    RefineLossReport r = loss_generator(v, c, gen, ref);
    EXPECT_DOUBLE_EQ(r.L_g, -0.5);

    c.bias = 0.25;
    for (SliceSample& s : gen)
        for (double& x : s.frame.values) x += 0.1;
    r = loss_generator(v, c, gen, ref);
    EXPECT_NEAR(r.L_g, 0.1 - 0.25, 1e-15);
    EXPECT_NEAR(r.L_g, r.adv_term + r.ssl_term, 1e-12);

    gen.pop_back();
    EXPECT_THROW(loss_generator(v, c, gen, ref), std::invalid_argument);
}

TEST(LossGenerator, MatchesDirectRecomputation) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const FrameGeometry fg{6, 7, 0.5};
    std::vector<Frame> ref;
    std::vector<SliceSample> gen;
    double sum = 0.0, count = 0.0;
    for (int m = 0; m < 3; ++m) {
        Frame a(fg), b(fg);
        std::vector<std::uint8_t> valid(fg.pixel_count());
        for (std::size_t p = 0; p < fg.pixel_count(); ++p) {
            a.values[p] = u(rng);
            b.values[p] = u(rng);
            valid[p] = u(rng) < 0.7;
            if (valid[p]) {
                sum += std::abs(a.values[p] - b.values[p]);
                count += 1;
            }
        }
        gen.push_back({a, valid});
        ref.push_back(b);
    }
    const Volume v = random_volume(rng, Grid{{5, 5, 5}, {1, 1, 1}, {0, 0, 0}}, 0, 1);
    DiscriminatorParams c;
    std::normal_distribution<double> n(0.0, 0.1);
    for (double& w : c.weights) w = n(rng);
    c.bias = 0.2;
    double score = c.bias;
    const auto f = disc_features(v);
    for (std::size_t i = 0; i < f.size(); ++i) score += c.weights[i] * f[i];
    const RefineLossReport r = loss_generator(v, c, gen, ref);
    EXPECT_NEAR(r.ssl_term, sum / count, 1e-12);
    EXPECT_NEAR(r.adv_term, -score, 1e-12);
    EXPECT_NEAR(r.L_g, sum / count - score, 1e-12);
}
