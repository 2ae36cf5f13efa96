// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "fhr/imaging.hpp"

namespace fhr {

/// Mean absolute error plus (1 - Pearson correlation) over the flattened 6(N-1) components.
/// A zero-variance side gets the maximal correlation penalty of 1.
inline double loss_train(std::span<const Pose> est, std::span<const Pose> gt) {
    if (est.size() != gt.size()) throw std::invalid_argument("loss_train: length mismatch");
    if (est.empty()) throw std::invalid_argument("loss_train: empty parameter lists");
    std::vector<double> a, b;
    for (std::size_t i = 0; i < est.size(); ++i)
        for (std::size_t k = 0; k < Pose::kDof; ++k) {
            a.push_back(est[i][k]);
            b.push_back(gt[i][k]);
        }
    const double n = static_cast<double>(a.size());
    double mae = 0.0, ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mae += std::abs(a[i] - b[i]);
        ma += a[i];
        mb += b[i];
    }
    mae /= n;
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    const double corr_penalty = (va <= 0.0 || vb <= 0.0) ? 1.0 : 1.0 - cov / std::sqrt(va * vb);
    return mae + corr_penalty;
}

// ---------------------------------------------------------------------------
// Shape-prior discriminator

struct FeatureSpec {
    int pool = 8;   // pooled grid is pool^3
    int bins = 16;  // gray histogram bins

    std::size_t length() const {
        return static_cast<std::size_t>(pool) * static_cast<std::size_t>(pool) * static_cast<std::size_t>(pool) +
               static_cast<std::size_t>(bins);
    }
    friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

struct DiscriminatorParams {
    FeatureSpec spec;
    std::vector<double> weights;
    double bias = 0.0;

    DiscriminatorParams() : weights(spec.length(), 0.0) {}
    explicit DiscriminatorParams(FeatureSpec s) : spec(s), weights(s.length(), 0.0) {}
};

namespace detail {

inline std::size_t pool_cell(const Grid& g, std::size_t idx, int pool) {
    const auto c = g.coords(idx);
    std::size_t cell = 0;
    for (int axis = 2; axis >= 0; --axis) {
        const auto a = static_cast<std::size_t>(axis);
        const auto p = static_cast<std::size_t>(static_cast<long long>(c[a]) * pool / g.dims[a]);
        cell = cell * static_cast<std::size_t>(pool) + p;
    }
    return cell;
}

/// Histogram membership of one gray. Bins are hard except within a quarter bin of each
/// interior edge, where mass moves to the neighbouring bin along a quintic smoothstep.
/// The features are then twice differentiable in the gray.
struct SoftBin {
    int lo = 0;
    int hi = 0;
    double w_hi = 0.0;
    double slope = 0.0;  // d w_hi / d gray
};

inline SoftBin soft_bin(double gray, int bins) {
    const double half_width = 0.25 / bins;
    const int edge = std::clamp(static_cast<int>(std::lround(gray * bins)), 1, bins - 1);
    const double t = (gray - static_cast<double>(edge) / bins + half_width) / (2.0 * half_width);
    if (t <= 0.0) return {edge - 1, edge - 1, 0.0, 0.0};
    if (t >= 1.0) return {edge, edge, 0.0, 0.0};
    const double s = t * t * t * (t * (6.0 * t - 15.0) + 10.0);
    const double ds = 30.0 * t * t * (t - 1.0) * (t - 1.0);
    return {edge - 1, edge, s, ds / (2.0 * half_width)};
}

}  // namespace detail

/// pool^3 average-pooled grays over valid voxels (empty cells are 0) followed by an
/// L1-normalised gray histogram over valid voxels (see soft_bin).
inline std::vector<double> disc_features(const Volume& v, const FeatureSpec& spec = {}) {
    const std::size_t cells = spec.length() - static_cast<std::size_t>(spec.bins);
    std::vector<double> f(spec.length(), 0.0);
    std::vector<double> count(cells, 0.0);
    double valid = 0.0;
    for (std::size_t idx = 0; idx < v.values.size(); ++idx) {
        if (!v.valid(idx)) continue;
        const std::size_t cell = detail::pool_cell(v.grid, idx, spec.pool);
        f[cell] += v.values[idx];
        count[cell] += 1.0;
        const detail::SoftBin b = detail::soft_bin(v.values[idx], spec.bins);
        f[cells + static_cast<std::size_t>(b.lo)] += 1.0 - b.w_hi;
        f[cells + static_cast<std::size_t>(b.hi)] += b.w_hi;
        valid += 1.0;
    }
    for (std::size_t c = 0; c < cells; ++c)
        if (count[c] > 0.0) f[c] /= count[c];
    if (valid > 0.0)
        for (std::size_t k = cells; k < f.size(); ++k) f[k] /= valid;
    return f;
}

inline double disc_score_features(std::span<const double> features, const DiscriminatorParams& c) {
    if (features.size() != c.weights.size()) throw std::invalid_argument("disc_score: feature length mismatch");
    double s = c.bias;
    for (std::size_t i = 0; i < features.size(); ++i) s += c.weights[i] * features[i];
    return s;
}

/// Raw affine score; larger means more like the real pool.
inline double disc_score(const Volume& v, const DiscriminatorParams& c) {
    if (c.weights.size() != c.spec.length()) throw std::invalid_argument("disc_score: weights do not match feature spec");
    return disc_score_features(disc_features(v, c.spec), c);
}

/// d score / d voxel gray for every voxel (zero on invalid voxels).
inline std::vector<double> disc_score_gradient(const Volume& v, const DiscriminatorParams& c) {
    const FeatureSpec& spec = c.spec;
    const std::size_t cells = spec.length() - static_cast<std::size_t>(spec.bins);
    std::vector<double> count(cells, 0.0);
    double valid = 0.0;
    for (std::size_t idx = 0; idx < v.values.size(); ++idx) {
        if (!v.valid(idx)) continue;
        count[detail::pool_cell(v.grid, idx, spec.pool)] += 1.0;
        valid += 1.0;
    }
    std::vector<double> grad(v.values.size(), 0.0);
    for (std::size_t idx = 0; idx < v.values.size(); ++idx) {
        if (!v.valid(idx)) continue;
        const std::size_t cell = detail::pool_cell(v.grid, idx, spec.pool);
        const detail::SoftBin b = detail::soft_bin(v.values[idx], spec.bins);
        const double hist = b.slope * (c.weights[cells + static_cast<std::size_t>(b.hi)] -
                                       c.weights[cells + static_cast<std::size_t>(b.lo)]);
        grad[idx] = c.weights[cell] / count[cell] + hist / valid;
    }
    return grad;
}

/// Logistic regression (real = 1, fake = 0) by full-batch gradient descent.
inline DiscriminatorParams disc_pretrain(std::span<const Volume> real, std::span<const Volume> fake,
                                         std::uint64_t seed, const FeatureSpec& spec = {}, int steps = 200,
                                         double lr = 0.1) {
    if (real.empty() || fake.empty()) throw std::invalid_argument("disc_pretrain: both pools must be non-empty");
    std::vector<std::vector<double>> x;
    std::vector<double> y;
    for (const Volume& v : real) {
        x.push_back(disc_features(v, spec));
        y.push_back(1.0);
    }
    for (const Volume& v : fake) {
        x.push_back(disc_features(v, spec));
        y.push_back(0.0);
    }

    DiscriminatorParams c(spec);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> init(0.0, 0.01);
    for (double& w : c.weights) w = init(rng);

    const double n = static_cast<double>(x.size());
    std::vector<double> gw(c.weights.size());
    for (int step = 0; step < steps; ++step) {
        std::fill(gw.begin(), gw.end(), 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double p = 1.0 / (1.0 + std::exp(-disc_score_features(x[i], c)));
            const double r = (p - y[i]) / n;
            for (std::size_t k = 0; k < gw.size(); ++k) gw[k] += r * x[i][k];
            gb += r;
        }
        for (std::size_t k = 0; k < gw.size(); ++k) c.weights[k] -= lr * gw[k];
        c.bias -= lr * gb;
    }
    return c;
}

/// Fraction of volumes classified correctly (score > 0 means real).
inline double disc_accuracy(std::span<const Volume> real, std::span<const Volume> fake, const DiscriminatorParams& c) {
    double hits = 0.0;
    for (const Volume& v : real) hits += disc_score(v, c) > 0.0;
    for (const Volume& v : fake) hits += disc_score(v, c) <= 0.0;
    return hits / static_cast<double>(real.size() + fake.size());
}

/// Sum of |V_f - V_r| over voxels valid in both.
inline double volume_l1(const Volume& a, const Volume& b) {
    if (!(a.grid.dims == b.grid.dims)) throw std::invalid_argument("volume_l1: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        if (a.valid(i) && b.valid(i)) s += std::abs(a.values[i] - b.values[i]);
    return s;
}

/// Quadratic-potential discriminator loss from raw scores and the volume L1 distance.
/// The quadratic term is dropped when the volumes coincide (l1 < 1e-12).
inline double loss_discriminator_scores(double score_fake, double score_real, double l1) {
    const double diff = score_fake - score_real;
    const double quad = l1 < 1e-12 ? 0.0 : diff * diff / (2.0 * l1);
    return diff + quad;
}

inline double loss_discriminator(const Volume& fake, const Volume& real, const DiscriminatorParams& c) {
    const double l1 = volume_l1(fake, real);
    return loss_discriminator_scores(disc_score(fake, c), disc_score(real, c), l1);
}

struct RefineLossReport {
    double L_d = 0.0;
    double L_g = 0.0;
    double ssl_term = 0.0;
    double adv_term = 0.0;
};

/// Mean absolute difference over pixels valid in the generated slices.
inline double ssl_term(std::span<const SliceSample> generated, std::span<const Frame> reference) {
    if (generated.size() != reference.size()) throw std::invalid_argument("ssl_term: slice count mismatch");
    double sum = 0.0;
    double count = 0.0;
    for (std::size_t m = 0; m < generated.size(); ++m) {
        const Frame& g = generated[m].frame;
        if (!(g.geometry == reference[m].geometry)) throw std::invalid_argument("ssl_term: slice geometry mismatch");
        for (std::size_t p = 0; p < g.values.size(); ++p) {
            if (!generated[m].valid[p]) continue;
            sum += std::abs(g.values[p] - reference[m].values[p]);
            count += 1.0;
        }
    }
    return count > 0.0 ? sum / count : 0.0;
}

/// Generator loss: -C(V_f) plus the self-supervised slice term. L_d is left at 0.
inline RefineLossReport loss_generator(const Volume& fake, const DiscriminatorParams& c,
                                       std::span<const SliceSample> generated, std::span<const Frame> reference) {
    RefineLossReport r;
    r.adv_term = -disc_score(fake, c);
    r.ssl_term = ssl_term(generated, reference);
    r.L_g = r.adv_term + r.ssl_term;
    return r;
}

}  // namespace fhr
