// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fhr/gradient.hpp"
#include "fhr/metrics.hpp"
#include "fhr/recon.hpp"
#include "fhr/split.hpp"

namespace fhr {

enum class PoseOptimizer {
    sgd,   // plain gradient descent
    adam,  // per-component normalised steps; the rates become step lengths in mm / rad
};

inline std::string to_string(PoseOptimizer o) { return o == PoseOptimizer::adam ? "adam" : "sgd"; }

inline PoseOptimizer parse_pose_optimizer(const std::string& s) {
    if (s == "adam") return PoseOptimizer::adam;
    if (s == "sgd") return PoseOptimizer::sgd;
    throw std::invalid_argument("unknown pose optimizer: " + s);
}

struct RefineConfig {
    double proportion = 0.5;
    int iterations = 30;
    double lr_translation = 1e-2;
    double lr_rotation = 1e-3;
    double lr_disc = 0.3;
    double adv_weight = 1.0;
    double ssl_weight = 1.0;
    int backtracking = 5;  // step halvings tried before an iteration gives up its generator step
    PoseOptimizer optimizer = PoseOptimizer::sgd;
    ReconParams recon;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(proportion > 0.0 && proportion < 1.0)) throw std::invalid_argument("refine: proportion must be in (0,1)");
        if (iterations < 1) throw std::invalid_argument("refine: iterations must be >= 1");
        if (!(lr_translation > 0.0 && lr_rotation > 0.0 && lr_disc > 0.0))
            throw std::invalid_argument("refine: learning rates must be > 0");
        if (backtracking < 0) throw std::invalid_argument("refine: backtracking must be >= 0");
        recon.validate();
    }
};

struct RefineHistory {
    std::vector<RefineLossReport> losses;
    std::vector<MetricsReport> metrics;  // empty without ground truth
    std::vector<std::uint64_t> param_hashes;
    std::vector<int> halvings;  // step halvings used; -1 when the step was rejected

    std::size_t size() const { return losses.size(); }
};

struct RefineResult {
    RelativeParams refined;
    DiscriminatorParams disc;
    RefineHistory history;
};

/// FNV-1a over the raw bytes of the parameters.
inline std::uint64_t hash_params(std::span<const Pose> rel) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const Pose& p : rel)
        for (double v : p.as_array()) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof(double));
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 1099511628211ULL;
            }
        }
    return h;
}

namespace detail {

struct AdamState {
    std::vector<double> m, v;
    int t = 0;
};

inline RelativeParams take_step(const RelativeParams& at, const std::vector<double>& direction, double scale) {
    RelativeParams out = at;
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto a = out[i].as_array();
        for (std::size_t k = 0; k < 6; ++k) a[k] -= scale * direction[6 * i + k];
        out[i] = Pose::from_array(a);
    }
    return out;
}

/// One quadratic-potential discriminator descent step; returns L_d before the step.
inline double discriminator_step(DiscriminatorParams& c, const Volume& fake, const Volume& real, double lr) {
    const std::vector<double> ff = disc_features(fake, c.spec);
    const std::vector<double> fr = disc_features(real, c.spec);
    const double sf = disc_score_features(ff, c);
    const double sr = disc_score_features(fr, c);
    const double l1 = volume_l1(fake, real);
    const double loss = loss_discriminator_scores(sf, sr, l1);
    // dL/dC_f = 1 + diff/l1 = -dL/dC_r; the bias cancels.
    const double g = 1.0 + (l1 < 1e-12 ? 0.0 : (sf - sr) / l1);
    for (std::size_t k = 0; k < c.weights.size(); ++k) c.weights[k] -= lr * g * (ff[k] - fr[k]);
    return loss;
}

}  // namespace detail

/// Test-time refinement of relative pose estimates. Each iteration takes one discriminator
/// step on the quadratic-potential loss against a randomly drawn real volume, then one
/// backtracked generator step on adv_weight * (-C(V_f)) + ssl_weight * ssl over every pose parameter.
inline RefineResult online_refine(const Sequence& seq, const RelativeParams& init, const DiscriminatorParams& disc,
                                  const RefineConfig& cfg, std::span<const Volume> real_pool) {
    cfg.validate();
    seq.validate();
    if (init.size() + 1 != seq.size()) throw std::invalid_argument("online_refine: init must have N-1 entries");
    if (real_pool.empty()) throw std::invalid_argument("online_refine: real volume pool is empty");
    for (const Volume& v : real_pool)
        if (!(v.grid.dims == cfg.recon.grid.dims)) throw std::invalid_argument("online_refine: real pool grid mismatch");
    if (disc.weights.size() != disc.spec.length()) throw std::invalid_argument("online_refine: discriminator malformed");

    RefineResult out{init, disc, {}};
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, real_pool.size() - 1);

    ObjectiveSpec gen;
    gen.id = ObjectiveId::generator;
    gen.proportion = cfg.proportion;
    gen.adv_weight = cfg.adv_weight;
    gen.ssl_weight = cfg.ssl_weight;

    const std::size_t n_params = 6 * init.size();
    detail::AdamState adam{std::vector<double>(n_params, 0.0), std::vector<double>(n_params, 0.0), 0};
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-12;

    for (int it = 0; it < cfg.iterations; ++it) {
        RelativeParams& cur = out.refined;

        gen.disc = &out.disc;
        const Volume fake = reconstruct(seq.frames, chain_transforms(cur), cfg.recon);
        const Volume& real = real_pool[pick(rng)];
        RefineLossReport report;
        report.L_d = detail::discriminator_step(out.disc, fake, real, cfg.lr_disc);

        const ObjectiveResult g = objective_gradient(seq.frames, cur, cfg.recon, gen);
        report.adv_term = g.adv_term;
        report.ssl_term = g.ssl_term;
        report.L_g = report.adv_term + report.ssl_term;

        std::vector<double> direction(n_params);
        ++adam.t;
        for (std::size_t i = 0; i < init.size(); ++i)
            for (std::size_t k = 0; k < 6; ++k) {
                const std::size_t q = 6 * i + k;
                const double grad = g.grad[i][k];
                const double lr = k < 3 ? cfg.lr_translation : cfg.lr_rotation;
                if (cfg.optimizer == PoseOptimizer::sgd) {
                    direction[q] = lr * grad;
                    continue;
                }
                adam.m[q] = beta1 * adam.m[q] + (1.0 - beta1) * grad;
                adam.v[q] = beta2 * adam.v[q] + (1.0 - beta2) * grad * grad;
                const double mhat = adam.m[q] / (1.0 - std::pow(beta1, adam.t));
                const double vhat = adam.v[q] / (1.0 - std::pow(beta2, adam.t));
                direction[q] = lr * mhat / (std::sqrt(vhat) + adam_eps);
            }

        int used = -1;
        double scale = 1.0;
        for (int h = 0; h <= cfg.backtracking; ++h, scale *= 0.5) {
            RelativeParams trial = detail::take_step(cur, direction, scale);
            if (objective_value(seq.frames, trial, cfg.recon, gen) < g.loss) {
                cur = std::move(trial);
                used = h;
                break;
            }
        }

        out.history.losses.push_back(report);
        out.history.halvings.push_back(used);
        out.history.param_hashes.push_back(hash_params(cur));
        if (seq.ground_truth) out.history.metrics.push_back(evaluate(*seq.ground_truth, cur, seq.geometry));
    }
    return out;
}

}  // namespace fhr
