// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "fhr/gradient.hpp"
#include "fhr/phantom.hpp"
#include "fhr/scansim.hpp"

namespace fhr {

/// A small seeded problem on which the analytic and finite-difference gradients are compared.
struct ToyInstance {
    std::vector<Frame> frames;
    RelativeParams at;  // evaluation point (noisy estimate)
    ReconParams params;
    DiscriminatorParams disc;
};

struct ToyOptions {
    int min_frames = 5;
    int max_frames = 8;
    int min_grid = 16;
    int max_grid = 24;

    void validate() const {
        if (min_frames < 2 || min_frames > max_frames) throw std::invalid_argument("toy instance: bad frame range");
        if (max_frames > 8) throw std::invalid_argument("toy instance: at most 8 frames");
        if (min_grid < 3 || min_grid > max_grid) throw std::invalid_argument("toy instance: bad grid range");
        if (max_grid > 24) throw std::invalid_argument("toy instance: grid at most 24 per side");
    }
};

/// The target grid has odd dims with voxel centres on integer millimetres while frame
/// pixels sit on half-integers; frames are wide enough to cover the grid laterally.
/// This keeps every sample well clear of interpolation cell boundaries and of the
/// validity edges of both the grid and the frames.
/// `attempt` redraws only the evaluation point (the estimator noise).
inline ToyInstance make_toy_instance(std::uint64_t seed, const ToyOptions& opt = {}, unsigned attempt = 0) {
    opt.validate();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> nframes(opt.min_frames, opt.max_frames);
    int lo = opt.min_grid % 2 ? opt.min_grid : opt.min_grid + 1;
    int hi = opt.max_grid % 2 ? opt.max_grid : opt.max_grid - 1;
    if (lo > hi) throw std::invalid_argument("toy instance: grid range admits no odd size");
    std::uniform_int_distribution<int> ngrid(0, (hi - lo) / 2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    ToyInstance inst;
    const int n = nframes(rng);
    const int dim = lo + 2 * ngrid(rng);
    const double half = 0.5 * (dim - 1);
    // Voxel planes sit half-way between the (integer) frame planes.
    inst.params.grid = Grid{{dim, dim, dim}, {1.0, 1.0, 1.0}, {-half, -half, -half + 0.5}};
    inst.params.mode = seed % 2 ? WeightMode::nearest_emphasis : WeightMode::softmax;

    PhantomSpec ph;
    ph.grid = Grid{{48, 48, 48}, {1.0, 1.0, 1.0}, {-23.5, -23.5, -23.5}};
    ph.background = 0.15;
    ph.sigma = 1.5;
    ph.texture = 0.15;
    ph.ellipsoids.push_back({{2.0 + u(rng), -1.0 + u(rng), 3.0}, {7.0, 5.0, 6.0}, 0.8});
    ph.ellipsoids.push_back({{-5.0, 4.0 + u(rng), 1.0}, {3.0, 3.0, 4.0}, 0.45});
    ph.tubes.push_back({{-12.0, -8.0, -6.0}, {10.0, 9.0, 12.0}, 2.0, 0.95});
    const Volume phantom = generate_phantom(ph, seed);

    const FrameGeometry geom{32, 32, 1.0};
    TrajectorySpec traj;
    traj.kind = TrajectoryKind::sector;
    traj.n_frames = n;
    traj.step = 1.0;
    traj.tilt = 0.002 * u(rng);
    const RelativeParams gt = generate_trajectory(traj);
    const Pose start{0.0, 0.0, -1.5 + 0.5 * u(rng), 0.05 * u(rng), 0.05 * u(rng), 0.05 * u(rng)};
    inst.frames = simulate_scan(phantom, gt, geom, start).frames;

    NoiseModel noise;
    noise.bias = {0.02, -0.02, 0.0, 0.0, 0.0, 0.0};
    noise.sigma = {0.03, 0.03, 0.03, 0.002, 0.002, 0.002};
    noise.seed = (seed ^ 0x9e3779b97f4a7c15ULL) + 0x100000001b3ULL * attempt;
    inst.at = perturb_estimates(gt, noise);

    inst.disc = DiscriminatorParams(FeatureSpec{});
    std::normal_distribution<double> w(0.0, 0.5);
    for (double& x : inst.disc.weights) x = w(rng);
    inst.disc.bias = 0.1;
    return inst;
}

inline GradcheckReport gradcheck_objective(const ToyInstance& inst, ObjectiveId id,
                                           const FiniteDifferenceSteps& steps = {}) {
    ObjectiveSpec spec;
    spec.id = id;
    spec.disc = &inst.disc;
    const ObjectiveResult r = objective_gradient(inst.frames, inst.at, inst.params, spec);
    auto loss = [&](const RelativeParams& rel) { return objective_value(inst.frames, rel, inst.params, spec); };
    auto kink = [&](const RelativeParams& plus, const RelativeParams& minus) {
        if (!spec.needs_ssl()) return false;
        return evaluate_objective(inst.frames, plus, inst.params, spec, false).residual_signs !=
                   r.residual_signs ||
               evaluate_objective(inst.frames, minus, inst.params, spec, false).residual_signs != r.residual_signs;
    };
    return check_gradient(loss, inst.at, r.grad, steps, kink);
}

struct ToyGradcheck {
    ToyInstance instance;
    GradcheckReport ssl;
    GradcheckReport adversarial;
    unsigned attempts = 0;
};

/// Checks both refinement objectives on a seeded toy instance. Evaluation points whose
/// difference stencils straddle an L1 residual kink are redrawn (up to max_attempts).
inline ToyGradcheck gradcheck_toy(std::uint64_t seed, const ToyOptions& opt = {}, unsigned max_attempts = 16,
                                  const FiniteDifferenceSteps& steps = {}) {
    ToyGradcheck out;
    for (unsigned attempt = 0; attempt < max_attempts; ++attempt) {
        out.instance = make_toy_instance(seed, opt, attempt);
        out.attempts = attempt + 1;
        out.ssl = gradcheck_objective(out.instance, ObjectiveId::ssl, steps);
        if (out.ssl.kink_crossings > 0) continue;
        out.adversarial = gradcheck_objective(out.instance, ObjectiveId::adversarial, steps);
        break;
    }
    return out;
}

}  // namespace fhr
