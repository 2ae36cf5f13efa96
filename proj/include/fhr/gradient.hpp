// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Hand-written reverse-mode derivatives of scalar objectives built on the soft
// reconstruction, taken with respect to the relative pose parameters.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fhr/geometry.hpp"
#include "fhr/losses.hpp"
#include "fhr/recon.hpp"
#include "fhr/split.hpp"

namespace fhr {

enum class ObjectiveId {
    ssl,          // self-supervised slice consistency
    adversarial,  // -C(V_f)
    generator,    // adv_weight * (-C(V_f)) + ssl_weight * ssl
    voxel_sum,    // sum of valid voxel grays of V_f (probe)
    voxel_probe,  // gray of one voxel of V_f (probe)
};

inline ObjectiveId parse_objective(const std::string& id) {
    if (id == "ssl") return ObjectiveId::ssl;
    if (id == "adv" || id == "adversarial") return ObjectiveId::adversarial;
    if (id == "generator") return ObjectiveId::generator;
    if (id == "voxel_sum") return ObjectiveId::voxel_sum;
    if (id == "voxel_probe") return ObjectiveId::voxel_probe;
    throw std::invalid_argument("unknown objective id: " + id);
}

inline std::string to_string(ObjectiveId id) {
    switch (id) {
        case ObjectiveId::ssl: return "ssl";
        case ObjectiveId::adversarial: return "adv";
        case ObjectiveId::generator: return "generator";
        case ObjectiveId::voxel_sum: return "voxel_sum";
        case ObjectiveId::voxel_probe: return "voxel_probe";
    }
    return "?";
}

struct ObjectiveSpec {
    ObjectiveId id = ObjectiveId::ssl;
    double proportion = 0.5;
    const DiscriminatorParams* disc = nullptr;  // required by adversarial and generator
    double adv_weight = 1.0;
    double ssl_weight = 1.0;
    std::size_t probe_voxel = 0;

    bool needs_ssl() const { return id == ObjectiveId::ssl || id == ObjectiveId::generator; }
    bool needs_fake() const { return id != ObjectiveId::ssl; }
};

using PoseGradient = std::vector<std::array<double, 6>>;

struct ObjectiveResult {
    double loss = 0.0;
    double ssl_term = 0.0;  // unweighted, when evaluated
    double adv_term = 0.0;  // unweighted -C(V_f), when evaluated
    PoseGradient grad;      // one 6-vector per relative entry; empty if not requested
    Volume fake;            // V_f, when evaluated
    /// Sign of every valid slice residual of the ssl term, in evaluation order. The L1 term
    /// has a kink wherever one of these flips.
    std::vector<signed char> residual_signs;
};

namespace detail {

struct TransformGrad {
    Mat3 R{};
    Vec3 t{};
};

/// Accumulates d(sum_i g_i V_i)/d(pose) for every slice of a reconstruction.
inline void reconstruct_backward(std::span<const Frame> frames, std::span<const RigidTransform> poses,
                                 const ReconParams& params, std::span<const double> grad_volume,
                                 std::span<TransformGrad> out) {
    VoxelSlices s;
    for (std::size_t idx = 0; idx < grad_volume.size(); ++idx) {
        const double gv = grad_volume[idx];
        if (gv == 0.0) continue;
        const Vec3 x = params.grid.voxel_center(idx);
        double value = 0.0;
        if (!reconstruct_voxel(x, frames, poses, params, s, value)) continue;
        for (std::size_t n = 0; n < s.slice.size(); ++n) {
            const std::size_t j = s.slice[n];
            const double r = s.recip[n];
            const double dv_dr = params.mode == WeightMode::softmax
                                     ? s.weight[n] * (s.gray[n] - value)
                                     : (s.gray[n] - value) * s.soft[n] * (1.0 + r) / s.scale;
            const double g_dist = gv * dv_dr * (-r * r);
            const double g_gray = gv * s.weight[n];
            const double spacing = frames[j].geometry.spacing;
            const Vec3 g_local{g_gray * s.d_col[n] / spacing, g_gray * s.d_row[n] / spacing,
                               s.proj[n].signed_distance >= 0.0 ? g_dist : -g_dist};
            const RigidTransform& T = poses[j];
            const Vec3 rel = x - T.t;
            for (int b = 0; b < 3; ++b)
                for (int a = 0; a < 3; ++a) out[j].R(b, a) += rel[static_cast<std::size_t>(b)] * g_local[static_cast<std::size_t>(a)];
            out[j].t += -1.0 * (T.R * g_local);
        }
    }
}

/// Backpropagates dL/dA_i of the chained absolute transforms to the relative parameters.
inline PoseGradient chain_backward(std::span<const Pose> rel, std::span<const RigidTransform> abs,
                                   std::vector<TransformGrad> g_abs) {
    PoseGradient grad(rel.size());
    for (std::size_t ii = rel.size(); ii-- > 0;) {
        const Pose& p = rel[ii];
        const RigidTransform M = pose_to_transform(p);
        const RigidTransform& A = abs[ii];
        const TransformGrad& gn = g_abs[ii + 1];
        TransformGrad& gc = g_abs[ii];

        gc.R += gn.R * M.R.transposed();
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) gc.R(a, b) += gn.t[static_cast<std::size_t>(a)] * M.t[static_cast<std::size_t>(b)];
        gc.t += gn.t;

        const Mat3 gRm = A.R.transposed() * gn.R;
        const Vec3 gtm = A.R.transposed() * gn.t;

        const double ca = std::cos(p.rx), sa = std::sin(p.rx);
        const double cb = std::cos(p.ry), sb = std::sin(p.ry);
        const double cc = std::cos(p.rz), sc = std::sin(p.rz);
        const Mat3 Rx = rot_x(p.rx), Ry = rot_y(p.ry), Rz = rot_z(p.rz);
        const Mat3 dRx{{0, 0, 0, 0, -sa, -ca, 0, ca, -sa}};
        const Mat3 dRy{{-sb, 0, cb, 0, 0, 0, -cb, 0, -sb}};
        const Mat3 dRz{{-sc, -cc, 0, cc, -sc, 0, 0, 0, 0}};
        const Mat3 d_rx = Rz * Ry * dRx;
        const Mat3 d_ry = Rz * dRy * Rx;
        const Mat3 d_rz = dRz * Ry * Rx;
        auto contract = [&](const Mat3& d) {
            double s = 0.0;
            for (std::size_t k = 0; k < 9; ++k) s += gRm.m[k] * d.m[k];
            return s;
        };
        grad[ii] = {gtm.x, gtm.y, gtm.z, contract(d_rx), contract(d_ry), contract(d_rz)};
    }
    return grad;
}

template <class T>
std::vector<T> gather(std::span<const T> items, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(items[i]);
    return out;
}

}  // namespace detail

/// Forward evaluation (and optionally the reverse-mode gradient) of
/// rel -> chain -> reconstruct -> {reslice, discriminator} -> scalar.
inline ObjectiveResult evaluate_objective(std::span<const Frame> frames, std::span<const Pose> rel,
                                          const ReconParams& params, const ObjectiveSpec& spec, bool with_gradient) {
    if (frames.size() != rel.size() + 1)
        throw std::invalid_argument("objective: need one relative entry per adjacent frame pair");
    if ((spec.id == ObjectiveId::adversarial || spec.id == ObjectiveId::generator) && spec.disc == nullptr)
        throw std::invalid_argument("objective: discriminator required");
    params.validate();

    const std::vector<RigidTransform> abs = chain_transforms(rel);
    const std::span<const RigidTransform> abs_span(abs);
    ObjectiveResult res;
    std::vector<detail::TransformGrad> g_abs(abs.size());

    const double ssl_scale = spec.id == ObjectiveId::ssl ? 1.0 : spec.ssl_weight;
    const double adv_scale = spec.id == ObjectiveId::adversarial ? 1.0 : spec.adv_weight;

    if (spec.needs_ssl()) {
        const SequenceSplit split = split_sequence(frames.size(), spec.proportion);
        const std::vector<Frame> reco_frames = detail::gather(frames, split.reco);
        const std::vector<RigidTransform> reco_poses = detail::gather(abs_span, split.reco);
        const Volume reco = reconstruct(reco_frames, reco_poses, params);

        std::vector<SliceSample> generated;
        std::vector<Frame> reference;
        for (std::size_t m : split.minus) {
            generated.push_back(extract_slice_masked(reco, abs[m], frames[m].geometry));
            reference.push_back(frames[m]);
        }
        res.ssl_term = ssl_term(generated, reference);
        res.loss += ssl_scale * res.ssl_term;
        for (std::size_t n = 0; n < generated.size(); ++n)
            for (std::size_t p = 0; p < generated[n].valid.size(); ++p) {
                if (!generated[n].valid[p]) continue;
                const double diff = generated[n].frame.values[p] - reference[n].values[p];
                res.residual_signs.push_back(static_cast<signed char>((diff > 0.0) - (diff < 0.0)));
            }

        if (with_gradient) {
            double count = 0.0;
            for (const SliceSample& g : generated) count += static_cast<double>(g.valid_count());
            std::vector<double> g_reco(reco.values.size(), 0.0);
            if (count > 0.0) {
                for (std::size_t n = 0; n < split.minus.size(); ++n) {
                    const std::size_t m = split.minus[n];
                    const FrameGeometry& geom = frames[m].geometry;
                    const RigidTransform& T = abs[m];
                    for (int r = 0; r < geom.height; ++r)
                        for (int c = 0; c < geom.width; ++c) {
                            const auto p = static_cast<std::size_t>(r * geom.width + c);
                            if (!generated[n].valid[p]) continue;
                            const double diff = generated[n].frame.values[p] - reference[n].values[p];
                            if (diff == 0.0) continue;
                            const double adj = ssl_scale * (diff > 0.0 ? 1.0 : -1.0) / count;
                            const Vec3 q = geom.local_point(r, c);
                            Vec3 grad_world;
                            std::array<std::size_t, 8> corners{};
                            std::array<double, 8> weights{};
                            trilinear_sample(reco, apply_transform(T, q), &grad_world, &corners, &weights);
                            for (std::size_t k = 0; k < 8; ++k) g_reco[corners[k]] += adj * weights[k];
                            const Vec3 gw = adj * grad_world;
                            for (int a = 0; a < 3; ++a)
                                for (int b = 0; b < 3; ++b)
                                    g_abs[m].R(a, b) += gw[static_cast<std::size_t>(a)] * q[static_cast<std::size_t>(b)];
                            g_abs[m].t += gw;
                        }
                }
            }
            std::vector<detail::TransformGrad> g_reco_poses(split.reco.size());
            detail::reconstruct_backward(reco_frames, reco_poses, params, g_reco, g_reco_poses);
            for (std::size_t n = 0; n < split.reco.size(); ++n) {
                g_abs[split.reco[n]].R += g_reco_poses[n].R;
                g_abs[split.reco[n]].t += g_reco_poses[n].t;
            }
        }
    }

    if (spec.needs_fake()) {
        res.fake = reconstruct(frames, abs_span, params);
        const Volume& fake = res.fake;
        std::vector<double> g_fake;
        switch (spec.id) {
            case ObjectiveId::adversarial:
            case ObjectiveId::generator: {
                res.adv_term = -disc_score(fake, *spec.disc);
                res.loss += adv_scale * res.adv_term;
                if (with_gradient) {
                    g_fake = disc_score_gradient(fake, *spec.disc);
                    for (double& g : g_fake) g *= -adv_scale;
                }
                break;
            }
            case ObjectiveId::voxel_sum: {
                for (std::size_t i = 0; i < fake.values.size(); ++i)
                    if (fake.valid(i)) res.loss += fake.values[i];
                if (with_gradient) {
                    g_fake.assign(fake.values.size(), 0.0);
                    for (std::size_t i = 0; i < fake.values.size(); ++i) g_fake[i] = fake.valid(i) ? 1.0 : 0.0;
                }
                break;
            }
            case ObjectiveId::voxel_probe: {
                if (spec.probe_voxel >= fake.values.size()) throw std::invalid_argument("objective: probe voxel out of range");
                res.loss += fake.values[spec.probe_voxel];
                if (with_gradient) {
                    g_fake.assign(fake.values.size(), 0.0);
                    g_fake[spec.probe_voxel] = fake.valid(spec.probe_voxel) ? 1.0 : 0.0;
                }
                break;
            }
            case ObjectiveId::ssl: break;
        }
        if (with_gradient) detail::reconstruct_backward(frames, abs_span, params, g_fake, g_abs);
    }

    if (with_gradient) res.grad = detail::chain_backward(rel, abs, std::move(g_abs));
    return res;
}

inline ObjectiveResult objective_gradient(std::span<const Frame> frames, std::span<const Pose> rel,
                                          const ReconParams& params, const ObjectiveSpec& spec) {
    return evaluate_objective(frames, rel, params, spec, true);
}

inline double objective_value(std::span<const Frame> frames, std::span<const Pose> rel, const ReconParams& params,
                              const ObjectiveSpec& spec) {
    return evaluate_objective(frames, rel, params, spec, false).loss;
}

// ---------------------------------------------------------------------------
// Finite-difference verification

struct GradcheckEntry {
    std::size_t entry = 0;
    std::size_t dof = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
    bool checked = false;  // |analytic| above the significance floor
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    /// Components whose difference stencil straddled a kink of the objective.
    std::size_t kink_crossings = 0;

    bool pass(double tol = 1e-3) const { return max_rel_error <= tol; }
};

struct FiniteDifferenceSteps {
    double translation = 1e-4;  // mm
    double rotation = 1e-5;     // rad
    double min_abs = 1e-8;      // components below this analytic magnitude are not compared
};

/// Central differences of loss(rel) compared elementwise with an analytic gradient.
/// Relative error is |a - n| / max(|a|, |n|). `crosses_kink(plus, minus)` reports whether
/// the stencil of a component straddled a non-smooth point; such components are counted.
template <class LossFn, class KinkFn>
GradcheckReport check_gradient(LossFn&& loss, const RelativeParams& at, const PoseGradient& analytic,
                               const FiniteDifferenceSteps& steps, KinkFn&& crosses_kink) {
    if (analytic.size() != at.size()) throw std::invalid_argument("check_gradient: gradient size mismatch");
    GradcheckReport report;
    for (std::size_t i = 0; i < at.size(); ++i)
        for (std::size_t k = 0; k < Pose::kDof; ++k) {
            const double h = k < 3 ? steps.translation : steps.rotation;
            RelativeParams plus = at, minus = at;
            auto a_plus = plus[i].as_array(), a_minus = minus[i].as_array();
            a_plus[k] += h;
            a_minus[k] -= h;
            plus[i] = Pose::from_array(a_plus);
            minus[i] = Pose::from_array(a_minus);
            GradcheckEntry e;
            e.entry = i;
            e.dof = k;
            e.analytic = analytic[i][k];
            e.numeric = (loss(plus) - loss(minus)) / (2.0 * h);
            if (crosses_kink(plus, minus)) ++report.kink_crossings;
            e.checked = std::abs(e.analytic) > steps.min_abs;
            if (e.checked) {
                const double scale = std::max(std::abs(e.analytic), std::abs(e.numeric));
                e.rel_error = std::abs(e.analytic - e.numeric) / scale;
                report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
                ++report.checked;
            }
            report.entries.push_back(e);
        }
    return report;
}

template <class LossFn>
GradcheckReport check_gradient(LossFn&& loss, const RelativeParams& at, const PoseGradient& analytic,
                               const FiniteDifferenceSteps& steps = {}) {
    return check_gradient(std::forward<LossFn>(loss), at, analytic, steps,
                          [](const RelativeParams&, const RelativeParams&) { return false; });
}

}  // namespace fhr
