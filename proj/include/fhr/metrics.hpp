// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "fhr/imaging.hpp"

namespace fhr {

/// Raised when a metric has no meaningful value (e.g. a trajectory of zero length).
class UndefinedMetric : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct MetricsReport {
    double final_drift = 0.0;  // mm
    double fdr = 0.0;          // %
    double adr = 0.0;          // %
    double md = 0.0;           // mm
    double sd = 0.0;           // mm
    double hd = 0.0;           // mm
};

/// Distance between frame centres under the ground-truth and estimated chains; drift of frame 1 is 0.
inline std::vector<double> drift_per_frame(std::span<const Pose> gt, std::span<const Pose> est,
                                           const FrameGeometry& = {}) {
    if (gt.size() != est.size()) throw std::invalid_argument("drift: length mismatch");
    const std::vector<Vec3> a = frame_centers(gt);
    const std::vector<Vec3> b = frame_centers(est);
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = distance(a[i], b[i]);
    return d;
}

/// Symmetric Hausdorff distance between two point sets.
inline double hausdorff(std::span<const Vec3> a, std::span<const Vec3> b) {
    auto directed = [](std::span<const Vec3> from, std::span<const Vec3> to) {
        double worst = 0.0;
        for (const Vec3& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : to) {
                best = std::min(best, distance(p, q));
                if (best <= worst) break;  // cannot raise the supremum any more
            }
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

inline MetricsReport evaluate(std::span<const Pose> gt, std::span<const Pose> est, const FrameGeometry& g = {}) {
    if (gt.size() != est.size()) throw std::invalid_argument("evaluate: length mismatch");
    if (gt.empty()) throw std::invalid_argument("evaluate: need at least two frames");
    const std::vector<Vec3> cg = frame_centers(gt);
    const std::vector<Vec3> ce = frame_centers(est);
    const std::vector<double> drift = drift_per_frame(gt, est, g);

    std::vector<double> arc(cg.size(), 0.0);
    for (std::size_t i = 1; i < cg.size(); ++i) arc[i] = arc[i - 1] + distance(cg[i - 1], cg[i]);
    if (!(arc.back() > 0.0)) throw UndefinedMetric("evaluate: ground-truth trajectory has zero length");

    MetricsReport r;
    r.final_drift = drift.back();
    r.fdr = 100.0 * r.final_drift / arc.back();
    double ratio_sum = 0.0;
    std::size_t ratio_count = 0;
    for (std::size_t i = 1; i < drift.size(); ++i) {
        if (arc[i] > 0.0) {
            ratio_sum += drift[i] / arc[i];
            ++ratio_count;
        }
    }
    r.adr = ratio_count ? 100.0 * ratio_sum / static_cast<double>(ratio_count) : 0.0;
    for (double d : drift) {
        r.md = std::max(r.md, d);
        r.sd += d;
    }
    r.hd = hausdorff(cg, ce);
    return r;
}

}  // namespace fhr
