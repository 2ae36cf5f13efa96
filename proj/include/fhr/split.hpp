// Copyright 2026 The fhr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace fhr {

struct SequenceSplit {
    std::vector<std::size_t> reco;   // frames used to reconstruct
    std::vector<std::size_t> minus;  // held-out frames resliced from that reconstruction
};

/// Uniform interleave: frame i is kept for reconstruction iff floor(i*p) > floor((i-1)*p);
/// frame 0 is always kept.
inline SequenceSplit split_sequence(std::size_t n, double proportion) {
    if (n < 4) throw std::invalid_argument("split_sequence: need at least 4 frames");
    if (!(proportion > 0.0 && proportion < 1.0)) throw std::invalid_argument("split_sequence: proportion must be in (0,1)");
    SequenceSplit s;
    s.reco.push_back(0);
    for (std::size_t i = 1; i < n; ++i) {
        const double cur = std::floor(static_cast<double>(i) * proportion);
        const double prev = std::floor(static_cast<double>(i - 1) * proportion);
        (cur > prev ? s.reco : s.minus).push_back(i);
    }
    if (s.minus.empty()) throw std::invalid_argument("split_sequence: no held-out frames");
    return s;
}

}  // namespace fhr
