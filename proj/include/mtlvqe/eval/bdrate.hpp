// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace mtlvqe {

struct RDPoint {
    double rate = 0.0;  // bits or kbps, > 0
    double quality = 0.0;  // dB PSNR or SSIM
};

struct RDCurve {
    std::string label;
    std::vector<RDPoint> points;  // sorted by rate, strictly increasing

    /// Throws on unsorted/nonpositive rates; returns false when quality is
    /// not non-decreasing in rate (caller should warn, not reject).
    bool validate() const;
};

struct BdRateResult {
    double percent = 0.0;   // negative = test needs less rate than reference
    bool monotone_fit = true;  // false when a fitted cubic bends backwards
};

/// Classic cubic-fit rate-quality integration: fit log10(rate) as a cubic in
/// quality per curve, average the difference over the shared quality range,
/// map back through 10^x.
BdRateResult bd_rate(const RDCurve& test, const RDCurve& reference);

}  // namespace mtlvqe
