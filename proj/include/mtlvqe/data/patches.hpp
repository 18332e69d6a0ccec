// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "mtlvqe/img/image.hpp"

namespace mtlvqe {

/// One training sample loaded into memory: clean source, its bicubic
/// downscale, and the decoded (degraded) downscale.
struct SampleImages {
    ImageRgb8 hr;
    ImageRgb8 lr;
    ImageRgb8 lr_decoded;
};

/// Co-located crops. Offsets are in lr coordinates; the hr crop starts at
/// (r*y, r*x) and spans r*patch pixels.
struct PatchTriple {
    ImageRgb8 hr;
    ImageRgb8 lr;
    ImageRgb8 lr_decoded;
    int y = 0;
    int x = 0;
};

ImageRgb8 crop(const ImageRgb8& img, int y, int x, int h, int w);

/// `count` uniformly random co-located crops, deterministic under seed.
std::vector<PatchTriple> extract_patches(const SampleImages& s, int r, int patch, int count,
                                         std::uint64_t seed);

/// Exhaustive non-overlapping tiling (partial edge tiles dropped).
std::vector<PatchTriple> extract_patch_grid(const SampleImages& s, int r, int patch);

}  // namespace mtlvqe
