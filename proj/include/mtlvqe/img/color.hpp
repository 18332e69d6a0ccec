// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mtlvqe/img/image.hpp"

namespace mtlvqe {

/// BT.709 limited range. Luma spans [16, 235], chroma [16, 240] around 128.
/// Chroma is averaged over each 2x2 block before quantization; dimensions
/// must therefore be even.
ImageYuv420 rgb_to_yuv420(const ImageRgb8& rgb);

/// Inverse of rgb_to_yuv420 with nearest-neighbor chroma upsampling.
ImageRgb8 yuv420_to_rgb(const ImageYuv420& yuv);

/// Full-resolution BT.709 limited-range luma of an RGB image. Matches the
/// Y plane produced by rgb_to_yuv420.
Plane8 luma709(const ImageRgb8& rgb);

}  // namespace mtlvqe
