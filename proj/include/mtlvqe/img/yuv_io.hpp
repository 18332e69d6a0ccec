// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "mtlvqe/img/image.hpp"

namespace mtlvqe {

/// Raw planar YUV 4:2:0, 8-bit: per frame, the full Y plane row-major, then
/// the half-size U plane, then the half-size V plane. Frame k starts at byte
/// offset k * w * h * 3 / 2. Dimensions are not stored in the file and must
/// be supplied by the caller.

std::size_t yuv420_frame_bytes(int h, int w);

ImageYuv420 read_yuv420(const std::string& path, int h, int w, int frame = 0);
void write_yuv420(const std::string& path, const ImageYuv420& img, bool append = false);

/// Number of whole frames in the file for the given geometry.
int count_yuv420_frames(const std::string& path, int h, int w);

}  // namespace mtlvqe
