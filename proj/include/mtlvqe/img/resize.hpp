// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include "mtlvqe/img/image.hpp"

namespace mtlvqe {

/// Bicubic (Keys, a = -0.5) resampling of one plane in double precision.
/// Sample positions follow src = (dst + 0.5) * in / out - 0.5 with clamped
/// edges; the kernel support is widened by in / out when shrinking so the
/// filter also antialiases.
Eigen::MatrixXd resize_plane(const Eigen::MatrixXd& src, int out_h, int out_w);

/// resize_plane per channel, rounded back to 8-bit codes.
ImageRgb8 bicubic_resize(const ImageRgb8& src, int out_h, int out_w);

/// Convenience wrapper for integer scale factors (r >= 1).
ImageRgb8 bicubic_downscale(const ImageRgb8& src, int r);
ImageRgb8 bicubic_upscale(const ImageRgb8& src, int r);

}  // namespace mtlvqe
