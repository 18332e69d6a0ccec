// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>

#include "mtlvqe/img/image.hpp"

namespace mtlvqe {

/// Identical inputs have zero MSE; PSNR reports +infinity for that case.
inline constexpr double kPsnrExact = std::numeric_limits<double>::infinity();

/// 10*log10(255^2 / MSE) over 8-bit codes.
double psnr_plane(const Plane8& a, const Plane8& b);

/// PSNR over BT.709 limited-range luma.
double psnr_luma(const ImageRgb8& a, const ImageRgb8& b);

/// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01,
/// K2=0.03, L=255, evaluated on fully valid windows only.
double ssim_plane(const Plane8& a, const Plane8& b);
double ssim_luma(const ImageRgb8& a, const ImageRgb8& b);

struct DeltaMetrics {
    double psnr = 0.0;  // metric(processed, original)
    double ssim = 0.0;
    double d_psnr = 0.0;  // minus metric(anchor, original)
    double d_ssim = 0.0;
};

/// Gain of `processed` over `anchor`, both judged against `original`.
DeltaMetrics delta_metrics(const ImageRgb8& processed, const ImageRgb8& anchor, const ImageRgb8& original);

}  // namespace mtlvqe
