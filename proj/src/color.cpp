// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/img/color.hpp"

#include <string>

#include "mtlvqe/core/error.hpp"

namespace mtlvqe {

namespace {

constexpr double kKr = 0.2126;
constexpr double kKb = 0.0722;
constexpr double kKg = 1.0 - kKr - kKb;
constexpr double kPbScale = 2.0 * (1.0 - kKb);  // 1.8556
constexpr double kPrScale = 2.0 * (1.0 - kKr);  // 1.5748

double luma_prime(const ImageRgb8& rgb, std::size_t i) {
    return (kKr * rgb.r.data[i] + kKg * rgb.g.data[i] + kKb * rgb.b.data[i]) / 255.0;
}

}  // namespace

ImageYuv420 rgb_to_yuv420(const ImageRgb8& rgb) {
    if (rgb.h % 2 != 0 || rgb.w % 2 != 0)
        throw ShapeError("rgb_to_yuv420: dimensions must be even, got " + std::to_string(rgb.h) + "x" +
                         std::to_string(rgb.w));
    ImageYuv420 out(rgb.h, rgb.w);
    for (int y = 0; y < rgb.h; ++y)
        for (int x = 0; x < rgb.w; ++x)
            out.y.at(y, x) = clamp_u8(16.0 + 219.0 * luma_prime(rgb, static_cast<std::size_t>(y) * rgb.w + x));
    for (int cy = 0; cy < rgb.h / 2; ++cy) {
        for (int cx = 0; cx < rgb.w / 2; ++cx) {
            double pb = 0.0, pr = 0.0;
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const std::size_t i = static_cast<std::size_t>(2 * cy + dy) * rgb.w + (2 * cx + dx);
                    const double yp = luma_prime(rgb, i);
                    pb += (rgb.b.data[i] / 255.0 - yp) / kPbScale;
                    pr += (rgb.r.data[i] / 255.0 - yp) / kPrScale;
                }
            }
            out.u.at(cy, cx) = clamp_u8(128.0 + 224.0 * pb / 4.0);
            out.v.at(cy, cx) = clamp_u8(128.0 + 224.0 * pr / 4.0);
        }
    }
    return out;
}

ImageRgb8 yuv420_to_rgb(const ImageYuv420& yuv) {
    ImageRgb8 out(yuv.h, yuv.w);
    for (int y = 0; y < yuv.h; ++y) {
        for (int x = 0; x < yuv.w; ++x) {
            const double yp = (yuv.y.at(y, x) - 16.0) / 219.0;
            const double pb = (yuv.u.at(y / 2, x / 2) - 128.0) / 224.0;
            const double pr = (yuv.v.at(y / 2, x / 2) - 128.0) / 224.0;
            const double rp = yp + kPrScale * pr;
            const double bp = yp + kPbScale * pb;
            const double gp = (yp - kKr * rp - kKb * bp) / kKg;
            out.r.at(y, x) = clamp_u8(255.0 * rp);
            out.g.at(y, x) = clamp_u8(255.0 * gp);
            out.b.at(y, x) = clamp_u8(255.0 * bp);
        }
    }
    return out;
}

Plane8 luma709(const ImageRgb8& rgb) {
    Plane8 out(rgb.h, rgb.w);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = clamp_u8(16.0 + 219.0 * luma_prime(rgb, i));
    return out;
}

}  // namespace mtlvqe
