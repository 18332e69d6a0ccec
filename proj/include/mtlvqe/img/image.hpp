// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mtlvqe/core/tensor.hpp"

namespace mtlvqe {

/// One 8-bit plane, row-major.
struct Plane8 {
    int h = 0;
    int w = 0;
    std::vector<std::uint8_t> data;

    Plane8() = default;
    Plane8(int h_, int w_, std::uint8_t fill = 0)
        : h(h_), w(w_), data(static_cast<std::size_t>(check(h_, w_)) * w_, fill) {}

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * w + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
    std::size_t size() const { return data.size(); }

  private:
    static int check(int h_, int w_) {
        if (h_ <= 0 || w_ <= 0)
            throw ShapeError("Plane8: dimensions must be positive, got " + std::to_string(h_) + "x" +
                             std::to_string(w_));
        return h_;
    }
};

/// Planar 8-bit RGB.
struct ImageRgb8 {
    int h = 0;
    int w = 0;
    Plane8 r, g, b;

    ImageRgb8() = default;
    ImageRgb8(int h_, int w_) : h(h_), w(w_), r(h_, w_), g(h_, w_), b(h_, w_) {}

    const Plane8& plane(int i) const { return i == 0 ? r : (i == 1 ? g : b); }
    Plane8& plane(int i) { return i == 0 ? r : (i == 1 ? g : b); }
};

/// Planar 8-bit YCbCr with 4:2:0 chroma subsampling. Luma is full size,
/// chroma planes are half size in each direction (even dimensions only).
struct ImageYuv420 {
    int h = 0;
    int w = 0;
    Plane8 y, u, v;

    ImageYuv420() = default;
    ImageYuv420(int h_, int w_) : h(h_), w(w_), y(h_, w_), u(h_ / 2, w_ / 2), v(h_ / 2, w_ / 2) {
        if (h_ % 2 != 0 || w_ % 2 != 0)
            throw ShapeError("ImageYuv420: dimensions must be even, got " + std::to_string(h_) + "x" +
                             std::to_string(w_));
    }
};

inline std::uint8_t clamp_u8(double v) {
    const long r = std::lround(v);
    return static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
}

/// [0, 255] plane values scaled to a [0, 1] tensor channel stack.
template <typename Scalar>
Tensor3<Scalar> to_tensor(const ImageRgb8& img) {
    Tensor3<Scalar> t(3, img.h, img.w);
    for (int c = 0; c < 3; ++c) {
        const Plane8& p = img.plane(c);
        for (std::size_t i = 0; i < p.size(); ++i)
            t.data(c, static_cast<Eigen::Index>(i)) = static_cast<Scalar>(p.data[i]) / Scalar(255);
    }
    return t;
}

/// Inverse of to_tensor: clamp to [0, 1], scale, round to nearest code.
template <typename Scalar>
ImageRgb8 from_tensor(const Tensor3<Scalar>& t) {
    if (t.c != 3) throw ShapeError("from_tensor: expected 3 channels, got " + std::to_string(t.c));
    ImageRgb8 img(t.h, t.w);
    for (int c = 0; c < 3; ++c) {
        Plane8& p = img.plane(c);
        for (std::size_t i = 0; i < p.size(); ++i)
            p.data[i] = clamp_u8(255.0 * static_cast<double>(t.data(c, static_cast<Eigen::Index>(i))));
    }
    return img;
}

}  // namespace mtlvqe
