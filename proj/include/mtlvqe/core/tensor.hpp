// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>

#include "mtlvqe/core/error.hpp"

namespace mtlvqe {

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense (channels, height, width) feature map. Storage is channel-major:
/// row c of `data` is the c-th plane in row-major (h, w) order, so the
/// underlying buffer matches a flat C*H*W array.
template <typename Scalar>
struct Tensor3 {
    int c = 0;
    int h = 0;
    int w = 0;
    RowMat<Scalar> data;  // (c, h*w)

    Tensor3() = default;
    Tensor3(int c_, int h_, int w_)
        : c(checked_dim(c_, h_, w_)), h(h_), w(w_), data(c_, static_cast<Eigen::Index>(h_) * w_) {}

    static Tensor3 zero(int c, int h, int w) {
        Tensor3 t(c, h, w);
        t.data.setZero();
        return t;
    }

    Eigen::Index size() const { return data.size(); }

    Scalar& at(int ci, int hi, int wi) { return data(ci, static_cast<Eigen::Index>(hi) * w + wi); }
    Scalar at(int ci, int hi, int wi) const { return data(ci, static_cast<Eigen::Index>(hi) * w + wi); }

    bool same_shape(const Tensor3& o) const { return c == o.c && h == o.h && w == o.w; }

    std::string shape_str() const {
        return "(" + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
    }

  private:
    static int checked_dim(int c_, int h_, int w_) {
        if (c_ <= 0 || h_ <= 0 || w_ <= 0)
            throw ShapeError("Tensor3: dimensions must be positive, got (" + std::to_string(c_) + "," +
                             std::to_string(h_) + "," + std::to_string(w_) + ")");
        return c_;
    }
};

using Tensor3f = Tensor3<float>;
using Tensor3d = Tensor3<double>;

/// Rearranges r^2 channel groups into an r-times upscaled spatial grid:
/// out[c][h][w] = in[c*r^2 + (h%r)*r + (w%r)][h/r][w/r].
template <typename Scalar>
Tensor3<Scalar> pixel_shuffle(const Tensor3<Scalar>& x, int r) {
    if (r < 1) throw ShapeError("pixel_shuffle: r must be >= 1, got " + std::to_string(r));
    if (x.c % (r * r) != 0)
        throw ShapeError("pixel_shuffle: channels " + std::to_string(x.c) + " not divisible by r^2 = " +
                         std::to_string(r * r));
    const int oc = x.c / (r * r);
    Tensor3<Scalar> out(oc, x.h * r, x.w * r);
    for (int c = 0; c < oc; ++c) {
        for (int dy = 0; dy < r; ++dy) {
            for (int dx = 0; dx < r; ++dx) {
                const int src_c = c * r * r + dy * r + dx;
                for (int y = 0; y < x.h; ++y) {
                    const Scalar* src = x.data.row(src_c).data() + static_cast<Eigen::Index>(y) * x.w;
                    Scalar* dst = out.data.row(c).data() + static_cast<Eigen::Index>(y * r + dy) * out.w + dx;
                    for (int xx = 0; xx < x.w; ++xx) dst[static_cast<Eigen::Index>(xx) * r] = src[xx];
                }
            }
        }
    }
    return out;
}

/// Exact inverse of pixel_shuffle.
template <typename Scalar>
Tensor3<Scalar> pixel_unshuffle(const Tensor3<Scalar>& x, int r) {
    if (r < 1) throw ShapeError("pixel_unshuffle: r must be >= 1, got " + std::to_string(r));
    if (x.h % r != 0 || x.w % r != 0)
        throw ShapeError("pixel_unshuffle: spatial dims " + x.shape_str() + " not divisible by r = " +
                         std::to_string(r));
    Tensor3<Scalar> out(x.c * r * r, x.h / r, x.w / r);
    for (int c = 0; c < x.c; ++c) {
        for (int dy = 0; dy < r; ++dy) {
            for (int dx = 0; dx < r; ++dx) {
                const int dst_c = c * r * r + dy * r + dx;
                for (int y = 0; y < out.h; ++y) {
                    const Scalar* src = x.data.row(c).data() + static_cast<Eigen::Index>(y * r + dy) * x.w + dx;
                    Scalar* dst = out.data.row(dst_c).data() + static_cast<Eigen::Index>(y) * out.w;
                    for (int xx = 0; xx < out.w; ++xx) dst[xx] = src[static_cast<Eigen::Index>(xx) * r];
                }
            }
        }
    }
    return out;
}

/// Stacks `b` below the channels of `a`. Spatial dims must match.
template <typename Scalar>
Tensor3<Scalar> concat_channels(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b) {
    if (a.h != b.h || a.w != b.w)
        throw ShapeError("concat_channels: spatial mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor3<Scalar> out(a.c + b.c, a.h, a.w);
    out.data.topRows(a.c) = a.data;
    out.data.bottomRows(b.c) = b.data;
    return out;
}

/// Takes the first `c` channels of `x`.
template <typename Scalar>
Tensor3<Scalar> head_channels(const Tensor3<Scalar>& x, int c) {
    if (c <= 0 || c > x.c) throw ShapeError("head_channels: invalid channel count " + std::to_string(c));
    Tensor3<Scalar> out(c, x.h, x.w);
    out.data = x.data.topRows(c);
    return out;
}

template <typename From, typename To>
Tensor3<To> cast_tensor(const Tensor3<From>& x) {
    Tensor3<To> out(x.c, x.h, x.w);
    out.data = x.data.template cast<To>();
    return out;
}

}  // namespace mtlvqe
