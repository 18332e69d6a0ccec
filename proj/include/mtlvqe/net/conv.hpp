// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <string>

#include "mtlvqe/core/tensor.hpp"

namespace mtlvqe {

/// Square-kernel, stride-1, zero-padded "same" convolution. The weight is
/// kept in GEMM form: (out_ch, in_ch * k * k), bias as a (1, out_ch) row.
template <typename Scalar>
struct Conv2d {
    int in_ch = 0;
    int out_ch = 0;
    int ksize = 3;
    RowMat<Scalar> weight;  // (out_ch, in_ch*k*k)
    RowMat<Scalar> bias;    // (1, out_ch)

    Conv2d() = default;
    Conv2d(int in_c, int out_c, int k)
        : in_ch(in_c), out_ch(out_c), ksize(k),
          weight(RowMat<Scalar>::Zero(out_c, static_cast<Eigen::Index>(in_c) * k * k)),
          bias(RowMat<Scalar>::Zero(1, out_c)) {}

    Eigen::Index parameter_count() const { return weight.size() + bias.size(); }
};

/// Unrolls k*k zero-padded neighborhoods of x into a (in_ch*k*k, h*w) matrix
/// so that convolution becomes a single GEMM.
template <typename Scalar>
RowMat<Scalar> im2col(const Tensor3<Scalar>& x, int k) {
    const int pad = k / 2;
    const Eigen::Index npix = static_cast<Eigen::Index>(x.h) * x.w;
    RowMat<Scalar> cols(static_cast<Eigen::Index>(x.c) * k * k, npix);
    for (int c = 0; c < x.c; ++c) {
        const Scalar* plane = x.data.row(c).data();
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                Scalar* dst = cols.row((static_cast<Eigen::Index>(c) * k + ky) * k + kx).data();
                const int dy = ky - pad;
                const int dx = kx - pad;
                for (int y = 0; y < x.h; ++y) {
                    const int sy = y + dy;
                    Scalar* drow = dst + static_cast<Eigen::Index>(y) * x.w;
                    if (sy < 0 || sy >= x.h) {
                        for (int xx = 0; xx < x.w; ++xx) drow[xx] = Scalar(0);
                        continue;
                    }
                    const Scalar* srow = plane + static_cast<Eigen::Index>(sy) * x.w;
                    for (int xx = 0; xx < x.w; ++xx) {
                        const int sx = xx + dx;
                        drow[xx] = (sx < 0 || sx >= x.w) ? Scalar(0) : srow[sx];
                    }
                }
            }
        }
    }
    return cols;
}

/// Adjoint of im2col: folds a (in_ch*k*k, h*w) gradient back onto an
/// (in_ch, h, w) tensor, accumulating overlapping taps.
template <typename Scalar>
Tensor3<Scalar> col2im(const RowMat<Scalar>& cols, int in_ch, int h, int w, int k) {
    const int pad = k / 2;
    Tensor3<Scalar> out = Tensor3<Scalar>::zero(in_ch, h, w);
    for (int c = 0; c < in_ch; ++c) {
        Scalar* plane = out.data.row(c).data();
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const Scalar* src = cols.row((static_cast<Eigen::Index>(c) * k + ky) * k + kx).data();
                const int dy = ky - pad;
                const int dx = kx - pad;
                for (int y = 0; y < h; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) continue;
                    const Scalar* srow = src + static_cast<Eigen::Index>(y) * w;
                    Scalar* drow = plane + static_cast<Eigen::Index>(sy) * w;
                    for (int xx = 0; xx < w; ++xx) {
                        const int sx = xx + dx;
                        if (sx < 0 || sx >= w) continue;
                        drow[sx] += srow[xx];
                    }
                }
            }
        }
    }
    return out;
}

template <typename Scalar>
Tensor3<Scalar> conv2d_forward(const Conv2d<Scalar>& conv, const Tensor3<Scalar>& x) {
    if (x.c != conv.in_ch)
        throw ShapeError("conv2d: expected " + std::to_string(conv.in_ch) + " input channels, got " +
                         std::to_string(x.c));
    const RowMat<Scalar> cols = im2col(x, conv.ksize);
    Tensor3<Scalar> out(conv.out_ch, x.h, x.w);
    out.data.noalias() = conv.weight * cols;
    out.data.colwise() += conv.bias.transpose().col(0);
    return out;
}

/// Backward pass of conv2d_forward. Accumulates dW/db into grad_w/grad_b
/// (callers zero them per batch) and returns dX unless skip_input_grad.
template <typename Scalar>
Tensor3<Scalar> conv2d_backward(const Conv2d<Scalar>& conv, const Tensor3<Scalar>& x,
                                const Tensor3<Scalar>& grad_out, RowMat<Scalar>& grad_w,
                                RowMat<Scalar>& grad_b, bool skip_input_grad = false) {
    const RowMat<Scalar> cols = im2col(x, conv.ksize);
    grad_w.noalias() += grad_out.data * cols.transpose();
    grad_b.row(0) += grad_out.data.rowwise().sum().transpose();
    if (skip_input_grad) return Tensor3<Scalar>();
    RowMat<Scalar> dcols(cols.rows(), cols.cols());
    dcols.noalias() = conv.weight.transpose() * grad_out.data;
    return col2im(dcols, conv.in_ch, x.h, x.w, conv.ksize);
}

template <typename Scalar>
Tensor3<Scalar> relu(const Tensor3<Scalar>& x) {
    Tensor3<Scalar> out(x.c, x.h, x.w);
    out.data = x.data.cwiseMax(Scalar(0));
    return out;
}

/// dX of relu given the activated output (out > 0 iff pre-activation > 0).
template <typename Scalar>
Tensor3<Scalar> relu_backward(const Tensor3<Scalar>& activated, const Tensor3<Scalar>& grad_out) {
    Tensor3<Scalar> out(grad_out.c, grad_out.h, grad_out.w);
    out.data = (activated.data.array() > Scalar(0)).template cast<Scalar>() * grad_out.data.array();
    return out;
}

}  // namespace mtlvqe
