// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/img/resize.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mtlvqe/core/error.hpp"

namespace mtlvqe {

namespace {

// Keys cubic with a = -0.5.
double cubic(double x) {
    x = std::abs(x);
    if (x < 1.0) return (1.5 * x - 2.5) * x * x + 1.0;
    if (x < 2.0) return ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0;
    return 0.0;
}

struct AxisFilter {
    // For each output index: first contributing source index and its weights.
    std::vector<int> start;
    std::vector<std::vector<double>> weights;
};

AxisFilter build_filter(int in_n, int out_n) {
    AxisFilter f;
    f.start.resize(out_n);
    f.weights.resize(out_n);
    const double scale = static_cast<double>(in_n) / out_n;
    // Widen the kernel when shrinking so it averages instead of aliasing.
    const double kscale = std::max(scale, 1.0);
    const double support = 2.0 * kscale;
    for (int o = 0; o < out_n; ++o) {
        const double center = (o + 0.5) * scale - 0.5;
        const int lo = static_cast<int>(std::floor(center - support)) + 1;
        const int hi = static_cast<int>(std::floor(center + support));
        f.start[o] = lo;
        auto& w = f.weights[o];
        w.reserve(hi - lo + 1);
        double sum = 0.0;
        for (int i = lo; i <= hi; ++i) {
            const double v = cubic((i - center) / kscale);
            w.push_back(v);
            sum += v;
        }
        if (sum != 0.0)
            for (double& v : w) v /= sum;
    }
    return f;
}

int clamp_idx(int i, int n) { return std::clamp(i, 0, n - 1); }

}  // namespace

Eigen::MatrixXd resize_plane(const Eigen::MatrixXd& src, int out_h, int out_w) {
    if (src.rows() < 1 || src.cols() < 1)
        throw ShapeError("resize_plane: empty source");
    if (out_h < 1 || out_w < 1)
        throw ShapeError("resize_plane: target must be positive, got " + std::to_string(out_h) + "x" +
                         std::to_string(out_w));
    const int in_h = static_cast<int>(src.rows());
    const int in_w = static_cast<int>(src.cols());

    const AxisFilter fx = build_filter(in_w, out_w);
    Eigen::MatrixXd tmp(in_h, out_w);
    for (int o = 0; o < out_w; ++o) {
        const auto& w = fx.weights[o];
        tmp.col(o).setZero();
        for (std::size_t k = 0; k < w.size(); ++k)
            tmp.col(o) += w[k] * src.col(clamp_idx(fx.start[o] + static_cast<int>(k), in_w));
    }

    const AxisFilter fy = build_filter(in_h, out_h);
    Eigen::MatrixXd out(out_h, out_w);
    for (int o = 0; o < out_h; ++o) {
        const auto& w = fy.weights[o];
        out.row(o).setZero();
        for (std::size_t k = 0; k < w.size(); ++k)
            out.row(o) += w[k] * tmp.row(clamp_idx(fy.start[o] + static_cast<int>(k), in_h));
    }
    return out;
}

ImageRgb8 bicubic_resize(const ImageRgb8& src, int out_h, int out_w) {
    ImageRgb8 out(out_h, out_w);
    for (int c = 0; c < 3; ++c) {
        const Plane8& sp = src.plane(c);
        Eigen::MatrixXd m(src.h, src.w);
        for (int y = 0; y < src.h; ++y)
            for (int x = 0; x < src.w; ++x) m(y, x) = sp.at(y, x);
        const Eigen::MatrixXd r = resize_plane(m, out_h, out_w);
        Plane8& op = out.plane(c);
        for (int y = 0; y < out_h; ++y)
            for (int x = 0; x < out_w; ++x) op.at(y, x) = clamp_u8(r(y, x));
    }
    return out;
}

ImageRgb8 bicubic_downscale(const ImageRgb8& src, int r) {
    if (r < 1) throw ShapeError("bicubic_downscale: r must be >= 1, got " + std::to_string(r));
    if (r == 1) return src;
    if (src.h % r != 0 || src.w % r != 0)
        throw ShapeError("bicubic_downscale: " + std::to_string(src.h) + "x" + std::to_string(src.w) +
                         " not divisible by " + std::to_string(r));
    return bicubic_resize(src, src.h / r, src.w / r);
}

ImageRgb8 bicubic_upscale(const ImageRgb8& src, int r) {
    if (r < 1) throw ShapeError("bicubic_upscale: r must be >= 1, got " + std::to_string(r));
    if (r == 1) return src;
    return bicubic_resize(src, src.h * r, src.w * r);
}

}  // namespace mtlvqe
