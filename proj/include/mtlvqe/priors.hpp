// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "mtlvqe/core/tensor.hpp"

namespace mtlvqe {

constexpr int kQpMax = 63;  // VVC quantization parameter ceiling

/// A uniform prior plane valued qp / 63, in [0, 1].
struct QpMap {
    int qp = 0;
    int height = 0;
    int width = 0;

    double value() const { return static_cast<double>(qp) / kQpMax; }

    template <typename Scalar>
    Tensor3<Scalar> plane() const {
        Tensor3<Scalar> t(1, height, width);
        t.data.setConstant(static_cast<Scalar>(value()));
        return t;
    }
};

inline QpMap make_qp_map(int qp, int height, int width) {
    if (qp < 0 || qp > kQpMax)
        throw ConfigError("make_qp_map: qp must be in [0, " + std::to_string(kQpMax) + "], got " +
                          std::to_string(qp));
    if (height <= 0 || width <= 0)
        throw ShapeError("make_qp_map: dimensions must be positive, got " + std::to_string(height) + "x" +
                         std::to_string(width));
    return QpMap{qp, height, width};
}

/// Appends the prior as one extra channel after the image channels.
template <typename Scalar>
Tensor3<Scalar> concat_prior(const Tensor3<Scalar>& image, const QpMap& prior) {
    if (image.h != prior.height || image.w != prior.width)
        throw ShapeError("concat_prior: spatial mismatch, image " + image.shape_str() + " vs prior (" +
                         std::to_string(prior.height) + "," + std::to_string(prior.width) + ")");
    return concat_channels(image, prior.template plane<Scalar>());
}

/// Prior channel replaced by zeros (qp_map disabled); arity unchanged.
template <typename Scalar>
Tensor3<Scalar> concat_zero_prior(const Tensor3<Scalar>& image) {
    return concat_channels(image, Tensor3<Scalar>::zero(1, image.h, image.w));
}

}  // namespace mtlvqe
