// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

#include "mtlvqe/img/image.hpp"
#include "mtlvqe/net/model.hpp"

namespace mtlvqe {

struct FeatureMap {
    std::string layer;
    Eigen::MatrixXd mean;  // channel-wise average, raw (unnormalized)
};

/// Channel-wise mean activation at each requested tap. Layer names follow
/// Model::tap_names(): symbolic ("conv_in", "rb_3", "sr_out", ...) or
/// positional ("conv_7").
template <typename Scalar>
std::vector<FeatureMap> average_feature_maps(const Model<Scalar>& model, const Tensor3<Scalar>& input,
                                             const std::vector<std::string>& layers) {
    const auto valid = model.tap_names();
    for (const auto& l : layers) {
        if (std::find(valid.begin(), valid.end(), l) == valid.end()) {
            std::string msg = "unknown layer '" + l + "'; valid layers:";
            for (const auto& v : valid) msg += " " + v;
            throw ConfigError(msg);
        }
    }
    TapRecorder<Scalar> rec;
    rec.wanted.insert(layers.begin(), layers.end());
    Tensor3<Scalar> y = model.forward_shared(input, nullptr, &rec);
    if (model.config().head_sr) model.forward_sr(y, nullptr, &rec);
    if (model.config().head_qe) model.forward_qe(y, nullptr, &rec);

    std::vector<FeatureMap> out;
    out.reserve(layers.size());
    for (const auto& l : layers) {
        const Tensor3<Scalar>& t = rec.taps.at(l);
        FeatureMap fm;
        fm.layer = l;
        fm.mean.resize(t.h, t.w);
        for (int yy = 0; yy < t.h; ++yy)
            for (int xx = 0; xx < t.w; ++xx) {
                double acc = 0.0;
                for (int c = 0; c < t.c; ++c) acc += static_cast<double>(t.at(c, yy, xx));
                fm.mean(yy, xx) = acc / t.c;
            }
        out.push_back(std::move(fm));
    }
    return out;
}

/// Min-max normalization to display codes; a constant map becomes zeros.
inline Plane8 normalize_to_plane(const Eigen::MatrixXd& m) {
    Plane8 p(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
    const double lo = m.minCoeff();
    const double hi = m.maxCoeff();
    if (hi <= lo) return p;
    for (int y = 0; y < p.h; ++y)
        for (int x = 0; x < p.w; ++x) p.at(y, x) = clamp_u8(255.0 * (m(y, x) - lo) / (hi - lo));
    return p;
}

}  // namespace mtlvqe
