// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <vector>

#include "mtlvqe/net/model.hpp"
#include "mtlvqe/train/schedule.hpp"

namespace mtlvqe {

/// Plain ADAM with bias correction. Moment tensors are aligned with
/// Model::params() order, like GradStore.
template <typename Scalar>
struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long long t = 0;
    std::vector<RowMat<Scalar>> m, v;

    explicit Adam(const OptimizerConfig& cfg = {})
        : beta1(cfg.beta1), beta2(cfg.beta2), epsilon(cfg.epsilon) {}

    void attach(const Model<Scalar>& model) {
        t = 0;
        m.clear();
        v.clear();
        for (const auto& p : model.params()) {
            m.push_back(RowMat<Scalar>::Zero(p.tensor->rows(), p.tensor->cols()));
            v.push_back(RowMat<Scalar>::Zero(p.tensor->rows(), p.tensor->cols()));
        }
    }

    bool attached_to(const Model<Scalar>& model) const { return m.size() == model.params().size(); }

    /// One update; `grads` must hold d(loss)/d(param) (already mean-reduced
    /// over the batch).
    void step(Model<Scalar>& model, const GradStore<Scalar>& grads, double lr) {
        if (!attached_to(model)) throw ConfigError("adam: not attached to this model");
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        const auto& params = model.params();
        for (std::size_t i = 0; i < params.size(); ++i) {
            const RowMat<Scalar>& g = grads.g[i];
            m[i] = Scalar(beta1) * m[i] + Scalar(1.0 - beta1) * g;
            v[i] = Scalar(beta2) * v[i] + Scalar(1.0 - beta2) * g.cwiseProduct(g);
            RowMat<Scalar> mhat = m[i] / Scalar(bc1);
            RowMat<Scalar> vhat = v[i] / Scalar(bc2);
            params[i].tensor->array() -=
                Scalar(lr) * mhat.array() / (vhat.array().sqrt() + Scalar(epsilon));
        }
    }
};

}  // namespace mtlvqe
