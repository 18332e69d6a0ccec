// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <type_traits>

#include "mtlvqe/core/tensor.hpp"
#include "mtlvqe/net/model.hpp"
#include "mtlvqe/priors.hpp"

namespace mtlvqe {

/// Mean absolute elementwise difference.
template <typename Scalar>
double l1_loss(const Tensor3<Scalar>& pred, const Tensor3<Scalar>& target) {
    if (!pred.same_shape(target))
        throw ShapeError("l1_loss: shape mismatch " + pred.shape_str() + " vs " + target.shape_str());
    return (pred.data.template cast<double>() - target.data.template cast<double>()).cwiseAbs().mean();
}

/// d(l1_loss)/d(pred): sign(pred - target) / n, with sign(0) = 0.
template <typename Scalar>
Tensor3<Scalar> l1_loss_grad(const Tensor3<Scalar>& pred, const Tensor3<Scalar>& target) {
    if (!pred.same_shape(target))
        throw ShapeError("l1_loss_grad: shape mismatch " + pred.shape_str() + " vs " + target.shape_str());
    Tensor3<Scalar> g(pred.c, pred.h, pred.w);
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(pred.size());
    g.data = (pred.data - target.data).array().sign() * inv_n;
    return g;
}

struct LossBreakdown {
    double loss_sr = 0.0;
    double loss_qe = 0.0;
    double loss_mtl = 0.0;
    double alpha = 0.0;
};

/// loss_mtl = alpha * loss_sr + (1 - alpha) * loss_qe.
inline LossBreakdown mtl_loss(double loss_sr, double loss_qe, double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw ConfigError("mtl_loss: alpha must be in [0, 1], got " + std::to_string(alpha));
    if (loss_sr < 0.0 || loss_qe < 0.0) throw ConfigError("mtl_loss: losses must be nonnegative");
    return LossBreakdown{loss_sr, loss_qe, alpha * loss_sr + (1.0 - alpha) * loss_qe, alpha};
}

/// One training step's worth of math: forward both weighted heads, accumulate
/// d(loss_mtl)/d(theta) into `gs`, and report the per-task losses. A head is
/// evaluated when the model has it and a target is supplied; it contributes
/// gradients only when its weight is nonzero. The shared trunk is traversed
/// backward once with the summed head gradients.
template <typename Scalar>
LossBreakdown mtl_forward_backward(const Model<Scalar>& model, const Tensor3<Scalar>& x,
                                   std::type_identity_t<const Tensor3<Scalar>*> sr_target,
                                   std::type_identity_t<const Tensor3<Scalar>*> qe_target, double alpha,
                                   GradStore<Scalar>& gs) {
    if (alpha < 0.0 || alpha > 1.0)
        throw ConfigError("mtl_forward_backward: alpha must be in [0, 1], got " + std::to_string(alpha));
    const bool want_sr = model.config().head_sr && sr_target != nullptr;
    const bool want_qe = model.config().head_qe && qe_target != nullptr;
    if (alpha > 0.0 && !want_sr) throw ConfigError("mtl_forward_backward: alpha > 0 needs an SR head and target");
    if (alpha < 1.0 && !want_qe) throw ConfigError("mtl_forward_backward: alpha < 1 needs a QE head and target");

    TrunkCache<Scalar> tc;
    Tensor3<Scalar> y = model.forward_shared(x, &tc);

    double loss_sr = 0.0, loss_qe = 0.0;
    Tensor3<Scalar> gy(y.c, y.h, y.w);
    gy.data.setZero();
    bool any_grad = false;

    if (want_sr) {
        SrCache<Scalar> sc;
        Tensor3<Scalar> pred = model.forward_sr(y, &sc);
        loss_sr = l1_loss(pred, *sr_target);
        if (alpha > 0.0) {
            Tensor3<Scalar> gp = l1_loss_grad(pred, *sr_target);
            gp.data *= static_cast<Scalar>(alpha);
            Tensor3<Scalar> gh = model.backward_sr(sc, gp, gs);
            gy.data += gh.data;
            any_grad = true;
        }
    }
    if (want_qe) {
        QeCache<Scalar> qc;
        Tensor3<Scalar> pred = model.forward_qe(y, &qc);
        loss_qe = l1_loss(pred, *qe_target);
        if (alpha < 1.0) {
            Tensor3<Scalar> gp = l1_loss_grad(pred, *qe_target);
            gp.data *= static_cast<Scalar>(1.0 - alpha);
            Tensor3<Scalar> gh = model.backward_qe(qc, gp, gs);
            gy.data += gh.data;
            any_grad = true;
        }
    }
    if (any_grad) model.backward_shared(tc, gy, gs);
    return mtl_loss(loss_sr, loss_qe, alpha);
}

/// Two-network baseline: enhance at native resolution first, re-attach the
/// same qp prior to the enhanced image, then super-resolve.
template <typename Scalar>
Tensor3<Scalar> sequential_restore(const Model<Scalar>& qe_model, const Model<Scalar>& sr_model,
                                   const Tensor3<Scalar>& image, int qp) {
    const QpMap prior = make_qp_map(qp, image.h, image.w);
    Tensor3<Scalar> y1 = qe_model.forward_shared(concat_prior(image, prior));
    Tensor3<Scalar> enhanced = qe_model.forward_qe(y1);
    if (enhanced.c + 1 != sr_model.config().in_channels)
        throw ShapeError("sequential_restore: QE output (" + std::to_string(enhanced.c) +
                         " channels) + prior does not match SR input arity " +
                         std::to_string(sr_model.config().in_channels));
    Tensor3<Scalar> y2 = sr_model.forward_shared(concat_prior(enhanced, prior));
    return sr_model.forward_sr(y2);
}

}  // namespace mtlvqe
