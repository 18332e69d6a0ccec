// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mtlvqe/loss.hpp"
#include "mtlvqe/priors.hpp"
#include "support/gradcheck.hpp"
#include "support/testutil.hpp"

using namespace mtlvqe;

TEST_CASE("qp map normalizes against the codec ceiling of 63") {
    CHECK(make_qp_map(0, 4, 4).value() == 0.0);
    CHECK(make_qp_map(63, 4, 4).value() == 1.0);
    CHECK(make_qp_map(22, 4, 4).value() == doctest::Approx(22.0 / 63.0).epsilon(1e-12));
    CHECK(make_qp_map(37, 4, 4).value() == doctest::Approx(37.0 / 63.0).epsilon(1e-12));
    double prev = -1.0;
    for (int qp = 0; qp <= 63; ++qp) {
        const double v = make_qp_map(qp, 2, 2).value();
        CHECK(v > prev);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        prev = v;
    }
}

TEST_CASE("qp map plane is constant and matches the scalar value") {
    QpMap m = make_qp_map(30, 5, 7);
    Tensor3f plane = m.plane<float>();
    CHECK(plane.c == 1);
    CHECK(plane.h == 5);
    CHECK(plane.w == 7);
    CHECK(plane.data.minCoeff() == plane.data.maxCoeff());
    CHECK(plane.at(0, 0, 0) == doctest::Approx(30.0 / 63.0).epsilon(1e-6));
}

TEST_CASE("qp map rejects out-of-range qp and bad shapes") {
    CHECK_THROWS_AS(make_qp_map(-1, 4, 4), ConfigError);
    CHECK_THROWS_AS(make_qp_map(64, 4, 4), ConfigError);
    CHECK_THROWS_AS(make_qp_map(22, 0, 4), ShapeError);
    CHECK_THROWS_AS(make_qp_map(22, 4, -1), ShapeError);
}

TEST_CASE("concat_prior appends exactly one channel, preserving image bits") {
    Tensor3f img = testutil::random_tensor3f(3, 6, 4, 11);
    QpMap m = make_qp_map(45, 6, 4);
    Tensor3f out = concat_prior(img, m);
    CHECK(out.c == 4);
    CHECK(out.h == 6);
    CHECK(out.w == 4);
    for (int ch = 0; ch < 3; ++ch) CHECK((out.data.row(ch) - img.data.row(ch)).cwiseAbs().maxCoeff() == 0.0f);
    CHECK(out.data.row(3).minCoeff() == out.data.row(3).maxCoeff());
    CHECK(out.data(3, 0) == doctest::Approx(45.0f / 63.0f));
}

TEST_CASE("concat_prior rejects spatial mismatch") {
    Tensor3f img = testutil::random_tensor3f(3, 6, 4, 11);
    CHECK_THROWS_AS(concat_prior(img, make_qp_map(45, 4, 6)), ShapeError);
}

TEST_CASE("zero prior channel equals a qp=0 map") {
    Tensor3f img = testutil::random_tensor3f(3, 5, 5, 12);
    Tensor3f a = concat_zero_prior(img);
    Tensor3f b = concat_prior(img, make_qp_map(0, 5, 5));
    CHECK((a.data - b.data).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("l1 loss basics") {
    Tensor3d a = testutil::random_tensor3d(2, 3, 3, 13);
    CHECK(l1_loss(a, a) == 0.0);
    Tensor3d b = a;
    b.data.array() += 0.25;
    CHECK(l1_loss(a, b) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(l1_loss(a, b) == l1_loss(b, a));
    Tensor3d bad = testutil::random_tensor3d(2, 3, 4, 13);
    CHECK_THROWS_AS(l1_loss(a, bad), ShapeError);
}

TEST_CASE("l1 loss matches a brute-force loop oracle") {
    Tensor3d a = testutil::random_tensor3d(3, 7, 5, 14);
    Tensor3d b = testutil::random_tensor3d(3, 7, 5, 15);
    double acc = 0.0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 7; ++y)
            for (int x = 0; x < 5; ++x) acc += std::abs(a.at(c, y, x) - b.at(c, y, x));
    acc /= (3.0 * 7.0 * 5.0);
    CHECK(l1_loss(a, b) == doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("l1 gradient is the elementwise sign over n") {
    Tensor3d a(1, 2, 2);
    a.data << 1.0, -2.0, 0.5, 0.0;
    Tensor3d b(1, 2, 2);
    b.data << 0.0, 0.0, 0.5, 1.0;
    Tensor3d g = l1_loss_grad(a, b);
    CHECK(g.at(0, 0, 0) == doctest::Approx(0.25));
    CHECK(g.at(0, 0, 1) == doctest::Approx(-0.25));
    CHECK(g.at(0, 1, 0) == 0.0);  // sign(0) = 0
    CHECK(g.at(0, 1, 1) == doctest::Approx(-0.25));
}

TEST_CASE("mtl loss blends the task losses") {
    LossBreakdown lb = mtl_loss(1.0, 2.0, 0.9);
    CHECK(lb.loss_mtl == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(mtl_loss(1.0, 2.0, 1.0).loss_mtl == doctest::Approx(1.0));
    CHECK(mtl_loss(1.0, 2.0, 0.0).loss_mtl == doctest::Approx(2.0));
    CHECK_THROWS_AS(mtl_loss(1.0, 2.0, 1.5), ConfigError);
    CHECK_THROWS_AS(mtl_loss(1.0, 2.0, -0.1), ConfigError);
    CHECK_THROWS_AS(mtl_loss(-1.0, 2.0, 0.5), ConfigError);
}

TEST_CASE("effective alpha collapses for single-head configs") {
    NetworkConfig c;
    c.head_sr = true;
    c.head_qe = false;
    CHECK(c.effective_alpha() == 1.0);
    c.head_sr = false;
    c.head_qe = true;
    CHECK(c.effective_alpha() == 0.0);
    c.head_sr = true;
    c.alpha = 0.37;
    CHECK(c.effective_alpha() == 0.37);
}

namespace {

NetworkConfig tiny_cfg(int B, int w, int r, bool sr, bool qe, int in = 4, int out = 3) {
    NetworkConfig c;
    c.num_blocks = B;
    c.trunk_width = w;
    c.scale_factor = r;
    c.in_channels = in;
    c.out_channels = out;
    c.head_sr = sr;
    c.head_qe = qe;
    return c;
}

// Shift a model output by a constant comfortably larger than any finite
// difference step, so |pred - target| never changes sign during the check.
Tensor3d offset_target(const Tensor3d& pred, double lo, double hi, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(lo, hi);
    std::bernoulli_distribution flip(0.5);
    Tensor3d t = pred;
    for (Eigen::Index i = 0; i < t.data.size(); ++i)
        t.data.data()[i] += flip(rng) ? mag(rng) : -mag(rng);
    return t;
}

}  // namespace

TEST_CASE("multitask gradient decomposes into alpha-weighted task gradients") {
    Model<double> m(tiny_cfg(1, 6, 2, true, true));
    m.init_weights(21);
    Tensor3d x = testutil::random_tensor3d(4, 6, 6, 22);
    const double alpha = 0.9;

    TrunkCache<double> tc;
    Tensor3d y = m.forward_shared(x, &tc);

    // Per-task gradients computed in isolation.
    SrCache<double> sc;
    Tensor3d pred_sr = m.forward_sr(y, &sc);
    Tensor3d t_sr = offset_target(pred_sr, 0.2, 0.5, 23);
    GradStore<double> g_sr = m.make_grad_store();
    m.backward_shared(tc, m.backward_sr(sc, l1_loss_grad(pred_sr, t_sr), g_sr), g_sr);

    QeCache<double> qc;
    Tensor3d pred_qe = m.forward_qe(y, &qc);
    Tensor3d t_qe = offset_target(pred_qe, 0.2, 0.5, 24);
    GradStore<double> g_qe = m.make_grad_store();
    m.backward_shared(tc, m.backward_qe(qc, l1_loss_grad(pred_qe, t_qe), g_qe), g_qe);

    // Combined gradient from the engine-facing helper.
    GradStore<double> g_mtl = m.make_grad_store();
    LossBreakdown lb = mtl_forward_backward(m, x, &t_sr, &t_qe, alpha, g_mtl);
    CHECK(lb.loss_mtl == doctest::Approx(alpha * lb.loss_sr + (1 - alpha) * lb.loss_qe).epsilon(1e-12));

    for (std::size_t i = 0; i < m.params().size(); ++i) {
        RowMat<double> expect = alpha * g_sr.g[i] + (1.0 - alpha) * g_qe.g[i];
        const double denom = std::max(1e-12, expect.cwiseAbs().maxCoeff());
        CHECK((g_mtl.g[i] - expect).cwiseAbs().maxCoeff() / denom < 1e-12);
    }

    // And both task gradients agree with central differences.
    auto loss_sr_fn = [&]() { return l1_loss(m.forward_sr(m.forward_shared(x)), t_sr); };
    auto rep_sr = testutil::fd_check(m, loss_sr_fn, g_sr, 1e-5, 7);
    CHECK(rep_sr.checked > 100);
    CHECK(rep_sr.max_rel_err < 1e-3);

    auto loss_qe_fn = [&]() { return l1_loss(m.forward_qe(m.forward_shared(x)), t_qe); };
    auto rep_qe = testutil::fd_check(m, loss_qe_fn, g_qe, 1e-5, 7);
    CHECK(rep_qe.max_rel_err < 1e-3);
}

TEST_CASE("alpha=1 training math leaves QE head untouched, alpha=0 leaves SR head untouched") {
    Model<double> m(tiny_cfg(1, 5, 2, true, true));
    m.init_weights(31);
    Tensor3d x = testutil::random_tensor3d(4, 6, 6, 32);
    Tensor3d t_sr(3, 12, 12), t_qe(3, 6, 6);
    t_sr.data.setConstant(0.3);
    t_qe.data.setConstant(0.3);

    GradStore<double> g1 = m.make_grad_store();
    mtl_forward_backward(m, x, &t_sr, &t_qe, 1.0, g1);
    GradStore<double> g0 = m.make_grad_store();
    mtl_forward_backward(m, x, &t_sr, &t_qe, 0.0, g0);
    const auto& params = m.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].group == ParamGroup::HeadQE) CHECK(g1.g[i].cwiseAbs().maxCoeff() == 0.0);
        if (params[i].group == ParamGroup::HeadSR) CHECK(g0.g[i].cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK_THROWS_AS(mtl_forward_backward(m, x, nullptr, &t_qe, 0.5, g1), ConfigError);
    CHECK_THROWS_AS(mtl_forward_backward(m, x, &t_sr, nullptr, 0.5, g1), ConfigError);
}

TEST_CASE("sequential restore chains QE then SR with a re-attached prior") {
    Model<float> qe(tiny_cfg(1, 5, 1, false, true));
    qe.init_weights(41);
    Model<float> sr(tiny_cfg(1, 5, 2, true, false));
    sr.init_weights(42);
    Tensor3f img = testutil::random_tensor3f(3, 8, 6, 43);

    Tensor3f out = sequential_restore(qe, sr, img, 27);
    CHECK(out.c == 3);
    CHECK(out.h == 16);
    CHECK(out.w == 12);

    // Bit-exact against manual chaining.
    QpMap prior = make_qp_map(27, 8, 6);
    Tensor3f enhanced = qe.forward_qe(qe.forward_shared(concat_prior(img, prior)));
    Tensor3f expect = sr.forward_sr(sr.forward_shared(concat_prior(enhanced, prior)));
    CHECK((out.data - expect.data).cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("sequential restore validates channel arity between stages") {
    NetworkConfig qe_cfg = tiny_cfg(0, 4, 1, false, true);
    qe_cfg.out_channels = 2;  // QE emits 2 channels; SR expects 3 + prior
    Model<float> qe(qe_cfg);
    qe.init_weights(44);
    Model<float> sr(tiny_cfg(0, 4, 2, true, false));
    sr.init_weights(45);
    Tensor3f img = testutil::random_tensor3f(3, 4, 4, 46);
    CHECK_THROWS_AS(sequential_restore(qe, sr, img, 27), ShapeError);
}
