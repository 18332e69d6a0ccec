// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/eval/metrics.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>

#include "mtlvqe/core/error.hpp"
#include "mtlvqe/img/color.hpp"

namespace mtlvqe {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
constexpr double kC2 = (0.03 * 255) * (0.03 * 255);

void check_dims(const Plane8& a, const Plane8& b, const char* who) {
    if (a.h != b.h || a.w != b.w)
        throw ShapeError(std::string(who) + ": dimension mismatch " + std::to_string(a.h) + "x" +
                         std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" + std::to_string(b.w));
}

std::array<double, kWin> gaussian_taps() {
    std::array<double, kWin> t{};
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        t[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += t[i];
    }
    for (double& v : t) v /= sum;
    return t;
}

Eigen::MatrixXd to_matrix(const Plane8& p) {
    Eigen::MatrixXd m(p.h, p.w);
    for (int y = 0; y < p.h; ++y)
        for (int x = 0; x < p.w; ++x) m(y, x) = p.at(y, x);
    return m;
}

// Valid-mode separable Gaussian filter: output is (h-10, w-10).
Eigen::MatrixXd gauss_valid(const Eigen::MatrixXd& m) {
    static const std::array<double, kWin> taps = gaussian_taps();
    const int oh = static_cast<int>(m.rows()) - kWin + 1;
    const int ow = static_cast<int>(m.cols()) - kWin + 1;
    Eigen::MatrixXd tmp(m.rows(), ow);
    tmp.setZero();
    for (int k = 0; k < kWin; ++k) tmp += taps[k] * m.middleCols(k, ow);
    Eigen::MatrixXd out(oh, ow);
    out.setZero();
    for (int k = 0; k < kWin; ++k) out += taps[k] * tmp.middleRows(k, oh);
    return out;
}

}  // namespace

double psnr_plane(const Plane8& a, const Plane8& b) {
    check_dims(a, b, "psnr");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        sse += d * d;
    }
    if (sse == 0.0) return kPsnrExact;
    const double mse = sse / static_cast<double>(a.size());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double psnr_luma(const ImageRgb8& a, const ImageRgb8& b) { return psnr_plane(luma709(a), luma709(b)); }

double ssim_plane(const Plane8& a, const Plane8& b) {
    check_dims(a, b, "ssim");
    if (a.h < kWin || a.w < kWin)
        throw ShapeError("ssim: image " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                         " smaller than the " + std::to_string(kWin) + "x" + std::to_string(kWin) +
                         " window");
    const Eigen::MatrixXd ma = to_matrix(a);
    const Eigen::MatrixXd mb = to_matrix(b);
    const Eigen::MatrixXd mu_a = gauss_valid(ma);
    const Eigen::MatrixXd mu_b = gauss_valid(mb);
    const Eigen::MatrixXd var_a = gauss_valid(ma.cwiseProduct(ma)) - mu_a.cwiseProduct(mu_a);
    const Eigen::MatrixXd var_b = gauss_valid(mb.cwiseProduct(mb)) - mu_b.cwiseProduct(mu_b);
    const Eigen::MatrixXd cov = gauss_valid(ma.cwiseProduct(mb)) - mu_a.cwiseProduct(mu_b);

    const auto num = (2.0 * mu_a.cwiseProduct(mu_b).array() + kC1) * (2.0 * cov.array() + kC2);
    const auto den = (mu_a.array().square() + mu_b.array().square() + kC1) *
                     (var_a.array() + var_b.array() + kC2);
    return (num / den).mean();
}

double ssim_luma(const ImageRgb8& a, const ImageRgb8& b) { return ssim_plane(luma709(a), luma709(b)); }

DeltaMetrics delta_metrics(const ImageRgb8& processed, const ImageRgb8& anchor,
                           const ImageRgb8& original) {
    DeltaMetrics d;
    d.psnr = psnr_luma(processed, original);
    d.ssim = ssim_luma(processed, original);
    const double anchor_psnr = psnr_luma(anchor, original);
    // Both exact (inf - inf) means no gain, not NaN.
    d.d_psnr = (d.psnr == anchor_psnr) ? 0.0 : d.psnr - anchor_psnr;
    d.d_ssim = d.ssim - ssim_luma(anchor, original);
    return d;
}

}  // namespace mtlvqe
