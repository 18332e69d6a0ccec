// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/eval/bdrate.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "mtlvqe/core/error.hpp"

namespace mtlvqe {

namespace {

// Coefficients c0..c3 of log10(rate) as a polynomial in quality. Exact solve
// for 4 points, least squares beyond that.
Eigen::Vector4d fit_log_rate(const RDCurve& c) {
    const int n = static_cast<int>(c.points.size());
    Eigen::MatrixXd v(n, 4);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        const double q = c.points[i].quality;
        v(i, 0) = 1.0;
        v(i, 1) = q;
        v(i, 2) = q * q;
        v(i, 3) = q * q * q;
        y(i) = std::log10(c.points[i].rate);
    }
    if (n == 4) return v.fullPivLu().solve(y);
    return v.colPivHouseholderQr().solve(y);
}

double integrate(const Eigen::Vector4d& p, double lo, double hi) {
    auto antiderivative = [&](double x) {
        return p(0) * x + p(1) * x * x / 2.0 + p(2) * x * x * x / 3.0 + p(3) * x * x * x * x / 4.0;
    };
    return antiderivative(hi) - antiderivative(lo);
}

// dlogR/dq = p1 + 2 p2 q + 3 p3 q^2 should stay positive across [lo, hi].
bool derivative_positive(const Eigen::Vector4d& p, double lo, double hi) {
    const int kSamples = 64;
    for (int i = 0; i <= kSamples; ++i) {
        const double q = lo + (hi - lo) * i / kSamples;
        if (p(1) + 2.0 * p(2) * q + 3.0 * p(3) * q * q <= 0.0) return false;
    }
    return true;
}

std::pair<double, double> quality_range(const RDCurve& c) {
    double lo = c.points.front().quality, hi = lo;
    for (const auto& pt : c.points) {
        lo = std::min(lo, pt.quality);
        hi = std::max(hi, pt.quality);
    }
    return {lo, hi};
}

}  // namespace

bool RDCurve::validate() const {
    for (const auto& p : points)
        if (p.rate <= 0.0) throw ConfigError("rd curve '" + label + "': rate must be positive");
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i].rate <= points[i - 1].rate)
            throw ConfigError("rd curve '" + label + "': rates must be strictly increasing");
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i].quality < points[i - 1].quality) return false;
    return true;
}

BdRateResult bd_rate(const RDCurve& test, const RDCurve& reference) {
    for (const RDCurve* c : {&test, &reference}) {
        if (c->points.size() < 4)
            throw ConfigError("bd_rate: curve '" + c->label + "' has " +
                              std::to_string(c->points.size()) + " points, need at least 4");
        c->validate();
    }
    const auto [tlo, thi] = quality_range(test);
    const auto [rlo, rhi] = quality_range(reference);
    const double lo = std::max(tlo, rlo);
    const double hi = std::min(thi, rhi);
    if (hi <= lo) throw ConfigError("bd_rate: curves share no quality range");

    const Eigen::Vector4d pt = fit_log_rate(test);
    const Eigen::Vector4d pr = fit_log_rate(reference);
    const double avg_dlog = (integrate(pt, lo, hi) - integrate(pr, lo, hi)) / (hi - lo);

    BdRateResult res;
    res.percent = (std::pow(10.0, avg_dlog) - 1.0) * 100.0;
    res.monotone_fit = derivative_positive(pt, tlo, thi) && derivative_positive(pr, rlo, rhi);
    return res;
}

}  // namespace mtlvqe
