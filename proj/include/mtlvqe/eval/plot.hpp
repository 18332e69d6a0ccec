// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "mtlvqe/img/image.hpp"

namespace mtlvqe {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal dependency-free line plot: axes, ticks with numeric labels, one
/// polyline per series in a fixed palette. Non-finite samples are skipped.
ImageRgb8 render_plot(const std::vector<PlotSeries>& series, const std::string& title, int width = 640,
                      int height = 400);

/// render_plot straight to a .ppm file.
void write_plot(const std::string& path, const std::vector<PlotSeries>& series, const std::string& title,
                int width = 640, int height = 400);

}  // namespace mtlvqe
