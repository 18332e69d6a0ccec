// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/eval/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mtlvqe/core/error.hpp"
#include "mtlvqe/img/ppm.hpp"

namespace mtlvqe {

namespace {

struct Rgb {
    std::uint8_t r, g, b;
};

constexpr Rgb kPalette[] = {{214, 69, 65},  {31, 119, 180}, {44, 160, 44},
                            {148, 103, 189}, {255, 127, 14}, {23, 190, 207}};
constexpr Rgb kInk{40, 40, 40};
constexpr Rgb kGrid{225, 225, 225};

// 3x5 bitmap glyphs for axis labels: digits, minus, dot, 'e'.
const char* glyph(char c) {
    switch (c) {
        case '0': return "111101101101111";
        case '1': return "010110010010111";
        case '2': return "111001111100111";
        case '3': return "111001111001111";
        case '4': return "101101111001001";
        case '5': return "111100111001111";
        case '6': return "111100111101111";
        case '7': return "111001010010010";
        case '8': return "111101111101111";
        case '9': return "111101111001111";
        case '-': return "000000111000000";
        case '.': return "000000000000010";
        case '+': return "000010111010000";
        case 'e': return "011101110100011";
        default: return nullptr;
    }
}

void put(ImageRgb8& img, int y, int x, Rgb c) {
    if (y < 0 || x < 0 || y >= img.h || x >= img.w) return;
    img.r.at(y, x) = c.r;
    img.g.at(y, x) = c.g;
    img.b.at(y, x) = c.b;
}

void draw_text(ImageRgb8& img, int y, int x, const std::string& text, Rgb c) {
    int cx = x;
    for (char ch : text) {
        if (const char* g = glyph(ch)) {
            for (int gy = 0; gy < 5; ++gy)
                for (int gx = 0; gx < 3; ++gx)
                    if (g[gy * 3 + gx] == '1') put(img, y + gy, cx + gx, c);
        }
        cx += 4;
    }
}

void draw_line(ImageRgb8& img, int y0, int x0, int y1, int x1, Rgb c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        put(img, y0, x0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

std::string tick_label(double v) {
    char buf[32];
    if (v != 0.0 && (std::abs(v) >= 1e5 || std::abs(v) < 1e-3))
        std::snprintf(buf, sizeof buf, "%.1e", v);
    else
        std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

ImageRgb8 render_plot(const std::vector<PlotSeries>& series, const std::string& title, int width,
                      int height) {
    if (width < 160 || height < 120) throw ConfigError("render_plot: canvas too small");
    ImageRgb8 img(height, width);
    std::fill(img.r.data.begin(), img.r.data.end(), 255);
    std::fill(img.g.data.begin(), img.g.data.end(), 255);
    std::fill(img.b.data.begin(), img.b.data.end(), 255);

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool any = false;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (!any) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                any = true;
            } else {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
        }
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;

    const int left = 48, right = width - 12, top = 20, bottom = height - 24;
    auto px = [&](double x) {
        return left + static_cast<int>((x - xmin) / (xmax - xmin) * (right - left));
    };
    auto py = [&](double y) {
        return bottom - static_cast<int>((y - ymin) / (ymax - ymin) * (bottom - top));
    };

    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        const int gx = px(fx), gy = py(fy);
        draw_line(img, top, gx, bottom, gx, kGrid);
        draw_line(img, gy, left, gy, right, kGrid);
        draw_text(img, bottom + 6, gx - 8, tick_label(fx), kInk);
        draw_text(img, gy - 2, 4, tick_label(fy), kInk);
    }
    draw_line(img, bottom, left, bottom, right, kInk);
    draw_line(img, top, left, bottom, left, kInk);
    draw_text(img, 8, left, title, kInk);

    int si = 0;
    for (const auto& s : series) {
        const Rgb c = kPalette[si++ % (sizeof kPalette / sizeof kPalette[0])];
        int prev_x = 0, prev_y = 0;
        bool have_prev = false;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                have_prev = false;
                continue;
            }
            const int cx = px(s.x[i]), cy = py(s.y[i]);
            if (have_prev) draw_line(img, prev_y, prev_x, cy, cx, c);
            put(img, cy, cx, c);
            prev_x = cx;
            prev_y = cy;
            have_prev = true;
        }
    }
    return img;
}

void write_plot(const std::string& path, const std::vector<PlotSeries>& series, const std::string& title,
                int width, int height) {
    write_ppm(path, render_plot(series, title, width, height));
}

}  // namespace mtlvqe
