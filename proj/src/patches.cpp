// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/data/patches.hpp"

#include <random>
#include <string>

#include "mtlvqe/core/error.hpp"

namespace mtlvqe {

namespace {

void check_sample(const SampleImages& s, int r, int patch) {
    if (r < 1) throw ShapeError("extract_patches: r must be >= 1, got " + std::to_string(r));
    if (s.hr.h != r * s.lr.h || s.hr.w != r * s.lr.w)
        throw ShapeError("extract_patches: hr " + std::to_string(s.hr.h) + "x" + std::to_string(s.hr.w) +
                         " is not " + std::to_string(r) + "x the lr " + std::to_string(s.lr.h) + "x" +
                         std::to_string(s.lr.w));
    if (s.lr_decoded.h != s.lr.h || s.lr_decoded.w != s.lr.w)
        throw ShapeError("extract_patches: lr_decoded dims differ from lr");
    if (patch < 1 || patch > s.lr.h || patch > s.lr.w)
        throw ShapeError("extract_patches: patch " + std::to_string(patch) + " exceeds lr " +
                         std::to_string(s.lr.h) + "x" + std::to_string(s.lr.w));
}

PatchTriple cut(const SampleImages& s, int r, int patch, int y, int x) {
    PatchTriple t;
    t.y = y;
    t.x = x;
    t.lr = crop(s.lr, y, x, patch, patch);
    t.lr_decoded = crop(s.lr_decoded, y, x, patch, patch);
    t.hr = crop(s.hr, r * y, r * x, r * patch, r * patch);
    return t;
}

}  // namespace

ImageRgb8 crop(const ImageRgb8& img, int y, int x, int h, int w) {
    if (y < 0 || x < 0 || h < 1 || w < 1 || y + h > img.h || x + w > img.w)
        throw ShapeError("crop: window " + std::to_string(h) + "x" + std::to_string(w) + "+" +
                         std::to_string(y) + "+" + std::to_string(x) + " outside " + std::to_string(img.h) +
                         "x" + std::to_string(img.w));
    ImageRgb8 out(h, w);
    for (int c = 0; c < 3; ++c)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) out.plane(c).at(yy, xx) = img.plane(c).at(y + yy, x + xx);
    return out;
}

std::vector<PatchTriple> extract_patches(const SampleImages& s, int r, int patch, int count,
                                         std::uint64_t seed) {
    check_sample(s, r, patch);
    if (count < 1) throw ConfigError("extract_patches: count must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dy(0, s.lr.h - patch);
    std::uniform_int_distribution<int> dx(0, s.lr.w - patch);
    std::vector<PatchTriple> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int y = dy(rng);
        const int x = dx(rng);
        out.push_back(cut(s, r, patch, y, x));
    }
    return out;
}

std::vector<PatchTriple> extract_patch_grid(const SampleImages& s, int r, int patch) {
    check_sample(s, r, patch);
    std::vector<PatchTriple> out;
    for (int y = 0; y + patch <= s.lr.h; y += patch)
        for (int x = 0; x + patch <= s.lr.w; x += patch) out.push_back(cut(s, r, patch, y, x));
    return out;
}

}  // namespace mtlvqe
