// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "mtlvqe/img/image.hpp"

namespace mtlvqe {

/// Binary PPM (P6), maxval 255.
ImageRgb8 read_ppm(const std::string& path);
void write_ppm(const std::string& path, const ImageRgb8& img);

/// Binary PGM (P5), maxval 255. Used for plane dumps and feature maps.
Plane8 read_pgm(const std::string& path);
void write_pgm(const std::string& path, const Plane8& plane);

}  // namespace mtlvqe
