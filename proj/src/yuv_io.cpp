// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/img/yuv_io.hpp"

#include <filesystem>
#include <fstream>

#include "mtlvqe/core/error.hpp"

namespace mtlvqe {

namespace {

void check_geometry(int h, int w) {
    if (h <= 0 || w <= 0 || h % 2 != 0 || w % 2 != 0)
        throw ShapeError("yuv420: dimensions must be positive and even, got " + std::to_string(h) + "x" +
                         std::to_string(w));
}

void read_exact(std::istream& in, std::uint8_t* dst, std::size_t n, const std::string& path) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw DataError("truncated yuv data in " + path);
}

}  // namespace

std::size_t yuv420_frame_bytes(int h, int w) {
    check_geometry(h, w);
    return static_cast<std::size_t>(h) * w * 3 / 2;
}

ImageYuv420 read_yuv420(const std::string& path, int h, int w, int frame) {
    const std::size_t fb = yuv420_frame_bytes(h, w);
    if (frame < 0) throw DataError("read_yuv420: negative frame index");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    in.seekg(static_cast<std::streamoff>(fb) * frame);
    ImageYuv420 img(h, w);
    read_exact(in, img.y.data.data(), img.y.size(), path);
    read_exact(in, img.u.data.data(), img.u.size(), path);
    read_exact(in, img.v.data.data(), img.v.size(), path);
    return img;
}

void write_yuv420(const std::string& path, const ImageYuv420& img, bool append) {
    std::ofstream out(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
    if (!out) throw DataError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(img.y.data.data()), static_cast<std::streamsize>(img.y.size()));
    out.write(reinterpret_cast<const char*>(img.u.data.data()), static_cast<std::streamsize>(img.u.size()));
    out.write(reinterpret_cast<const char*>(img.v.data.data()), static_cast<std::streamsize>(img.v.size()));
    if (!out) throw DataError("short write to " + path);
}

int count_yuv420_frames(const std::string& path, int h, int w) {
    const std::size_t fb = yuv420_frame_bytes(h, w);
    std::error_code ec;
    const auto sz = std::filesystem::file_size(path, ec);
    if (ec) throw DataError("cannot stat " + path + ": " + ec.message());
    return static_cast<int>(sz / fb);
}

}  // namespace mtlvqe
