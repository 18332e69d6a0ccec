// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/img/ppm.hpp"

#include <cctype>
#include <fstream>
#include <vector>

#include "mtlvqe/core/error.hpp"

namespace mtlvqe {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comment lines.
std::string next_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw DataError("truncated header in " + path);
    return tok;
}

int parse_dim(const std::string& tok, const std::string& what, const std::string& path) {
    try {
        const int v = std::stoi(tok);
        if (v <= 0) throw DataError(what + " must be positive in " + path);
        return v;
    } catch (const DataError&) {
        throw;
    } catch (const std::exception&) {
        throw DataError("bad " + what + " '" + tok + "' in " + path);
    }
}

void read_header(std::istream& in, const std::string& path, const char* magic, int& w, int& h) {
    if (next_token(in, path) != magic)
        throw DataError(std::string("not a ") + magic + " file: " + path);
    w = parse_dim(next_token(in, path), "width", path);
    h = parse_dim(next_token(in, path), "height", path);
    const std::string maxval = next_token(in, path);
    if (maxval != "255") throw DataError("unsupported maxval " + maxval + " in " + path + ", want 255");
    // The single whitespace byte after maxval was already consumed by next_token.
}

void read_payload(std::istream& in, std::uint8_t* dst, std::size_t n, const std::string& path) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw DataError("truncated pixel data in " + path);
}

}  // namespace

ImageRgb8 read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    int w = 0, h = 0;
    read_header(in, path, "P6", w, h);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * 3);
    read_payload(in, buf.data(), buf.size(), path);
    ImageRgb8 img(h, w);
    for (std::size_t i = 0, n = static_cast<std::size_t>(w) * h; i < n; ++i) {
        img.r.data[i] = buf[3 * i];
        img.g.data[i] = buf[3 * i + 1];
        img.b.data[i] = buf[3 * i + 2];
    }
    return img;
}

void write_ppm(const std::string& path, const ImageRgb8& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(img.w) * img.h * 3);
    for (std::size_t i = 0, n = static_cast<std::size_t>(img.w) * img.h; i < n; ++i) {
        buf[3 * i] = img.r.data[i];
        buf[3 * i + 1] = img.g.data[i];
        buf[3 * i + 2] = img.b.data[i];
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("short write to " + path);
}

Plane8 read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    int w = 0, h = 0;
    read_header(in, path, "P5", w, h);
    Plane8 p(h, w);
    read_payload(in, p.data.data(), p.size(), path);
    return p;
}

void write_pgm(const std::string& path, const Plane8& plane) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "P5\n" << plane.w << " " << plane.h << "\n255\n";
    out.write(reinterpret_cast<const char*>(plane.data.data()), static_cast<std::streamsize>(plane.size()));
    if (!out) throw DataError("short write to " + path);
}

}  // namespace mtlvqe
