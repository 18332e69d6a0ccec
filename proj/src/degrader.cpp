// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/data/degrader.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>

#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "mtlvqe/core/error.hpp"
#include "mtlvqe/img/yuv_io.hpp"
#include "mtlvqe/priors.hpp"

namespace mtlvqe {

namespace {

constexpr int kBlock = 8;

// Orthonormal DCT-II basis for 8x8 blocks.
Eigen::Matrix<double, kBlock, kBlock> dct_matrix() {
    Eigen::Matrix<double, kBlock, kBlock> t;
    const double pi = std::acos(-1.0);
    for (int i = 0; i < kBlock; ++i) {
        const double a = (i == 0) ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
        for (int j = 0; j < kBlock; ++j) t(i, j) = a * std::cos((2 * j + 1) * i * pi / (2.0 * kBlock));
    }
    return t;
}

Plane8 quantize_plane(const Plane8& src, double qstep) {
    static const Eigen::Matrix<double, kBlock, kBlock> T = dct_matrix();
    const int ph = (src.h + kBlock - 1) / kBlock * kBlock;
    const int pw = (src.w + kBlock - 1) / kBlock * kBlock;
    Eigen::MatrixXd m(ph, pw);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x) m(y, x) = src.at(std::min(y, src.h - 1), std::min(x, src.w - 1));
    for (int by = 0; by < ph; by += kBlock) {
        for (int bx = 0; bx < pw; bx += kBlock) {
            Eigen::Matrix<double, kBlock, kBlock> blk = m.block<kBlock, kBlock>(by, bx);
            Eigen::Matrix<double, kBlock, kBlock> coef = T * blk * T.transpose();
            coef = (coef / qstep).array().round() * qstep;
            m.block<kBlock, kBlock>(by, bx) = T.transpose() * coef * T;
        }
    }
    Plane8 out(src.h, src.w);
    for (int y = 0; y < src.h; ++y)
        for (int x = 0; x < src.w; ++x) out.at(y, x) = clamp_u8(m(y, x));
    return out;
}

ImageYuv420 degrade_synthetic(const ImageYuv420& img, int qp) {
    const double qstep = std::pow(2.0, (qp - 4.0) / 6.0);
    ImageYuv420 out(img.h, img.w);
    out.y = quantize_plane(img.y, qstep);
    out.u = quantize_plane(img.u, qstep);
    out.v = quantize_plane(img.v, qstep);
    return out;
}

// Runs argv, captures combined stdout/stderr, returns exit status.
int run_command(const std::vector<std::string>& argv, std::string& output) {
    int fds[2];
    if (pipe(fds) != 0) throw DegraderError("pipe failed", std::strerror(errno));
    const pid_t pid = fork();
    if (pid < 0) {
        close(fds[0]);
        close(fds[1]);
        throw DegraderError("fork failed", std::strerror(errno));
    }
    if (pid == 0) {
        dup2(fds[1], STDOUT_FILENO);
        dup2(fds[1], STDERR_FILENO);
        close(fds[0]);
        close(fds[1]);
        std::vector<char*> cargv;
        cargv.reserve(argv.size() + 1);
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        std::fprintf(stderr, "exec %s: %s\n", cargv[0], std::strerror(errno));
        _exit(127);
    }
    close(fds[1]);
    char buf[4096];
    ssize_t n;
    while ((n = read(fds[0], buf, sizeof buf)) > 0) output.append(buf, static_cast<std::size_t>(n));
    close(fds[0]);
    int status = 0;
    waitpid(pid, &status, 0);
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -1;
}

ImageYuv420 degrade_external(const ImageYuv420& img, const DegraderSpec& spec) {
    static std::atomic<unsigned> counter{0};
    const auto tmp = std::filesystem::temp_directory_path();
    const std::string tag =
        "mtlvqe-" + std::to_string(getpid()) + "-" + std::to_string(counter.fetch_add(1));
    const std::string in_path = (tmp / (tag + "-in.yuv")).string();
    const std::string out_path = (tmp / (tag + "-out.yuv")).string();
    write_yuv420(in_path, img);

    std::vector<std::string> argv =
        substitute_template(spec.command_template, in_path, out_path, spec.qp, img.w, img.h);
    if (const char* bin = std::getenv(kCodecBinEnv); bin != nullptr && bin[0] != '\0') argv[0] = bin;

    std::string diag;
    const int rc = run_command(argv, diag);
    auto cleanup = [&] {
        std::error_code ec;
        std::filesystem::remove(in_path, ec);
        std::filesystem::remove(out_path, ec);
    };
    if (rc != 0) {
        cleanup();
        throw DegraderError("external codec '" + argv[0] + "' exited with status " + std::to_string(rc),
                            diag);
    }
    if (!std::filesystem::exists(out_path)) {
        cleanup();
        throw DegraderError("external codec '" + argv[0] + "' produced no output file", diag);
    }
    ImageYuv420 out;
    try {
        out = read_yuv420(out_path, img.h, img.w);
    } catch (const DataError& e) {
        cleanup();
        throw DegraderError(std::string("external codec output unreadable: ") + e.what(), diag);
    }
    cleanup();
    return out;
}

}  // namespace

DegraderKind parse_degrader_kind(const std::string& name) {
    if (name == "external_codec") return DegraderKind::external_codec;
    if (name == "synthetic") return DegraderKind::synthetic;
    if (name == "null") return DegraderKind::null_degrader;
    throw ConfigError("unknown degrader kind '" + name + "', want external_codec|synthetic|null");
}

std::string degrader_kind_name(DegraderKind kind) {
    switch (kind) {
        case DegraderKind::external_codec: return "external_codec";
        case DegraderKind::synthetic: return "synthetic";
        case DegraderKind::null_degrader: return "null";
    }
    return "?";
}

void DegraderSpec::validate() const {
    if (qp < 0 || qp > kQpMax)
        throw ConfigError("degrader qp must be in [0, " + std::to_string(kQpMax) + "], got " +
                          std::to_string(qp));
    if (kind == DegraderKind::external_codec) {
        for (const char* ph : {"{input}", "{output}", "{qp}", "{width}", "{height}"})
            if (command_template.find(ph) == std::string::npos)
                throw ConfigError(std::string("external codec template missing placeholder ") + ph);
    }
}

std::string degrader_id(const DegraderSpec& spec) { return degrader_kind_name(spec.kind); }

std::vector<std::string> substitute_template(const std::string& command_template, const std::string& input,
                                             const std::string& output, int qp, int width, int height) {
    std::vector<std::string> argv;
    std::istringstream ss(command_template);
    std::string tok;
    auto replace_all = [](std::string s, const std::string& from, const std::string& to) {
        for (std::size_t p = 0; (p = s.find(from, p)) != std::string::npos; p += to.size())
            s.replace(p, from.size(), to);
        return s;
    };
    while (ss >> tok) {
        tok = replace_all(tok, "{input}", input);
        tok = replace_all(tok, "{output}", output);
        tok = replace_all(tok, "{qp}", std::to_string(qp));
        tok = replace_all(tok, "{width}", std::to_string(width));
        tok = replace_all(tok, "{height}", std::to_string(height));
        argv.push_back(tok);
    }
    if (argv.empty()) throw ConfigError("external codec template is empty");
    return argv;
}

ImageYuv420 degrade(const ImageYuv420& img, const DegraderSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case DegraderKind::null_degrader: return img;
        case DegraderKind::synthetic: return degrade_synthetic(img, spec.qp);
        case DegraderKind::external_codec: return degrade_external(img, spec);
    }
    throw ConfigError("unreachable degrader kind");
}

}  // namespace mtlvqe
