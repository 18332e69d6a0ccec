// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mtlvqe/data/degrader.hpp"
#include "mtlvqe/data/manifest.hpp"
#include "mtlvqe/data/patches.hpp"
#include "mtlvqe/img/color.hpp"
#include "mtlvqe/img/ppm.hpp"
#include "mtlvqe/img/resize.hpp"
#include "support/testutil.hpp"

using namespace mtlvqe;

namespace {

double plane_psnr(const Plane8& a, const Plane8& b) {
    REQUIRE(a.h == b.h);
    REQUIRE(a.w == b.w);
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

// Smooth texture with gradients, stand-in for natural content.
ImageRgb8 textured(int h, int w) {
    ImageRgb8 img(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = 128.0 + 60.0 * std::sin(0.31 * x) * std::cos(0.23 * y) + 0.4 * x + 0.2 * y;
            img.r.at(y, x) = clamp_u8(v);
            img.g.at(y, x) = clamp_u8(v * 0.8 + 20.0);
            img.b.at(y, x) = clamp_u8(255.0 - v * 0.5);
        }
    }
    return img;
}

void write_script(const std::string& path, const std::string& body) {
    {
        std::ofstream out(path);
        out << "#!/bin/sh\n" << body;
    }
    std::system(("chmod +x " + path).c_str());
}

}  // namespace

TEST_CASE("degrader kind names round trip") {
    for (auto k : {DegraderKind::external_codec, DegraderKind::synthetic, DegraderKind::null_degrader})
        CHECK(parse_degrader_kind(degrader_kind_name(k)) == k);
    CHECK_THROWS_AS(parse_degrader_kind("vtm"), ConfigError);
}

TEST_CASE("degrader spec validation") {
    DegraderSpec s;
    s.kind = DegraderKind::synthetic;
    s.qp = 64;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.qp = -1;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.qp = 32;
    CHECK_NOTHROW(s.validate());
    s.kind = DegraderKind::external_codec;
    s.command_template = "enc {input} {output} {qp} {width}";  // height missing
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("{height}"), ConfigError);
    s.command_template = "enc {input} {output} {qp} {width} {height}";
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("template substitution produces the exact argument list") {
    auto argv = substitute_template("enc {input} {output} {qp} {width} {height}", "in.yuv", "out.yuv", 27,
                                    1920, 1080);
    CHECK(argv == std::vector<std::string>{"enc", "in.yuv", "out.yuv", "27", "1920", "1080"});
    auto argv2 = substitute_template("tool --size={width}x{height} --in={input} --out={output} --qp={qp}",
                                     "a", "b", 5, 64, 32);
    CHECK(argv2 == std::vector<std::string>{"tool", "--size=64x32", "--in=a", "--out=b", "--qp=5"});
    CHECK_THROWS_AS(substitute_template("   ", "a", "b", 1, 2, 2), ConfigError);
}

TEST_CASE("null degrader is the identity") {
    ImageYuv420 img = rgb_to_yuv420(textured(16, 16));
    DegraderSpec s;
    s.kind = DegraderKind::null_degrader;
    s.qp = 37;
    ImageYuv420 out = degrade(img, s);
    CHECK(out.y.data == img.y.data);
    CHECK(out.u.data == img.u.data);
    CHECK(out.v.data == img.v.data);
}

TEST_CASE("synthetic degrader distortion is strictly monotone in qp") {
    ImageYuv420 img = rgb_to_yuv420(textured(32, 48));
    DegraderSpec s;
    s.kind = DegraderKind::synthetic;
    double prev = 1e9;
    for (int qp : {22, 27, 32, 37}) {
        s.qp = qp;
        ImageYuv420 out = degrade(img, s);
        CHECK(out.y.h == img.y.h);
        const double psnr = plane_psnr(img.y, out.y);
        CHECK(psnr < prev);
        prev = psnr;
    }
    // Tiny qp is near lossless; repeat runs are deterministic.
    s.qp = 0;
    CHECK(plane_psnr(img.y, degrade(img, s).y) > 50.0);
    s.qp = 32;
    ImageYuv420 a = degrade(img, s);
    ImageYuv420 b = degrade(img, s);
    CHECK(a.y.data == b.y.data);
}

TEST_CASE("synthetic degrader handles sizes not divisible by 8") {
    ImageRgb8 src = textured(20, 28);  // even, not multiple of 8
    ImageYuv420 img = rgb_to_yuv420(src);
    DegraderSpec s;
    s.kind = DegraderKind::synthetic;
    s.qp = 30;
    ImageYuv420 out = degrade(img, s);
    CHECK(out.h == 20);
    CHECK(out.w == 28);
    CHECK(out.u.h == 10);
}

TEST_CASE("external degrader runs the command and reads its output") {
    const auto dir = testutil::fresh_dir("extcodec");
    const std::string script = (dir / "copycodec.sh").string();
    write_script(script, "cp \"$1\" \"$2\"\n");
    ImageYuv420 img = rgb_to_yuv420(textured(16, 12));
    DegraderSpec s;
    s.kind = DegraderKind::external_codec;
    s.command_template = script + " {input} {output} {qp} {width} {height}";
    s.qp = 27;
    ImageYuv420 out = degrade(img, s);
    CHECK(out.y.data == img.y.data);
    CHECK(out.v.data == img.v.data);
}

TEST_CASE("external degrader failure carries captured diagnostics") {
    const auto dir = testutil::fresh_dir("extcodec_fail");
    const std::string script = (dir / "failcodec.sh").string();
    write_script(script, "echo boom-diagnostic >&2\nexit 3\n");
    ImageYuv420 img = rgb_to_yuv420(textured(8, 8));
    DegraderSpec s;
    s.kind = DegraderKind::external_codec;
    s.command_template = script + " {input} {output} {qp} {width} {height}";
    try {
        degrade(img, s);
        FAIL("expected DegraderError");
    } catch (const DegraderError& e) {
        CHECK(std::string(e.what()).find("status 3") != std::string::npos);
        CHECK(e.diagnostics.find("boom-diagnostic") != std::string::npos);
    }

    // Command that exits 0 without producing the output file.
    const std::string noop = (dir / "noopcodec.sh").string();
    write_script(noop, "exit 0\n");
    s.command_template = noop + " {input} {output} {qp} {width} {height}";
    CHECK_THROWS_AS(degrade(img, s), DegraderError);

    // Missing binary surfaces the exec failure.
    s.command_template = (dir / "no-such-bin").string() + " {input} {output} {qp} {width} {height}";
    CHECK_THROWS_AS(degrade(img, s), DegraderError);
}

TEST_CASE("environment variable overrides the external codec binary") {
    const auto dir = testutil::fresh_dir("extcodec_env");
    const std::string script = (dir / "envcodec.sh").string();
    write_script(script, "cp \"$1\" \"$2\"\n");
    ImageYuv420 img = rgb_to_yuv420(textured(8, 8));
    DegraderSpec s;
    s.kind = DegraderKind::external_codec;
    s.command_template = "/definitely/not/here {input} {output} {qp} {width} {height}";
    setenv(kCodecBinEnv, script.c_str(), 1);
    ImageYuv420 out = degrade(img, s);
    unsetenv(kCodecBinEnv);
    CHECK(out.y.data == img.y.data);
}

TEST_CASE("patch grid tiles without overlap and drops partial tiles") {
    SampleImages s;
    s.hr = textured(16, 16);
    s.lr = bicubic_downscale(s.hr, 2);
    s.lr_decoded = s.lr;
    auto grid = extract_patch_grid(s, 2, 4);  // lr 8x8, patch 4 -> 4 tiles
    CHECK(grid.size() == 4);
    CHECK(grid[0].y == 0);
    CHECK(grid[3].x == 4);
    auto ragged = extract_patch_grid(s, 2, 5);  // 8/5 -> 1 tile per axis
    CHECK(ragged.size() == 1);
}

TEST_CASE("patches are co-located: lr offset (y,x) maps to hr offset (ry,rx)") {
    // hr pixel encodes its own coordinates, so crops reveal their origin.
    SampleImages s;
    s.hr = ImageRgb8(24, 48);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 48; ++x) {
            s.hr.r.at(y, x) = static_cast<std::uint8_t>(y);
            s.hr.g.at(y, x) = static_cast<std::uint8_t>(x);
            s.hr.b.at(y, x) = 7;
        }
    s.lr = bicubic_downscale(s.hr, 2);
    s.lr_decoded = s.lr;
    auto ps = extract_patches(s, 2, 4, 16, 99);
    CHECK(ps.size() == 16);
    for (const auto& p : ps) {
        CHECK(p.hr.h == 8);
        CHECK(p.hr.w == 8);
        CHECK(p.lr.h == 4);
        CHECK(p.hr.r.at(0, 0) == 2 * p.y);
        CHECK(p.hr.g.at(0, 0) == 2 * p.x);
    }
    // Same seed, same offsets; different seed, different offsets somewhere.
    auto ps2 = extract_patches(s, 2, 4, 16, 99);
    for (std::size_t i = 0; i < ps.size(); ++i) {
        CHECK(ps[i].y == ps2[i].y);
        CHECK(ps[i].x == ps2[i].x);
    }
    auto ps3 = extract_patches(s, 2, 4, 16, 100);
    bool differs = false;
    for (std::size_t i = 0; i < ps.size(); ++i) differs |= (ps[i].y != ps3[i].y || ps[i].x != ps3[i].x);
    CHECK(differs);
}

TEST_CASE("upscaled lr patch aligns with its hr patch better than with a shifted crop") {
    SampleImages s;
    s.hr = textured(64, 64);
    s.lr = bicubic_downscale(s.hr, 2);
    s.lr_decoded = s.lr;
    auto ps = extract_patches(s, 2, 16, 4, 7);
    for (const auto& p : ps) {
        ImageRgb8 up = bicubic_upscale(p.lr, 2);
        const double aligned = plane_psnr(luma709(up), luma709(p.hr));
        const int sy = (p.y + 5) % (32 - 16);
        const int sx = (p.x + 9) % (32 - 16);
        ImageRgb8 shifted = crop(s.hr, 2 * sy, 2 * sx, 32, 32);
        const double misaligned = plane_psnr(luma709(up), luma709(shifted));
        CHECK(aligned > misaligned);
    }
}

TEST_CASE("patch extraction rejects bad geometry") {
    SampleImages s;
    s.hr = textured(16, 16);
    s.lr = bicubic_downscale(s.hr, 2);
    s.lr_decoded = s.lr;
    CHECK_THROWS_AS(extract_patches(s, 2, 9, 1, 0), ShapeError);   // patch > lr
    CHECK_THROWS_AS(extract_patches(s, 2, 4, 0, 0), ConfigError);  // count < 1
    SampleImages bad = s;
    bad.hr = textured(16, 14);
    CHECK_THROWS_AS(extract_patches(bad, 2, 4, 1, 0), ShapeError);
    bad = s;
    bad.lr_decoded = textured(4, 4);
    CHECK_THROWS_AS(extract_patches(bad, 2, 4, 1, 0), ShapeError);
}

namespace {

std::filesystem::path make_corpus(const std::string& tag, int n, int h = 12, int w = 12) {
    const auto dir = testutil::fresh_dir(tag);
    for (int i = 0; i < n; ++i) {
        ImageRgb8 img = textured(h, w);
        // Make each image distinct.
        for (auto& v : img.r.data) v = static_cast<std::uint8_t>((v + 13 * i) % 256);
        write_ppm((dir / ("img" + std::to_string(i) + ".ppm")).string(), img);
    }
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("build_manifest renders images x qps entries through the pipeline") {
    const auto src = make_corpus("mansrc", 4);
    const auto out = testutil::fresh_dir("manout");
    DegraderSpec spec;
    spec.kind = DegraderKind::null_degrader;
    auto res = build_manifest(src.string(), {22, 27}, spec, 2, SplitRule{1, 1}, out.string());
    CHECK(res.new_entries == 8);
    CHECK(res.manifest.entries.size() == 8);

    Manifest m = load_manifest((out / "manifest.txt").string());
    CHECK(m.r == 2);
    CHECK(m.qps == std::vector<int>{22, 27});
    CHECK(m.entries.size() == 8);
    int train = 0, val = 0, test = 0;
    for (const auto& e : m.entries) {
        SampleImages s = load_sample(m, e);
        CHECK(s.hr.h == 2 * s.lr.h);
        CHECK(s.hr.w == 2 * s.lr.w);
        CHECK(s.lr_decoded.h == s.lr.h);
        CHECK(e.degrader_id == "null");
        // Null degrader: decoded equals lr bit-exactly.
        CHECK(s.lr_decoded.r.data == s.lr.r.data);
        CHECK(s.lr_decoded.g.data == s.lr.g.data);
        CHECK(s.lr_decoded.b.data == s.lr.b.data);
        train += e.split == "train";
        val += e.split == "val";
        test += e.split == "test";
    }
    CHECK(train == 4);  // 2 images x 2 qps
    CHECK(val == 2);
    CHECK(test == 2);
}

TEST_CASE("manifest build is deterministic and reruns reuse existing work") {
    const auto src = make_corpus("mandet", 3);
    const auto out1 = testutil::fresh_dir("mandet_out1");
    const auto out2 = testutil::fresh_dir("mandet_out2");
    DegraderSpec spec;
    spec.kind = DegraderKind::synthetic;
    auto r1 = build_manifest(src.string(), {22, 37}, spec, 2, SplitRule{1, 0}, out1.string());
    auto r2 = build_manifest(src.string(), {22, 37}, spec, 2, SplitRule{1, 0}, out2.string());
    CHECK(r1.new_entries == 6);
    CHECK(slurp((out1 / "manifest.txt").string()) == slurp((out2 / "manifest.txt").string()));

    auto r3 = build_manifest(src.string(), {22, 37}, spec, 2, SplitRule{1, 0}, out1.string());
    CHECK(r3.new_entries == 0);
    CHECK(r3.reused_entries == 6);

    // Changing the configuration rebuilds.
    auto r4 = build_manifest(src.string(), {22, 27}, spec, 2, SplitRule{1, 0}, out1.string());
    CHECK(r4.new_entries == 6);
}

TEST_CASE("build_manifest skips unreadable sources with a warning, errors when empty") {
    const auto src = make_corpus("manskip", 2);
    {
        std::ofstream bad((src / "broken.ppm").string(), std::ios::binary);
        bad << "not a ppm";
    }
    const auto out = testutil::fresh_dir("manskip_out");
    DegraderSpec spec;
    spec.kind = DegraderKind::null_degrader;
    auto res = build_manifest(src.string(), {22}, spec, 2, SplitRule{0, 0}, out.string());
    CHECK(res.skipped_sources == 1);
    CHECK(res.manifest.entries.size() == 2);

    const auto empty = testutil::fresh_dir("manempty");
    CHECK_THROWS_AS(build_manifest(empty.string(), {22}, spec, 2, SplitRule{0, 0},
                                   testutil::fresh_dir("manempty_out").string()),
                    DataError);
}

TEST_CASE("odd-sized sources are center-cropped to a multiple of 2r") {
    const auto src = testutil::fresh_dir("mancrop");
    write_ppm((src / "odd.ppm").string(), textured(13, 15));
    const auto out = testutil::fresh_dir("mancrop_out");
    DegraderSpec spec;
    spec.kind = DegraderKind::null_degrader;
    auto res = build_manifest(src.string(), {22}, spec, 2, SplitRule{0, 0}, out.string());
    Manifest m = res.manifest;
    SampleImages s = load_sample(m, m.entries[0]);
    CHECK(s.hr.h == 12);
    CHECK(s.hr.w == 12);
    CHECK(s.lr.h == 6);
}

TEST_CASE("manifest loader rejects duplicates, undeclared qps, missing files") {
    const auto dir = testutil::fresh_dir("manload");
    auto write_lines = [&](const std::string& name, const std::string& body) {
        std::ofstream out((dir / name).string(), std::ios::binary);
        out << body;
        return (dir / name).string();
    };
    // Referenced files must exist.
    write_ppm((dir / "a.ppm").string(), textured(4, 4));
    const std::string header = "# mtlvqe-manifest v1\n# r=2\n# qps=22\n# created_with=x\n";
    const std::string good = header + "id1, train, 22, null, a.ppm, a.ppm, a.ppm\n";
    CHECK(load_manifest(write_lines("ok.txt", good)).entries.size() == 1);

    CHECK_THROWS_WITH_AS(
        load_manifest(write_lines("dup.txt", good + "id1, train, 22, null, a.ppm, a.ppm, a.ppm\n")),
        doctest::Contains("duplicate"), DataError);
    CHECK_THROWS_WITH_AS(
        load_manifest(write_lines("qp.txt", header + "id2, train, 37, null, a.ppm, a.ppm, a.ppm\n")),
        doctest::Contains("undeclared"), DataError);
    CHECK_THROWS_WITH_AS(
        load_manifest(write_lines("miss.txt", header + "id3, train, 22, null, gone.ppm, a.ppm, a.ppm\n")),
        doctest::Contains("missing"), DataError);
    CHECK_THROWS_AS(load_manifest(write_lines("mal.txt", header + "id4, train, 22\n")), DataError);
    CHECK_THROWS_AS(load_manifest(write_lines("magic.txt", "# nope\n")), DataError);
    CHECK_THROWS_AS(
        load_manifest(write_lines("split.txt", header + "id5, dev, 22, null, a.ppm, a.ppm, a.ppm\n")),
        DataError);
}
