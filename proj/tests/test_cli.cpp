// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtlvqe/data/manifest.hpp"
#include "mtlvqe/img/ppm.hpp"
#include "support/testutil.hpp"

using namespace mtlvqe;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
};

/// Runs the installed binary inside `cwd` with stderr folded into stdout.
CliResult run_cli(const fs::path& cwd, const std::string& args) {
    const char* bin = std::getenv("MTLVQE_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "MTLVQE_BIN must point at the command line binary");
    const std::string cmd = "cd '" + cwd.string() + "' && '" + std::string(bin) + "' " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult res;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) res.out.append(buf, n);
    const int rc = pclose(pipe);
    res.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    return res;
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

ImageRgb8 textured(int h, int w, int phase) {
    ImageRgb8 img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.r.at(y, x) = static_cast<std::uint8_t>((x * 13 + y * 7 + phase * 37) % 256);
            img.g.at(y, x) = static_cast<std::uint8_t>((x * 5 + y * 23 + phase * 11 + 64) % 256);
            img.b.at(y, x) = static_cast<std::uint8_t>(((x / 2 + y / 3) % 2) ? 190 : 50);
        }
    return img;
}

/// Work tree with source images plus a config file; returns the tree root.
fs::path make_tree(const std::string& tag, int sources, const json& cfg) {
    const fs::path root = testutil::fresh_dir("cli_" + tag);
    fs::create_directories(root / "sources");
    for (int i = 0; i < sources; ++i)
        write_ppm((root / "sources" / ("img" + std::to_string(i) + ".ppm")).string(), textured(48, 32, i));
    std::ofstream(root / "cfg.json") << cfg.dump(2);
    return root;
}

json base_config(const std::vector<int>& qps) {
    json j;
    j["seed"] = 5;
    j["paths"] = {{"hr_dir", "sources"}, {"data_dir", "data"}};
    j["degrader"] = {{"kind", "synthetic"}};
    j["data"] = {{"qps", qps}, {"r", 2}, {"val_count", 1}, {"test_count", 1}};
    j["net"] = {{"num_blocks", 1}, {"trunk_width", 4}, {"scale_factor", 2}, {"alpha", 0.9}};
    j["opt"] = {{"lr0", 1e-3}, {"batch_size", 2}};
    j["sched"] = {{"total_epochs", 1}};
    j["train"] = {{"patch_size", 8}};
    return j;
}

/// Pretraining wants clean pairs, so its corpus uses the null degrader.
void add_pretrain_config(const fs::path& root, json cfg) {
    cfg["paths"]["data_dir"] = "data_pre";
    cfg["degrader"] = {{"kind", "null"}};
    cfg["data"]["qps"] = {0};
    std::ofstream(root / "cfg_pre.json") << cfg.dump(2);
}

std::string find_file(const fs::path& root, const std::string& name) {
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() == name) return e.path().string();
    return {};
}

}  // namespace

TEST_CASE("prepare emits one manifest entry per source and qp, and reruns reuse them") {
    const auto root = make_tree("prep", 5, base_config({22, 27, 32, 37}));

    const auto first = run_cli(root, "prepare --config cfg.json");
    CAPTURE(first.out);
    CHECK(first.code == 0);
    CHECK(contains(first.out, "20 entries (20 new entries, 0 reused, 0 skipped sources)"));

    const Manifest m = load_manifest((root / "data" / "manifest.txt").string());
    CHECK(m.entries.size() == 20);
    for (const auto& e : m.entries) {
        CHECK(fs::exists(fs::path(m.dir) / e.hr_path));
        CHECK(fs::exists(fs::path(m.dir) / e.lr_path));
        CHECK(fs::exists(fs::path(m.dir) / e.lr_decoded_path));
    }

    const auto again = run_cli(root, "prepare --config cfg.json");
    CAPTURE(again.out);
    CHECK(again.code == 0);
    CHECK(contains(again.out, "(0 new entries, 20 reused, 0 skipped sources)"));
}

TEST_CASE("configuration problems are collected into one report with the config exit code") {
    json cfg = base_config({22});
    cfg["typo_section"] = 1;
    cfg["opt"]["lr0"] = -1.0;
    cfg["net"]["bogus_key"] = true;
    const auto root = make_tree("badcfg", 0, cfg);

    const auto res = run_cli(root, "prepare --config cfg.json");
    CAPTURE(res.out);
    CHECK(res.code == 2);
    CHECK(contains(res.out, "typo_section"));
    CHECK(contains(res.out, "bogus_key"));
    CHECK(contains(res.out, "lr0"));
    CHECK(contains(res.out, "3 problem(s)"));
}

TEST_CASE("a config file that is not json exits with the config code") {
    const auto root = testutil::fresh_dir("cli_nojson");
    std::ofstream(root / "cfg.json") << "not json {";
    const auto res = run_cli(root, "prepare --config cfg.json");
    CAPTURE(res.out);
    CHECK(res.code == 2);
    CHECK(contains(res.out, "not valid JSON"));
}

TEST_CASE("a missing manifest is a data error, not a config error") {
    json cfg = base_config({22});
    cfg["paths"]["run_dir"] = "run";
    const auto root = make_tree("nomanifest", 0, cfg);
    const auto res = run_cli(root, "train --config cfg.json --fine-tune 0");
    CAPTURE(res.out);
    CHECK(res.code == 3);
    CHECK(contains(res.out, "manifest"));
}

TEST_CASE("dry runs print the resolved config and plan without touching the run directory") {
    json cfg = base_config({22, 27});
    cfg["paths"]["run_dir"] = "run_dry";
    const auto root = make_tree("dry", 3, cfg);
    REQUIRE(run_cli(root, "prepare --config cfg.json").code == 0);

    const auto res = run_cli(root, "train --config cfg.json --fine-tune 0 --dry-run");
    CAPTURE(res.out);
    CHECK(res.code == 0);
    CHECK(contains(res.out, "dry run: nothing executed"));
    CHECK(contains(res.out, "resolved config:"));
    CHECK(contains(res.out, "plan "));
    CHECK_FALSE(fs::exists(root / "run_dry"));

    const auto abl = run_cli(root, "ablate --config cfg.json --dry-run");
    CAPTURE(abl.out);
    CHECK(abl.code == 0);
    CHECK(contains(abl.out, "arm0-mq1-map1-ft1"));
    CHECK(contains(abl.out, "arm1-mq0-map1-ft1"));
    CHECK(contains(abl.out, "arm2-mq1-map0-ft1"));
    CHECK(contains(abl.out, "arm3-mq1-map1-ft0"));
    CHECK_FALSE(fs::exists(root / "run_dry"));
}

TEST_CASE("pretrain, train and eval round trip through the command line") {
    json cfg = base_config({22, 27});
    const auto root = make_tree("trip", 4, cfg);
    add_pretrain_config(root, cfg);
    REQUIRE(run_cli(root, "prepare --config cfg.json").code == 0);
    REQUIRE(run_cli(root, "prepare --config cfg_pre.json").code == 0);

    const auto pre = run_cli(root, "pretrain --config cfg_pre.json --run-dir run_pre");
    CAPTURE(pre.out);
    REQUIRE(pre.code == 0);
    CHECK(contains(pre.out, "pretrain: epochs 1"));
    CHECK(fs::exists(root / "run_pre" / "resolved_config.json"));
    CHECK(fs::exists(root / "run_pre" / "invocation.txt"));
    const std::string pre_ckpt = find_file(root / "run_pre", "final.ckpt");
    REQUIRE_FALSE(pre_ckpt.empty());

    const auto tr = run_cli(root, "train --config cfg.json --run-dir run_ft --pretrain-ckpt '" + pre_ckpt + "'");
    CAPTURE(tr.out);
    REQUIRE(tr.code == 0);
    CHECK(contains(tr.out, "run "));
    const std::string ft_ckpt = find_file(root / "run_ft", "final.ckpt");
    REQUIRE_FALSE(ft_ckpt.empty());
    CHECK_FALSE(find_file(root / "run_ft", "metrics.csv").empty());

    const auto ev =
        run_cli(root, "eval --config cfg.json --run-dir run_eval --checkpoint '" + ft_ckpt + "' --split test");
    CAPTURE(ev.out);
    REQUIRE(ev.code == 0);
    std::ifstream csv(root / "run_eval" / "report.csv");
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    CHECK(header == "image_id,sequence,dataset,qp,task,psnr,d_psnr,ssim,d_ssim,anchor");
    int sr_rows = 0, qe_rows = 0;
    for (std::string line; std::getline(csv, line);) {
        if (line.rfind("average,", 0) == 0) continue;
        if (contains(line, ",sr,")) ++sr_rows;
        if (contains(line, ",qe,")) ++qe_rows;
    }
    CHECK(sr_rows == 2);
    CHECK(qe_rows == 2);
    CHECK(fs::exists(root / "run_eval" / "report.txt"));

    // The snapshot is a complete config: rerunning eval from it must succeed.
    const auto snap = run_cli(root, "eval --config run_eval/resolved_config.json --run-dir run_eval2");
    CAPTURE(snap.out);
    CHECK(snap.code == 0);

    const auto ins = run_cli(
        root, "inspect --config cfg.json --run-dir run_ins --checkpoint '" + ft_ckpt + "' --image sources/img0.ppm");
    CAPTURE(ins.out);
    REQUIRE(ins.code == 0);
    CHECK(fs::exists(root / "run_ins" / "inspect" / "img0_conv_in.pgm"));
}

TEST_CASE("a checkpoint that disagrees with the configured net is rejected with a field diff") {
    json cfg = base_config({22});
    const auto root = make_tree("mismatch", 3, cfg);
    add_pretrain_config(root, cfg);
    REQUIRE(run_cli(root, "prepare --config cfg.json").code == 0);
    REQUIRE(run_cli(root, "prepare --config cfg_pre.json").code == 0);
    REQUIRE(run_cli(root, "pretrain --config cfg_pre.json --run-dir run_pre").code == 0);
    const std::string ckpt = find_file(root / "run_pre", "final.ckpt");
    REQUIRE_FALSE(ckpt.empty());

    json wrong = cfg;
    wrong["net"]["trunk_width"] = 8;
    std::ofstream(root / "wrong.json") << wrong.dump(2);
    const auto res =
        run_cli(root, "eval --config wrong.json --run-dir run_mm --checkpoint '" + ckpt + "' --split test");
    CAPTURE(res.out);
    CHECK(res.code == 3);
    CHECK(contains(res.out, "trunk_width: 8 vs 4"));
}

TEST_CASE("bdrate recovers the half rate anchor from a csv of curves") {
    const auto root = testutil::fresh_dir("cli_bd");
    std::ofstream rd(root / "rd.csv");
    rd << "sequence,task,curve,rate,quality\n";
    for (int i = 0; i < 4; ++i) {
        const double q = 30.0 + 2.0 * i;
        const double rate = 1000.0 * std::pow(2.0, i);
        rd << "seq1,sr,reference," << rate << ',' << q << '\n';
        rd << "seq1,sr,test," << rate / 2.0 << ',' << q << '\n';
    }
    rd.close();
    json cfg;
    cfg["paths"] = {{"rd_csv", "rd.csv"}, {"run_dir", "run_bd"}};
    std::ofstream(root / "cfg.json") << cfg.dump(2);

    const auto res = run_cli(root, "bdrate --config cfg.json");
    CAPTURE(res.out);
    CHECK(res.code == 0);
    CHECK(contains(res.out, "-50.00"));
    CHECK(contains(res.out, "average"));
    std::ifstream csv(root / "run_bd" / "bdrate.csv");
    REQUIRE(csv.good());
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    CHECK(header == "sequence,task,bd_rate_percent,monotone_fit");
    CHECK(contains(row, "seq1,sr,-50.0000"));
}

TEST_CASE("a run directory only admits one invocation at a time") {
    json cfg = base_config({22});
    cfg["paths"]["run_dir"] = "run_busy";
    const auto root = make_tree("lock", 3, cfg);
    add_pretrain_config(root, cfg);
    REQUIRE(run_cli(root, "prepare --config cfg_pre.json").code == 0);
    fs::create_directories(root / "run_busy");
    std::ofstream(root / "run_busy" / ".lock") << "held\n";

    const auto res = run_cli(root, "pretrain --config cfg_pre.json");
    CAPTURE(res.out);
    CHECK(res.code == 3);
    CHECK(contains(res.out, "locked"));
}

TEST_CASE("flag overrides reach the resolved config snapshot") {
    json cfg = base_config({22, 27});
    const auto root = make_tree("ovr", 3, cfg);
    add_pretrain_config(root, cfg);
    REQUIRE(run_cli(root, "prepare --config cfg_pre.json").code == 0);

    const auto res =
        run_cli(root, "pretrain --config cfg_pre.json --run-dir run_pre --seed 9 --epochs 2 --batch-size 1");
    CAPTURE(res.out);
    REQUIRE(res.code == 0);
    std::ifstream snap(root / "run_pre" / "resolved_config.json");
    REQUIRE(snap.good());
    json resolved = json::parse(snap);
    CHECK(resolved["seed"].get<std::uint64_t>() == 9);
    CHECK(resolved["sched"]["total_epochs"].get<int>() == 2);
    CHECK(resolved["opt"]["batch_size"].get<int>() == 1);

    const auto bad = run_cli(root, "pretrain --config cfg_pre.json --run-dir run_x --lr0 -2");
    CAPTURE(bad.out);
    CHECK(bad.code == 2);
    CHECK(contains(bad.out, "lr0"));
}
