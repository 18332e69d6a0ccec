// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mtlvqe/cli/run_config.hpp"
#include "mtlvqe/eval/bdrate.hpp"
#include "mtlvqe/eval/inspect.hpp"
#include "mtlvqe/eval/plot.hpp"
#include "mtlvqe/eval/report.hpp"
#include "mtlvqe/img/ppm.hpp"
#include "mtlvqe/priors.hpp"
#include "mtlvqe/version.hpp"

namespace {

using namespace mtlvqe;
namespace fs = std::filesystem;

// ---- plumbing ----

/// Exclusive marker so two invocations cannot share a run directory.
/// Distinct directories stay independent.
struct RunLock {
    std::string path;

    explicit RunLock(const std::string& dir) {
        fs::create_directories(dir);
        path = (fs::path(dir) / ".lock").string();
        std::FILE* f = std::fopen(path.c_str(), "wx");
        if (!f)
            throw DataError("run directory " + dir + " is locked by another invocation (remove " + path +
                            " if it is stale)");
        std::fputs("locked\n", f);
        std::fclose(f);
    }
    ~RunLock() {
        if (!path.empty()) std::remove(path.c_str());
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;
};

void fail_if(std::vector<std::string>& bad, const std::string& cmd) {
    if (bad.empty()) return;
    std::string msg = cmd + ": configuration is incomplete (" + std::to_string(bad.size()) + " problem(s)):";
    for (const auto& b : bad) msg += "\n  - " + b;
    throw ConfigError(msg);
}

/// The resolved config plus the command line that reproduces the run.
void write_snapshot(const std::string& dir, const std::string& command, const RunConfig& cfg) {
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "resolved_config.json", std::ios::trunc);
        out << run_config_to_json(cfg).dump(2) << "\n";
    }
    std::ofstream inv(fs::path(dir) / "invocation.txt", std::ios::trunc);
    inv << "mtlvqe " << command << " --config resolved_config.json\n";
}

struct MetricsCurves {
    std::vector<double> epoch, loss_sr, loss_qe, loss_mtl, val_sr, val_qe;
};

MetricsCurves read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    MetricsCurves c;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        std::vector<double> f;
        while (std::getline(ss, tok, ',')) f.push_back(std::strtod(tok.c_str(), nullptr));
        if (f.size() != 7) throw DataError(path + ": malformed metrics row '" + line + "'");
        c.epoch.push_back(f[0]);
        c.loss_sr.push_back(f[2]);
        c.loss_qe.push_back(f[3]);
        c.loss_mtl.push_back(f[4]);
        c.val_sr.push_back(f[5]);
        c.val_qe.push_back(f[6]);
    }
    return c;
}

bool any_finite(const std::vector<double>& v) {
    return std::any_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Convergence pictures next to a run's metrics.csv: the loss curves and,
/// when a validation split exists, the per-epoch validation PSNR.
void plot_run_curves(const std::string& run_dir) {
    const std::string mpath = (fs::path(run_dir) / "metrics.csv").string();
    if (!fs::exists(mpath)) return;
    const MetricsCurves c = read_metrics_csv(mpath);
    if (c.epoch.empty()) return;

    std::vector<PlotSeries> loss;
    if (any_finite(c.loss_sr)) loss.push_back({"loss_sr", c.epoch, c.loss_sr});
    if (any_finite(c.loss_qe)) loss.push_back({"loss_qe", c.epoch, c.loss_qe});
    if (any_finite(c.loss_mtl)) loss.push_back({"loss_mtl", c.epoch, c.loss_mtl});
    if (!loss.empty()) write_plot((fs::path(run_dir) / "loss.ppm").string(), loss, "train loss");

    std::vector<PlotSeries> val;
    if (any_finite(c.val_sr)) val.push_back({"val_psnr_sr", c.epoch, c.val_sr});
    if (any_finite(c.val_qe)) val.push_back({"val_psnr_qe", c.epoch, c.val_qe});
    if (!val.empty())
        write_plot((fs::path(run_dir) / "val_psnr.ppm").string(), val, "validation psnr (db)");
}

// ---- planning (dry runs) ----

std::vector<int> effective_qps(const AblationArm& arm, const Manifest& m) {
    std::vector<int> qps = arm.qps.empty() ? m.qps : arm.qps;
    std::sort(qps.begin(), qps.end());
    qps.erase(std::unique(qps.begin(), qps.end()), qps.end());
    return qps;
}

/// Updates after the last epoch under greedy stream batching, honoring the
/// max_updates stop at epoch boundaries.
long long planned_updates(long long n_per_epoch, long long epochs, int batch, long long max_updates) {
    if (max_updates > 0)
        for (long long e = 1; e <= epochs; ++e) {
            const long long u = e * n_per_epoch / batch;
            if (u >= max_updates) return u;
        }
    return epochs * n_per_epoch / batch;
}

void print_plan(const std::string& name, long long images, const RunConfig& cfg, int qp_count) {
    const long long n = images * cfg.train.patches_per_image;
    const long long epochs =
        static_cast<long long>(cfg.sched.total_epochs) * cfg.sched.epoch_multiplier * qp_count;
    const long long u = planned_updates(n, epochs, cfg.opt.batch_size, cfg.train.max_updates);
    std::printf("plan %-12s train_images %lld  samples/epoch %lld  epochs %lld  batch %d  -> %lld updates\n",
                name.c_str(), images, n, epochs, cfg.opt.batch_size, u);
}

void print_dry_header(const RunConfig& cfg) {
    std::printf("dry run: nothing executed\nresolved config:\n%s\n",
                run_config_to_json(cfg).dump(2).c_str());
}

// ---- shared pieces ----

/// Reports every accumulated configuration problem, then loads the manifest
/// so IO failures surface as data errors rather than config ones.
Manifest load_data(const RunConfig& cfg, std::vector<std::string>& bad, const std::string& cmd) {
    const std::string mpath = cfg.manifest_path();
    if (mpath.empty()) bad.push_back("paths.manifest (or paths.data_dir) is required");
    fail_if(bad, cmd);
    return load_manifest(mpath);
}

std::string sequence_of(const ManifestEntry& e) {
    const std::string suffix = "_q" + std::to_string(e.qp);
    if (e.id.size() > suffix.size() && e.id.compare(e.id.size() - suffix.size(), suffix.size(), suffix) == 0)
        return e.id.substr(0, e.id.size() - suffix.size());
    return e.id;
}

template <typename Scalar>
Tensor3<Scalar> model_input(const ImageRgb8& src, int qp, bool qp_prior) {
    Tensor3<Scalar> x = to_tensor<Scalar>(src);
    if (qp_prior) return concat_prior(x, make_qp_map(qp, x.h, x.w));
    return concat_zero_prior(x);
}

/// Checkpoint whose architecture the user also pinned in the config must
/// match it; the diff names every field that does not.
void check_net_matches(const RunConfig& cfg, const NetworkConfig& loaded) {
    if (!cfg.net_in_file) return;
    const auto diff = diff_network_configs(cfg.net, loaded);
    if (diff.empty()) return;
    std::string msg = "checkpoint architecture differs from the configured net:";
    for (const auto& d : diff) msg += "\n  - " + d + " (config vs checkpoint)";
    throw CheckpointError(msg);
}

void print_runs(const std::vector<ArmRun>& runs) {
    for (const auto& r : runs) {
        const TrainResult& t = r.result;
        std::printf("run %s: epochs %d, updates %lld, best epoch %d\n",
                    r.qp < 0 ? "multi-qp" : ("qp" + std::to_string(r.qp)).c_str(), t.epochs_run,
                    t.total_updates, t.best_epoch);
        if (!r.run_dir.empty()) plot_run_curves(r.run_dir);
    }
}

// ---- subcommands ----

int cmd_prepare(RunConfig cfg) {
    std::vector<std::string> bad;
    if (cfg.paths.hr_dir.empty()) bad.push_back("paths.hr_dir is required");
    if (cfg.paths.data_dir.empty()) bad.push_back("paths.data_dir is required");
    fail_if(bad, "prepare");

    RunLock lock(cfg.paths.data_dir);
    write_snapshot(cfg.paths.data_dir, "prepare", cfg);
    const SplitRule split{cfg.data.val_count, cfg.data.test_count};
    const BuildManifestResult res =
        build_manifest(cfg.paths.hr_dir, cfg.data.qps, cfg.degrader, cfg.data.r, split, cfg.paths.data_dir);
    if (res.manifest.entries.empty())
        throw DataError("prepared manifest is empty: no usable sources in " + cfg.paths.hr_dir);
    std::printf("manifest %s: %zu entries (%d new entries, %d reused, %d skipped sources)\n",
                (fs::path(cfg.paths.data_dir) / "manifest.txt").string().c_str(),
                res.manifest.entries.size(), res.new_entries, res.reused_entries, res.skipped_sources);
    return 0;
}

int cmd_pretrain(RunConfig cfg, bool dry) {
    std::vector<std::string> bad;
    if (!cfg.net.head_sr) bad.push_back("net.head_sr must be enabled: pretraining optimizes the SR objective");
    if (!dry && cfg.paths.run_dir.empty()) bad.push_back("paths.run_dir is required");
    const Manifest data = load_data(cfg, bad, "pretrain");

    // The QE head stays out of the pretraining snapshot so that fine-tuning
    // starts it from a fresh initialization.
    cfg.net.head_qe = false;
    if (dry) {
        print_dry_header(cfg);
        print_plan("pretrain", static_cast<long long>(data.select("train").size()), cfg, 1);
        return 0;
    }

    RunLock lock(cfg.paths.run_dir);
    write_snapshot(cfg.paths.run_dir, "pretrain", cfg);
    Model<float> model(cfg.net);
    model.init_weights(cfg.seed);
    TrainOptions o = cfg.train_options();
    o.run_dir = cfg.paths.run_dir;
    const TrainResult res = pretrain_sr(model, data, o);
    plot_run_curves(cfg.paths.run_dir);
    std::printf("pretrain: epochs %d, updates %lld, final %s\n", res.epochs_run, res.total_updates,
                res.final_path.c_str());
    return 0;
}

int cmd_train(RunConfig cfg, bool dry) {
    std::vector<std::string> bad;
    if (!dry && cfg.arm.fine_tune && cfg.paths.pretrain_checkpoint.empty())
        bad.push_back("arm.fine_tune needs paths.pretrain_checkpoint");
    if (!dry && cfg.paths.run_dir.empty()) bad.push_back("paths.run_dir is required");
    const Manifest data = load_data(cfg, bad, "train");
    const std::vector<int> qps = effective_qps(cfg.arm, data);
    if (!cfg.train.resume_from.empty() && !cfg.arm.multi_qp && qps.size() > 1)
        throw ConfigError("train: train.resume_from resumes a single run; a per-QP arm over " +
                          std::to_string(qps.size()) + " QPs starts several");

    if (dry) {
        print_dry_header(cfg);
        if (cfg.arm.multi_qp) {
            long long n = 0;
            for (int q : qps) n += static_cast<long long>(data.select("train", q).size());
            print_plan("multi-qp", n, cfg, 1);
        } else {
            for (int q : qps)
                print_plan("qp" + std::to_string(q),
                           static_cast<long long>(data.select("train", q).size()), cfg,
                           static_cast<int>(qps.size()));
        }
        return 0;
    }

    RunLock lock(cfg.paths.run_dir);
    write_snapshot(cfg.paths.run_dir, "train", cfg);
    TrainOptions o = cfg.train_options();
    o.run_dir = cfg.paths.run_dir;
    const auto runs = run_arm<float>(data, cfg.net, cfg.arm, o, cfg.paths.pretrain_checkpoint);
    print_runs(runs);
    return 0;
}

int cmd_ablate(RunConfig cfg, bool dry) {
    std::vector<std::string> bad;
    if (cfg.arms.empty()) cfg.arms = default_ablation_arms();
    bool any_ft = false;
    for (const auto& a : cfg.arms) any_ft = any_ft || a.fine_tune;
    if (!dry && any_ft && cfg.paths.pretrain_checkpoint.empty())
        bad.push_back("a fine-tuning arm needs paths.pretrain_checkpoint");
    if (!dry && cfg.paths.run_dir.empty()) bad.push_back("paths.run_dir is required");
    const Manifest data = load_data(cfg, bad, "ablate");

    if (dry) {
        print_dry_header(cfg);
        for (std::size_t i = 0; i < cfg.arms.size(); ++i) {
            const auto qps = effective_qps(cfg.arms[i], data);
            const std::string name = "arm" + std::to_string(i) + "-" + cfg.arms[i].label();
            if (cfg.arms[i].multi_qp) {
                long long n = 0;
                for (int q : qps) n += static_cast<long long>(data.select("train", q).size());
                print_plan(name, n, cfg, 1);
            } else {
                for (int q : qps)
                    print_plan(name + "/qp" + std::to_string(q),
                               static_cast<long long>(data.select("train", q).size()), cfg,
                               static_cast<int>(qps.size()));
            }
        }
        return 0;
    }

    RunLock lock(cfg.paths.run_dir);
    write_snapshot(cfg.paths.run_dir, "ablate", cfg);
    TrainOptions base = cfg.train_options();
    const AblationReport rep = run_ablation<float>(data, cfg.net, cfg.arms, base,
                                                   cfg.paths.pretrain_checkpoint, cfg.paths.run_dir);
    for (const auto& arm : rep.arms)
        for (const auto& r : arm.runs)
            if (!r.run_dir.empty()) plot_run_curves(r.run_dir);
    std::fputs(rep.table.c_str(), stdout);
    int failed = 0;
    for (const auto& arm : rep.arms)
        if (!arm.error.empty()) {
            ++failed;
            std::fprintf(stderr, "error: %s\n", arm.error.c_str());
        }
    std::printf("report: %s\n", (fs::path(cfg.paths.run_dir) / "ablation_report.txt").string().c_str());
    return failed == 0 ? 0 : 1;
}

int cmd_eval(RunConfig cfg) {
    std::vector<std::string> bad;
    if (cfg.paths.checkpoint.empty()) bad.push_back("paths.checkpoint is required");
    if (cfg.paths.run_dir.empty()) bad.push_back("paths.run_dir is required");
    const Manifest data = load_data(cfg, bad, "eval");

    nlohmann::json meta;
    const Model<float> model = load_model_checkpoint<float>(cfg.paths.checkpoint, nullptr, &meta);
    check_net_matches(cfg, model.config());
    cfg.net = model.config();
    if (cfg.net.in_channels != 4)
        throw ConfigError("evaluation feeds RGB + one prior channel; the checkpoint model has in_channels=" +
                          std::to_string(cfg.net.in_channels));
    if (cfg.net.head_sr && cfg.net.scale_factor != data.r)
        throw ConfigError("model scale_factor " + std::to_string(cfg.net.scale_factor) +
                          " does not match manifest r=" + std::to_string(data.r));

    // Feed the prior the way the checkpoint was trained; fall back to the
    // configured arm for checkpoints without a training cursor.
    bool qp_prior = cfg.arm.use_qp_map;
    if (meta.contains("train") && meta.at("train").contains("fingerprint"))
        qp_prior = meta.at("train").at("fingerprint").value("use_qp_map", qp_prior);

    const auto entries = data.select(cfg.eval.split);
    if (entries.empty()) throw DataError("split '" + cfg.eval.split + "' is empty in " + cfg.manifest_path());

    RunLock lock(cfg.paths.run_dir);
    write_snapshot(cfg.paths.run_dir, "eval", cfg);

    std::vector<EvalRow> rows;
    for (const auto* e : entries) {
        const SampleImages im = load_sample(data, *e);
        const Tensor3<float> x = model_input<float>(im.lr_decoded, e->qp, qp_prior);
        const Tensor3<float> y = model.forward_shared(x);
        EvalRow row;
        row.image_id = e->id;
        row.sequence = sequence_of(*e);
        row.dataset = cfg.eval.dataset;
        row.qp = e->qp;
        if (cfg.net.head_sr) {
            const DeltaMetrics dm =
                delta_metrics(from_tensor(model.forward_sr(y)), bicubic_upscale(im.lr_decoded, data.r), im.hr);
            EvalRow r = row;
            r.task = "sr";
            r.anchor = "bicubic";
            r.psnr = dm.psnr;
            r.d_psnr = dm.d_psnr;
            r.ssim = dm.ssim;
            r.d_ssim = dm.d_ssim;
            rows.push_back(r);
        }
        if (cfg.net.head_qe) {
            const DeltaMetrics dm = delta_metrics(from_tensor(model.forward_qe(y)), im.lr_decoded, im.lr);
            EvalRow r = row;
            r.task = "qe";
            r.anchor = "decoded";
            r.psnr = dm.psnr;
            r.d_psnr = dm.d_psnr;
            r.ssim = dm.ssim;
            r.d_ssim = dm.d_ssim;
            rows.push_back(r);
        }
    }

    const std::string table = emit_report(rows, ReportFormat::table_text);
    {
        std::ofstream csv(fs::path(cfg.paths.run_dir) / "report.csv", std::ios::trunc);
        csv << emit_report(rows, ReportFormat::csv);
        std::ofstream txt(fs::path(cfg.paths.run_dir) / "report.txt", std::ios::trunc);
        txt << table;
    }
    std::fputs(table.c_str(), stdout);
    std::printf("report: %s (%zu rows)\n", (fs::path(cfg.paths.run_dir) / "report.csv").string().c_str(),
                rows.size());
    return 0;
}

struct RdGroup {
    RDCurve test, reference;
};

std::map<std::pair<std::string, std::string>, RdGroup> parse_rd_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open rate-quality csv " + path);
    std::string line;
    if (!std::getline(in, line) || line != "sequence,task,curve,rate,quality")
        throw DataError(path + ": expected header 'sequence,task,curve,rate,quality'");
    std::map<std::pair<std::string, std::string>, RdGroup> groups;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string seq, task, curve, rate_s, qual_s;
        if (!std::getline(ss, seq, ',') || !std::getline(ss, task, ',') || !std::getline(ss, curve, ',') ||
            !std::getline(ss, rate_s, ',') || !std::getline(ss, qual_s))
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed row '" + line + "'");
        char* end = nullptr;
        const double rate = std::strtod(rate_s.c_str(), &end);
        if (end == rate_s.c_str() || *end)
            throw DataError(path + ":" + std::to_string(lineno) + ": bad rate '" + rate_s + "'");
        const double qual = std::strtod(qual_s.c_str(), &end);
        if (end == qual_s.c_str() || *end)
            throw DataError(path + ":" + std::to_string(lineno) + ": bad quality '" + qual_s + "'");
        RdGroup& g = groups[{seq, task}];
        if (curve == "test")
            g.test.points.push_back({rate, qual});
        else if (curve == "reference")
            g.reference.points.push_back({rate, qual});
        else
            throw DataError(path + ":" + std::to_string(lineno) + ": curve must be test or reference, got '" +
                            curve + "'");
    }
    for (auto& [key, g] : groups) {
        g.test.label = key.first + "/" + key.second + "/test";
        g.reference.label = key.first + "/" + key.second + "/reference";
        auto by_rate = [](const RDPoint& a, const RDPoint& b) { return a.rate < b.rate; };
        std::sort(g.test.points.begin(), g.test.points.end(), by_rate);
        std::sort(g.reference.points.begin(), g.reference.points.end(), by_rate);
    }
    return groups;
}

int cmd_bdrate(RunConfig cfg) {
    std::vector<std::string> bad;
    if (cfg.paths.rd_csv.empty()) bad.push_back("paths.rd_csv is required");
    if (cfg.paths.run_dir.empty()) bad.push_back("paths.run_dir is required");
    fail_if(bad, "bdrate");

    const auto groups = parse_rd_csv(cfg.paths.rd_csv);
    if (groups.empty()) throw DataError(cfg.paths.rd_csv + " holds no measurements");

    RunLock lock(cfg.paths.run_dir);
    write_snapshot(cfg.paths.run_dir, "bdrate", cfg);

    struct Cell {
        double percent = 0.0;
        bool monotone = true;
        bool present = false;
    };
    std::map<std::string, std::map<std::string, Cell>> table;  // sequence -> task -> cell
    std::vector<std::string> tasks;
    std::ofstream csv(fs::path(cfg.paths.run_dir) / "bdrate.csv", std::ios::trunc);
    csv << "sequence,task,bd_rate_percent,monotone_fit\n";
    for (const auto& [key, g] : groups) {
        const BdRateResult r = bd_rate(g.test, g.reference);
        table[key.first][key.second] = {r.percent, r.monotone_fit, true};
        if (std::find(tasks.begin(), tasks.end(), key.second) == tasks.end()) tasks.push_back(key.second);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", r.percent);
        csv << key.first << ',' << key.second << ',' << buf << ',' << (r.monotone_fit ? 1 : 0) << '\n';
    }
    std::sort(tasks.begin(), tasks.end());

    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> hdr{"sequence"};
    hdr.insert(hdr.end(), tasks.begin(), tasks.end());
    grid.push_back(hdr);
    std::map<std::string, std::pair<double, int>> sums;
    char buf[64];
    for (const auto& [seq, cells] : table) {
        std::vector<std::string> row{seq};
        for (const auto& t : tasks) {
            const auto it = cells.find(t);
            if (it == cells.end() || !it->second.present) {
                row.push_back("-");
                continue;
            }
            std::snprintf(buf, sizeof buf, "%.2f%s", it->second.percent, it->second.monotone ? "" : "!");
            row.push_back(buf);
            sums[t].first += it->second.percent;
            ++sums[t].second;
        }
        grid.push_back(row);
    }
    std::vector<std::string> avg{"average"};
    for (const auto& t : tasks) {
        if (!sums.count(t) || sums[t].second == 0) {
            avg.push_back("-");
            continue;
        }
        std::snprintf(buf, sizeof buf, "%.2f", sums[t].first / sums[t].second);
        avg.push_back(buf);
    }
    grid.push_back(avg);

    std::vector<std::size_t> widths(grid[0].size(), 0);
    for (const auto& row : grid)
        for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
    std::ostringstream txt;
    txt << "BD-rate (%) of test vs reference, negative saves rate\n\n";
    for (const auto& row : grid) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::string cell = row[i];
            if (i + 1 < row.size()) cell.resize(widths[i] + 2, ' ');
            txt << cell;
        }
        txt << "\n";
    }
    bool any_warn = false;
    for (const auto& [seq, cells] : table)
        for (const auto& [t, c] : cells) any_warn = any_warn || (c.present && !c.monotone);
    if (any_warn) txt << "\n! the fitted cubic bends backwards over the evaluated range\n";

    std::ofstream out(fs::path(cfg.paths.run_dir) / "bdrate.txt", std::ios::trunc);
    out << txt.str();
    std::fputs(txt.str().c_str(), stdout);
    return 0;
}

int cmd_inspect(RunConfig cfg) {
    std::vector<std::string> bad;
    if (cfg.paths.checkpoint.empty()) bad.push_back("paths.checkpoint is required");
    if (cfg.paths.run_dir.empty()) bad.push_back("paths.run_dir is required");
    if (cfg.inspect.layers.empty()) bad.push_back("inspect.layers must list at least one tap");
    if (cfg.inspect.images.empty() && cfg.manifest_path().empty())
        bad.push_back("inspect.images or a manifest is required for input frames");
    fail_if(bad, "inspect");

    const Model<float> model = load_model_checkpoint<float>(cfg.paths.checkpoint);
    check_net_matches(cfg, model.config());
    cfg.net = model.config();
    if (cfg.net.in_channels != 4)
        throw ConfigError("inspection feeds RGB + one prior channel; the checkpoint model has in_channels=" +
                          std::to_string(cfg.net.in_channels));

    struct Input {
        std::string name;
        ImageRgb8 img;
        int qp;
    };
    std::vector<Input> inputs;
    if (!cfg.inspect.images.empty()) {
        for (const auto& p : cfg.inspect.images)
            inputs.push_back({fs::path(p).stem().string(), read_ppm(p), cfg.inspect.qp});
    } else {
        Manifest data = load_manifest(cfg.manifest_path());
        const auto entries = data.select(cfg.eval.split);
        if (entries.empty())
            throw DataError("split '" + cfg.eval.split + "' is empty in " + cfg.manifest_path());
        for (const auto* e : entries) inputs.push_back({e->id, load_sample(data, *e).lr_decoded, e->qp});
    }

    RunLock lock(cfg.paths.run_dir);
    write_snapshot(cfg.paths.run_dir, "inspect", cfg);
    const fs::path outdir = fs::path(cfg.paths.run_dir) / "inspect";
    fs::create_directories(outdir);
    int written = 0;
    for (const auto& in : inputs) {
        const Tensor3<float> x = model_input<float>(in.img, in.qp, cfg.inspect.use_qp_map);
        const auto maps = average_feature_maps(model, x, cfg.inspect.layers);
        for (const auto& fm : maps) {
            const std::string path = (outdir / (in.name + "_" + fm.layer + ".pgm")).string();
            write_pgm(path, normalize_to_plane(fm.mean));
            ++written;
        }
    }
    std::printf("inspect: wrote %d maps for %zu inputs under %s\n", written, inputs.size(),
                outdir.string().c_str());
    return 0;
}

// ---- flag overrides ----

struct Overrides {
    std::string config;
    std::string hr_dir, data_dir, manifest, run_dir, pretrain_ckpt, checkpoint, rd_csv, resume;
    std::string split, dataset;
    std::vector<std::string> layers, images;
    std::vector<int> qps;
    std::uint64_t seed = 0;
    double alpha = 0.0, lr0 = 0.0;
    int epochs = 0, batch = 0, patch = 0;
    long long max_updates = 0;
    int multi_qp = -1, use_qp_map = -1, fine_tune = -1;
    bool dry = false;
};

/// Every flag maps onto one config key; set_if applies it only when the
/// option was actually passed.
void apply_overrides(const CLI::App* sub, const Overrides& ov, RunConfig& cfg) {
    auto passed = [&](const std::string& name) {
        const CLI::Option* o = sub->get_option_no_throw(name);
        return o != nullptr && o->count() > 0;
    };
    if (passed("--hr-dir")) cfg.paths.hr_dir = ov.hr_dir;
    if (passed("--data-dir")) cfg.paths.data_dir = ov.data_dir;
    if (passed("--manifest")) cfg.paths.manifest = ov.manifest;
    if (passed("--run-dir")) cfg.paths.run_dir = ov.run_dir;
    if (passed("--pretrain-ckpt")) cfg.paths.pretrain_checkpoint = ov.pretrain_ckpt;
    if (passed("--checkpoint")) cfg.paths.checkpoint = ov.checkpoint;
    if (passed("--rd-csv")) cfg.paths.rd_csv = ov.rd_csv;
    if (passed("--resume")) cfg.train.resume_from = ov.resume;
    if (passed("--seed")) cfg.seed = ov.seed;
    if (passed("--alpha")) cfg.net.alpha = ov.alpha;
    if (passed("--lr0")) cfg.opt.lr0 = ov.lr0;
    if (passed("--epochs")) cfg.sched.total_epochs = ov.epochs;
    if (passed("--batch-size")) cfg.opt.batch_size = ov.batch;
    if (passed("--patch-size")) cfg.train.patch_size = ov.patch;
    if (passed("--max-updates")) cfg.train.max_updates = ov.max_updates;
    if (passed("--qps")) {
        cfg.data.qps = ov.qps;
        cfg.arm.qps = ov.qps;
    }
    if (passed("--multi-qp")) cfg.arm.multi_qp = ov.multi_qp != 0;
    if (passed("--qp-map")) cfg.arm.use_qp_map = ov.use_qp_map != 0;
    if (passed("--fine-tune")) cfg.arm.fine_tune = ov.fine_tune != 0;
    if (passed("--split")) cfg.eval.split = ov.split;
    if (passed("--dataset")) cfg.eval.dataset = ov.dataset;
    if (passed("--layers")) cfg.inspect.layers = ov.layers;
    if (passed("--image")) cfg.inspect.images = ov.images;
}

void validate_overridden(const RunConfig& cfg) {
    cfg.net.validate();
    cfg.opt.validate();
    cfg.sched.validate();
    cfg.train_options().validate();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multitask super-resolution and quality enhancement for intra-coded frames"};
    app.set_version_flag("--version", std::string("mtlvqe ") + mtlvqe::version());
    app.require_subcommand(1);

    Overrides ov;
    std::map<const CLI::App*, std::string> names;
    int rc = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", ov.config, "JSON run configuration")->required();
        sub->add_option("--run-dir", ov.run_dir, "output directory (paths.run_dir)");
        sub->add_option("--seed", ov.seed, "RNG seed (seed)");
        return sub;
    };
    auto add_train_flags = [&](CLI::App* sub) {
        sub->add_option("--manifest", ov.manifest, "manifest file (paths.manifest)");
        sub->add_option("--epochs", ov.epochs, "schedule length (sched.total_epochs)");
        sub->add_option("--batch-size", ov.batch, "minibatch size (opt.batch_size)");
        sub->add_option("--lr0", ov.lr0, "starting learning rate (opt.lr0)");
        sub->add_option("--alpha", ov.alpha, "SR weight in the multitask loss (net.alpha)");
        sub->add_option("--patch-size", ov.patch, "training crop edge (train.patch_size)");
        sub->add_option("--max-updates", ov.max_updates, "stop past this many updates (train.max_updates)");
        sub->add_option("--resume", ov.resume, "resume checkpoint (train.resume_from)");
        sub->add_flag("--dry-run", ov.dry, "print the resolved config and planned updates, run nothing");
        return sub;
    };

    CLI::App* prepare = add_common(app.add_subcommand("prepare", "render the dataset and its manifest"));
    prepare->add_option("--hr-dir", ov.hr_dir, "source image directory (paths.hr_dir)");
    prepare->add_option("--data-dir", ov.data_dir, "dataset output root (paths.data_dir)");
    prepare->add_option("--qps", ov.qps, "QP list (data.qps)")->delimiter(',');

    CLI::App* pretrain =
        add_train_flags(add_common(app.add_subcommand("pretrain", "SR pretraining on clean pairs")));

    CLI::App* train = add_train_flags(add_common(app.add_subcommand("train", "multitask training, one arm")));
    train->add_option("--pretrain-ckpt", ov.pretrain_ckpt, "pretrained weights (paths.pretrain_checkpoint)");
    train->add_option("--multi-qp", ov.multi_qp, "1 joint model, 0 one per QP (arm.multi_qp)")
        ->check(CLI::Range(0, 1));
    train->add_option("--qp-map", ov.use_qp_map, "feed the QP prior plane (arm.use_qp_map)")
        ->check(CLI::Range(0, 1));
    train->add_option("--fine-tune", ov.fine_tune, "start from pretrained weights (arm.fine_tune)")
        ->check(CLI::Range(0, 1));
    train->add_option("--qps", ov.qps, "QP subset for the arm (arm.qps)")->delimiter(',');

    CLI::App* ablate = add_train_flags(add_common(app.add_subcommand("ablate", "run the ablation matrix")));
    ablate->add_option("--pretrain-ckpt", ov.pretrain_ckpt, "pretrained weights (paths.pretrain_checkpoint)");

    CLI::App* eval = add_common(app.add_subcommand("eval", "metric report for a checkpoint"));
    eval->add_option("--manifest", ov.manifest, "manifest file (paths.manifest)");
    eval->add_option("--checkpoint", ov.checkpoint, "model to evaluate (paths.checkpoint)");
    eval->add_option("--split", ov.split, "manifest split to score (eval.split)");
    eval->add_option("--dataset", ov.dataset, "dataset label in the report (eval.dataset)");

    CLI::App* bdrate = add_common(app.add_subcommand("bdrate", "BD-rate table from rate-quality points"));
    bdrate->add_option("--rd-csv", ov.rd_csv, "measurement csv (paths.rd_csv)");

    CLI::App* inspect = add_common(app.add_subcommand("inspect", "average feature maps per layer"));
    inspect->add_option("--manifest", ov.manifest, "manifest file (paths.manifest)");
    inspect->add_option("--checkpoint", ov.checkpoint, "model to inspect (paths.checkpoint)");
    inspect->add_option("--layers", ov.layers, "tap names (inspect.layers)")->delimiter(',');
    inspect->add_option("--image", ov.images, "input .ppm, repeatable (inspect.images)");
    inspect->add_option("--split", ov.split, "manifest split to read inputs from (eval.split)");

    names[prepare] = "prepare";
    names[pretrain] = "pretrain";
    names[train] = "train";
    names[ablate] = "ablate";
    names[eval] = "eval";
    names[bdrate] = "bdrate";
    names[inspect] = "inspect";

    try {
        app.parse(argc, argv);
        CLI::App* sub = app.get_subcommands().at(0);
        RunConfig cfg = load_run_config(ov.config);
        apply_overrides(sub, ov, cfg);
        validate_overridden(cfg);
        const std::string& cmd = names.at(sub);
        if (cmd == "prepare") rc = cmd_prepare(std::move(cfg));
        else if (cmd == "pretrain") rc = cmd_pretrain(std::move(cfg), ov.dry);
        else if (cmd == "train") rc = cmd_train(std::move(cfg), ov.dry);
        else if (cmd == "ablate") rc = cmd_ablate(std::move(cfg), ov.dry);
        else if (cmd == "eval") rc = cmd_eval(std::move(cfg));
        else if (cmd == "bdrate") rc = cmd_bdrate(std::move(cfg));
        else rc = cmd_inspect(std::move(cfg));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const DegraderError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        if (!e.diagnostics.empty()) std::fprintf(stderr, "%s\n", e.diagnostics.c_str());
        return 4;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const CheckpointError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return rc;
}
