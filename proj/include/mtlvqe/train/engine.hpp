// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtlvqe/config_json.hpp"
#include "mtlvqe/core/rng.hpp"
#include "mtlvqe/data/manifest.hpp"
#include "mtlvqe/data/patches.hpp"
#include "mtlvqe/eval/metrics.hpp"
#include "mtlvqe/img/resize.hpp"
#include "mtlvqe/loss.hpp"
#include "mtlvqe/train/adam.hpp"
#include "mtlvqe/train/checkpoint.hpp"
#include "mtlvqe/train/schedule.hpp"

namespace mtlvqe {

/// One column of the ablation matrix. With multi_qp off the arm trains one
/// model per QP, each with the epoch budget and decay step scaled by |qps|
/// so every trained model sees the same number of parameter updates.
struct AblationArm {
    bool multi_qp = true;
    bool use_qp_map = true;
    bool fine_tune = true;
    std::vector<int> qps;  // empty: every QP of the manifest

    std::string label() const {
        auto yn = [](bool b) { return b ? '1' : '0'; };
        return std::string("mq") + yn(multi_qp) + "-map" + yn(use_qp_map) + "-ft" + yn(fine_tune);
    }
};

inline void to_json(nlohmann::json& j, const AblationArm& a) {
    j = nlohmann::json{
        {"multi_qp", a.multi_qp}, {"use_qp_map", a.use_qp_map}, {"fine_tune", a.fine_tune}, {"qps", a.qps}};
}

inline void from_json(const nlohmann::json& j, AblationArm& a) {
    a.multi_qp = j.value("multi_qp", a.multi_qp);
    a.use_qp_map = j.value("use_qp_map", a.use_qp_map);
    a.fine_tune = j.value("fine_tune", a.fine_tune);
    a.qps = j.value("qps", a.qps);
}

struct TrainOptions {
    OptimizerConfig opt;
    ScheduleConfig sched;
    int patch_size = 64;        // lr-space patch edge
    int patches_per_image = 1;  // samples contributed by each train image per epoch
    std::uint64_t seed = 1;
    std::string run_dir;      // empty: keep everything in memory, write no files
    std::string resume_from;  // last.ckpt of an interrupted run
    double stop_below_loss = 0.0;  // > 0: stop once the epoch train loss drops below
    long long max_updates = 0;     // > 0: stop at the first epoch boundary past this many updates
    int log_every = 0;             // > 0: progress line on stderr every n epochs
    bool save_every_epoch = true;  // refresh last.ckpt after each epoch

    void validate() const {
        opt.validate();
        sched.validate();
        if (patch_size <= 0) throw ConfigError("patch_size must be > 0");
        if (patches_per_image <= 0) throw ConfigError("patches_per_image must be > 0");
        if (stop_below_loss < 0.0) throw ConfigError("stop_below_loss must be >= 0");
        if (max_updates < 0) throw ConfigError("max_updates must be >= 0");
    }
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double loss_sr = 0.0;  // epoch means over samples consumed by completed batches
    double loss_qe = 0.0;
    double loss_mtl = 0.0;
    double val_psnr_sr = 0.0;  // NaN when the head or split is absent
    double val_psnr_qe = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;  // epochs run by this invocation
    long long total_updates = 0;       // cumulative, includes pre-resume updates
    double best_val_score = -std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int epochs_run = 0;
    bool stopped_early = false;
    std::string best_path, last_path, final_path;
};

namespace engine_detail {

enum class TrainTask { pretrain_sr, mtl };

inline const char* task_name(TrainTask t) { return t == TrainTask::pretrain_sr ? "pretrain_sr" : "mtl"; }

struct Sample {
    int img = 0;
    int y = 0;
    int x = 0;
};

inline std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Epoch sample list: patches_per_image crops per train image, coordinates
/// drawn then shuffled under a seed derived from (seed, epoch). A pure
/// function of its inputs, which is what makes resume reconstruction and
/// bit-exact reruns possible.
inline std::vector<Sample> epoch_samples(const std::vector<SampleImages>& imgs, int patch,
                                         int patches_per_image, std::uint64_t seed, int epoch) {
    std::mt19937_64 rng(derive_seed(seed, "samples." + std::to_string(epoch)));
    std::vector<Sample> v;
    v.reserve(imgs.size() * static_cast<std::size_t>(patches_per_image));
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        std::uniform_int_distribution<int> dy(0, imgs[i].lr.h - patch);
        std::uniform_int_distribution<int> dx(0, imgs[i].lr.w - patch);
        for (int p = 0; p < patches_per_image; ++p) {
            const int y = dy(rng);
            const int x = dx(rng);
            v.push_back({static_cast<int>(i), y, x});
        }
    }
    std::shuffle(v.begin(), v.end(), rng);
    return v;
}

template <typename Scalar>
Tensor3<Scalar> make_input(const ImageRgb8& src, int qp, bool qp_prior) {
    Tensor3<Scalar> x = to_tensor<Scalar>(src);
    if (qp_prior) return concat_prior(x, make_qp_map(qp, x.h, x.w));
    return concat_zero_prior(x);
}

inline std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

/// The options that determine the parameter trajectory. A resumed run must
/// present the same fingerprint as the original or the curves would diverge.
inline nlohmann::json run_fingerprint(const NetworkConfig& net, TrainTask task, bool use_qp_map,
                                      const std::vector<int>& qps, const TrainOptions& opts) {
    return nlohmann::json{{"task", task_name(task)},
                          {"net", net},
                          {"use_qp_map", use_qp_map},
                          {"qps", qps},
                          {"opt", opts.opt},
                          {"sched", opts.sched},
                          {"patch_size", opts.patch_size},
                          {"patches_per_image", opts.patches_per_image},
                          {"seed", opts.seed}};
}

template <typename Scalar>
TrainResult run_training(Model<Scalar>& model, const Manifest& data, TrainTask task, bool use_qp_map,
                         std::vector<int> qps, const TrainOptions& opts) {
    namespace fs = std::filesystem;
    opts.validate();
    const NetworkConfig& cfg = model.config();
    if (cfg.in_channels != 4 || cfg.out_channels != 3)
        throw ConfigError("training feeds RGB + one prior channel; the model must have in_channels=4, "
                          "out_channels=3");
    if (task == TrainTask::pretrain_sr && !cfg.head_sr)
        throw ConfigError("pretraining optimizes the SR objective; the model has no SR head");
    if (cfg.head_sr && cfg.scale_factor != data.r)
        throw ConfigError("model scale_factor " + std::to_string(cfg.scale_factor) +
                          " does not match manifest r=" + std::to_string(data.r));
    if (task == TrainTask::mtl) {
        if (qps.empty()) qps = data.qps;
        std::sort(qps.begin(), qps.end());
        qps.erase(std::unique(qps.begin(), qps.end()), qps.end());
        for (int q : qps)
            if (std::find(data.qps.begin(), data.qps.end(), q) == data.qps.end())
                throw ConfigError("arm QP set {" + join_ints(qps) + "} is not covered by manifest QPs {" +
                                  join_ints(data.qps) + "}");
    }
    const double alpha = task == TrainTask::pretrain_sr ? 1.0 : cfg.effective_alpha();
    const bool prior_from_qp = task == TrainTask::mtl && use_qp_map;
    const bool want_qe_loss = task == TrainTask::mtl && cfg.head_qe;

    // Gather and load the split entries up front; every epoch touches all of
    // them, so keeping the decoded images resident is the right trade.
    auto gather = [&](const std::string& split) {
        std::vector<const ManifestEntry*> es;
        if (task == TrainTask::pretrain_sr) {
            es = data.select(split);
            for (const auto* e : es)
                if (e->degrader_id != "null")
                    throw ConfigError("pretraining requires an undegraded manifest; entry '" + e->id +
                                      "' was produced by degrader '" + e->degrader_id + "'");
        } else {
            for (int q : qps) {
                auto part = data.select(split, q);
                es.insert(es.end(), part.begin(), part.end());
            }
        }
        return es;
    };
    const auto train_entries = gather("train");
    const auto val_entries = gather("val");
    if (train_entries.empty()) throw ConfigError("train split is empty for this configuration");

    std::vector<SampleImages> train_imgs, val_imgs;
    std::vector<int> train_qps, val_qps;
    for (const auto* e : train_entries) {
        train_imgs.push_back(load_sample(data, *e));
        train_qps.push_back(e->qp);
        const auto& im = train_imgs.back();
        if (im.lr.h < opts.patch_size || im.lr.w < opts.patch_size)
            throw ConfigError("patch_size " + std::to_string(opts.patch_size) + " exceeds lr image '" +
                              e->id + "' (" + std::to_string(im.lr.h) + "x" + std::to_string(im.lr.w) + ")");
    }
    for (const auto* e : val_entries) {
        val_imgs.push_back(load_sample(data, *e));
        val_qps.push_back(e->qp);
    }

    const int patch = opts.patch_size;
    const int r = data.r;
    const long long n_per_epoch =
        static_cast<long long>(train_imgs.size()) * opts.patches_per_image;
    const long long total_epochs =
        static_cast<long long>(opts.sched.total_epochs) * opts.sched.epoch_multiplier;
    const int batch = opts.opt.batch_size;

    Adam<Scalar> adam(opts.opt);
    adam.attach(model);
    GradStore<Scalar> gs = model.make_grad_store();

    const nlohmann::json fp = run_fingerprint(cfg, task, use_qp_map, qps, opts);

    TrainResult res;
    long long start_epoch = 0;
    std::vector<Sample> pending;

    if (!opts.resume_from.empty()) {
        nlohmann::json meta;
        Model<Scalar> loaded = load_model_checkpoint<Scalar>(opts.resume_from, &adam, &meta);
        if (nlohmann::json(loaded.config()) != nlohmann::json(cfg))
            throw CheckpointError("resume checkpoint was trained with a different network config");
        if (!meta.contains("train")) throw CheckpointError("checkpoint has no training cursor: " + opts.resume_from);
        const nlohmann::json& tr = meta.at("train");
        if (tr.value("fingerprint", nlohmann::json()) != fp)
            throw ConfigError("resume options differ from the original run's; refusing to continue");
        const auto& params = model.params();
        const auto& src = loaded.params();
        for (std::size_t i = 0; i < params.size(); ++i) *params[i].tensor = *src[i].tensor;
        start_epoch = tr.at("epoch_next").get<long long>();
        res.total_updates = tr.at("global_step").get<long long>();
        res.best_epoch = tr.value("best_epoch", -1);
        if (tr.contains("best_score")) res.best_val_score = std::strtod(tr.at("best_score").get<std::string>().c_str(), nullptr);
        // The leftover of the sample stream is the tail of the epochs already
        // run: greedy batching leaves exactly (samples seen) mod batch behind.
        long long leftover = start_epoch * n_per_epoch - res.total_updates * batch;
        std::vector<std::vector<Sample>> chunks;
        for (long long ep = start_epoch - 1; ep >= 0 && leftover > 0; --ep) {
            auto s = epoch_samples(train_imgs, patch, opts.patches_per_image, opts.seed,
                                   static_cast<int>(ep));
            const long long take = std::min<long long>(leftover, static_cast<long long>(s.size()));
            chunks.emplace_back(s.end() - take, s.end());
            leftover -= take;
        }
        for (auto it = chunks.rbegin(); it != chunks.rend(); ++it)
            pending.insert(pending.end(), it->begin(), it->end());
    }

    std::ofstream metrics;
    std::string best_path, last_path, final_path;
    if (!opts.run_dir.empty()) {
        fs::create_directories(opts.run_dir);
        best_path = (fs::path(opts.run_dir) / "best.ckpt").string();
        last_path = (fs::path(opts.run_dir) / "last.ckpt").string();
        final_path = (fs::path(opts.run_dir) / "final.ckpt").string();
        const std::string cfg_path = (fs::path(opts.run_dir) / "config.json").string();
        if (start_epoch == 0 || !fs::exists(cfg_path)) {
            std::ofstream cf(cfg_path, std::ios::trunc);
            cf << fp.dump(2) << "\n";
        }
        const std::string metrics_path = (fs::path(opts.run_dir) / "metrics.csv").string();
        const bool fresh = start_epoch == 0 || !fs::exists(metrics_path);
        metrics.open(metrics_path, fresh ? std::ios::trunc : std::ios::app);
        if (!metrics) throw DataError("cannot open metrics log: " + metrics_path);
        if (fresh) metrics << "epoch,lr,loss_sr,loss_qe,loss_mtl,val_psnr_sr,val_psnr_qe\n";
    }

    auto save_ckpt = [&](const std::string& path, long long epoch_next) {
        nlohmann::json meta;
        meta["train"] = nlohmann::json{{"fingerprint", fp},
                                       {"epoch_next", epoch_next},
                                       {"global_step", res.total_updates},
                                       {"best_epoch", res.best_epoch}};
        if (res.best_epoch >= 0) meta["train"]["best_score"] = fmt_g17(res.best_val_score);
        save_model_checkpoint(path, model, meta, &adam);
    };

    auto consume_batch = [&](double lr, double& sum_sr, double& sum_qe, double& sum_mtl,
                             long long& n_seen) {
        gs.set_zero();
        for (const Sample& s : pending) {
            const SampleImages& im = train_imgs[s.img];
            const ImageRgb8& src = task == TrainTask::pretrain_sr ? im.lr : im.lr_decoded;
            Tensor3<Scalar> x = make_input<Scalar>(crop(src, s.y, s.x, patch, patch), train_qps[s.img],
                                                   prior_from_qp);
            std::optional<Tensor3<Scalar>> tsr, tqe;
            if (cfg.head_sr)
                tsr = to_tensor<Scalar>(crop(im.hr, r * s.y, r * s.x, r * patch, r * patch));
            if (want_qe_loss) tqe = to_tensor<Scalar>(crop(im.lr, s.y, s.x, patch, patch));
            LossBreakdown lb = mtl_forward_backward(model, x, tsr ? &*tsr : nullptr,
                                                    tqe ? &*tqe : nullptr, alpha, gs);
            sum_sr += lb.loss_sr;
            sum_qe += lb.loss_qe;
            sum_mtl += lb.loss_mtl;
            ++n_seen;
        }
        const Scalar inv = Scalar(1.0 / static_cast<double>(pending.size()));
        for (auto& g : gs.g) g *= inv;
        adam.step(model, gs, lr);
        ++res.total_updates;
        pending.clear();
    };

    auto validate_now = [&](double& psnr_sr, double& psnr_qe) {
        psnr_sr = std::numeric_limits<double>::quiet_NaN();
        psnr_qe = std::numeric_limits<double>::quiet_NaN();
        if (val_imgs.empty()) return;
        double acc_sr = 0.0, acc_qe = 0.0;
        for (std::size_t i = 0; i < val_imgs.size(); ++i) {
            const SampleImages& im = val_imgs[i];
            const ImageRgb8& src = task == TrainTask::pretrain_sr ? im.lr : im.lr_decoded;
            Tensor3<Scalar> x = make_input<Scalar>(src, val_qps[i], prior_from_qp);
            Tensor3<Scalar> y = model.forward_shared(x);
            if (cfg.head_sr) acc_sr += psnr_luma(from_tensor(model.forward_sr(y)), im.hr);
            if (want_qe_loss) acc_qe += psnr_luma(from_tensor(model.forward_qe(y)), im.lr);
        }
        if (cfg.head_sr) psnr_sr = acc_sr / static_cast<double>(val_imgs.size());
        if (want_qe_loss) psnr_qe = acc_qe / static_cast<double>(val_imgs.size());
    };

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (long long e = start_epoch; e < total_epochs; ++e) {
        const double lr = lr_at(static_cast<int>(e), opts.sched, opts.opt.lr0);
        double sum_sr = 0.0, sum_qe = 0.0, sum_mtl = 0.0;
        long long n_seen = 0;
        for (const Sample& s : epoch_samples(train_imgs, patch, opts.patches_per_image, opts.seed,
                                             static_cast<int>(e))) {
            pending.push_back(s);
            if (static_cast<int>(pending.size()) == batch) consume_batch(lr, sum_sr, sum_qe, sum_mtl, n_seen);
        }

        EpochRecord rec;
        rec.epoch = static_cast<int>(e);
        rec.lr = lr;
        rec.loss_sr = n_seen ? sum_sr / static_cast<double>(n_seen) : nan;
        rec.loss_qe = n_seen ? sum_qe / static_cast<double>(n_seen) : nan;
        rec.loss_mtl = n_seen ? sum_mtl / static_cast<double>(n_seen) : nan;
        validate_now(rec.val_psnr_sr, rec.val_psnr_qe);
        res.history.push_back(rec);
        ++res.epochs_run;

        double score = 0.0;
        bool have_score = false;
        if (alpha > 0.0 && !std::isnan(rec.val_psnr_sr)) {
            score += alpha * rec.val_psnr_sr;
            have_score = true;
        }
        if (alpha < 1.0 && !std::isnan(rec.val_psnr_qe)) {
            score += (1.0 - alpha) * rec.val_psnr_qe;
            have_score = true;
        }
        if (have_score && score > res.best_val_score) {
            res.best_val_score = score;
            res.best_epoch = static_cast<int>(e);
            if (!best_path.empty()) save_ckpt(best_path, e + 1);
        }

        if (metrics.is_open()) {
            metrics << e << ',' << fmt_g17(rec.lr) << ',' << fmt_g17(rec.loss_sr) << ','
                    << fmt_g17(rec.loss_qe) << ',' << fmt_g17(rec.loss_mtl) << ','
                    << fmt_g17(rec.val_psnr_sr) << ',' << fmt_g17(rec.val_psnr_qe) << '\n';
            metrics.flush();
        }
        if (opts.log_every > 0 && e % opts.log_every == 0)
            std::fprintf(stderr, "[%s] epoch %lld lr %.3g loss %.6f val_sr %.3f val_qe %.3f\n",
                         task_name(task), e, lr, rec.loss_mtl, rec.val_psnr_sr, rec.val_psnr_qe);

        const bool hit_loss = opts.stop_below_loss > 0.0 && n_seen > 0 && rec.loss_mtl < opts.stop_below_loss;
        const bool hit_updates = opts.max_updates > 0 && res.total_updates >= opts.max_updates;
        if (!last_path.empty() && (opts.save_every_epoch || hit_loss || hit_updates || e + 1 == total_epochs))
            save_ckpt(last_path, e + 1);
        if (hit_loss || hit_updates) {
            res.stopped_early = true;
            break;
        }
    }

    if (!final_path.empty()) {
        const long long epoch_next = start_epoch + res.epochs_run;
        save_ckpt(final_path, epoch_next);
        if (!fs::exists(last_path)) save_ckpt(last_path, epoch_next);
        if (res.best_epoch < 0) fs::copy_file(final_path, best_path, fs::copy_options::overwrite_existing);
        res.best_path = best_path;
        res.last_path = last_path;
        res.final_path = final_path;
    }
    return res;
}

}  // namespace engine_detail

/// Super-resolution pretraining on clean pairs: input is the clean lr image
/// plus a zero prior, the target its source. Manifests holding degraded
/// entries are rejected for this mode.
template <typename Scalar>
TrainResult pretrain_sr(Model<Scalar>& model, const Manifest& data, const TrainOptions& opts) {
    return engine_detail::run_training(model, data, engine_detail::TrainTask::pretrain_sr, false, {}, opts);
}

/// Joint training: input is the decoded lr image plus the QP prior (zeros
/// when the arm disables the map), SR target the clean source, QE target the
/// clean lr image.
template <typename Scalar>
TrainResult train_mtl(Model<Scalar>& model, const Manifest& data, const AblationArm& arm,
                      const TrainOptions& opts) {
    return engine_detail::run_training(model, data, engine_detail::TrainTask::mtl, arm.use_qp_map, arm.qps,
                                       opts);
}

struct ArmRun {
    int qp = -1;  // -1: the single multi-QP run
    TrainResult result;
    std::string run_dir;
};

/// Executes one arm: a single run when multi_qp, otherwise one run per QP
/// with the epoch budget and decay step multiplied by |qps|. Fine-tuning
/// initializes trunk+SR from the pretrained checkpoint, leaves QE fresh, and
/// halves the starting learning rate.
template <typename Scalar>
std::vector<ArmRun> run_arm(const Manifest& data, const NetworkConfig& net, AblationArm arm,
                            TrainOptions opts, const std::string& pretrain_ckpt) {
    namespace fs = std::filesystem;
    if (arm.qps.empty()) arm.qps = data.qps;
    std::sort(arm.qps.begin(), arm.qps.end());
    arm.qps.erase(std::unique(arm.qps.begin(), arm.qps.end()), arm.qps.end());
    if (arm.fine_tune) {
        if (pretrain_ckpt.empty())
            throw ConfigError("arm " + arm.label() + " fine-tunes but no pretrained checkpoint was given");
        opts.opt.lr0 *= 0.5;
    }

    auto make_model = [&]() {
        Model<Scalar> m{net};
        m.init_weights(opts.seed);
        if (arm.fine_tune) {
            const auto missing = load_params_from_checkpoint(m, pretrain_ckpt);
            for (const auto& name : missing)
                if (name.rfind("head_qe.", 0) != 0)
                    throw CheckpointError("pretrained checkpoint does not cover parameter '" + name +
                                          "'; it is not a matching pretrain snapshot");
        }
        return m;
    };

    std::vector<ArmRun> runs;
    const std::string base_dir = opts.run_dir;
    if (arm.multi_qp) {
        TrainOptions o = opts;
        if (!base_dir.empty()) o.run_dir = (fs::path(base_dir) / "run").string();
        Model<Scalar> m = make_model();
        runs.push_back({-1, train_mtl(m, data, arm, o), o.run_dir});
    } else {
        for (int qp : arm.qps) {
            TrainOptions o = opts;
            o.sched.epoch_multiplier = opts.sched.epoch_multiplier * static_cast<int>(arm.qps.size());
            if (!base_dir.empty()) o.run_dir = (fs::path(base_dir) / ("qp" + std::to_string(qp))).string();
            AblationArm sub = arm;
            sub.qps = {qp};
            Model<Scalar> m = make_model();
            runs.push_back({qp, train_mtl(m, data, sub, o), o.run_dir});
        }
    }
    return runs;
}

struct AblationCell {
    double psnr = std::numeric_limits<double>::quiet_NaN();
    double d_psnr = std::numeric_limits<double>::quiet_NaN();
};

struct AblationRow {
    int qp = -1;  // -1: average over the arm's QPs
    AblationCell sr, qe;
};

struct ArmOutcome {
    AblationArm arm;
    std::string name;
    std::string error;  // empty: succeeded
    std::vector<ArmRun> runs;
    std::vector<AblationRow> rows;  // per QP, then the average row
};

struct AblationReport {
    std::vector<int> qps;
    std::vector<ArmOutcome> arms;
    std::string table;  // rendered text report
};

namespace engine_detail {

inline double mean_or_nan(double sum, long long n) {
    return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

inline double delta_guarded(double a, double b) { return a == b ? 0.0 : a - b; }

/// PSNR of an arm's best model against the task anchors, per QP. SR is
/// judged against the source with a bicubic upscale of the decoded image as
/// anchor; QE against the clean lr image with the decoded image as anchor.
template <typename Scalar>
std::vector<AblationRow> eval_arm(const Manifest& data, const AblationArm& arm,
                                  const std::vector<ArmRun>& runs, const std::string& split) {
    std::vector<AblationRow> rows;
    AblationRow avg;
    double asr = 0, asrd = 0, aqe = 0, aqed = 0;
    long long nsr = 0, nqe = 0;

    std::optional<Model<Scalar>> shared;  // the multi-QP model, loaded once
    if (arm.multi_qp) shared = load_model_checkpoint<Scalar>(runs.at(0).result.best_path);

    for (int qp : arm.qps) {
        std::optional<Model<Scalar>> per_qp;
        const Model<Scalar>* model = nullptr;
        if (arm.multi_qp) {
            model = &*shared;
        } else {
            auto it = std::find_if(runs.begin(), runs.end(), [&](const ArmRun& r) { return r.qp == qp; });
            if (it == runs.end()) throw ConfigError("arm " + arm.label() + " has no run for qp " + std::to_string(qp));
            per_qp = load_model_checkpoint<Scalar>(it->result.best_path);
            model = &*per_qp;
        }
        const auto entries = data.select(split, qp);
        if (entries.empty()) throw DataError("no '" + split + "' entries at qp " + std::to_string(qp));

        double psr = 0, psr_anchor = 0, pqe = 0, pqe_anchor = 0;
        for (const auto* e : entries) {
            SampleImages im = load_sample(data, *e);
            Tensor3<Scalar> x = make_input<Scalar>(im.lr_decoded, qp, arm.use_qp_map);
            Tensor3<Scalar> y = model->forward_shared(x);
            if (model->config().head_sr) {
                psr += psnr_luma(from_tensor(model->forward_sr(y)), im.hr);
                psr_anchor += psnr_luma(bicubic_upscale(im.lr_decoded, data.r), im.hr);
            }
            if (model->config().head_qe) {
                pqe += psnr_luma(from_tensor(model->forward_qe(y)), im.lr);
                pqe_anchor += psnr_luma(im.lr_decoded, im.lr);
            }
        }
        const auto n = static_cast<double>(entries.size());
        AblationRow row;
        row.qp = qp;
        if (model->config().head_sr) {
            row.sr.psnr = psr / n;
            row.sr.d_psnr = delta_guarded(psr / n, psr_anchor / n);
            asr += row.sr.psnr;
            asrd += row.sr.d_psnr;
            ++nsr;
        }
        if (model->config().head_qe) {
            row.qe.psnr = pqe / n;
            row.qe.d_psnr = delta_guarded(pqe / n, pqe_anchor / n);
            aqe += row.qe.psnr;
            aqed += row.qe.d_psnr;
            ++nqe;
        }
        rows.push_back(row);
    }
    avg.qp = -1;
    avg.sr.psnr = mean_or_nan(asr, nsr);
    avg.sr.d_psnr = mean_or_nan(asrd, nsr);
    avg.qe.psnr = mean_or_nan(aqe, nqe);
    avg.qe.d_psnr = mean_or_nan(aqed, nqe);
    rows.push_back(avg);
    return rows;
}

inline std::string render_cell(const AblationCell& c) {
    if (std::isnan(c.psnr)) return "-";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f (%+.2f)", c.psnr, c.d_psnr);
    return buf;
}

inline std::string render_ablation_table(const std::vector<int>& qps,
                                         const std::vector<ArmOutcome>& arms) {
    std::vector<std::vector<std::string>> grid;  // rows x columns
    std::vector<std::string> hdr0{"arm"}, hdr1{"multi_qp"}, hdr2{"qp_map"}, hdr3{"fine_tune"}, hdr4{"qp"};
    for (const auto& a : arms) {
        hdr0.push_back(a.name);
        hdr0.push_back("");
        hdr1.push_back(a.arm.multi_qp ? "yes" : "no");
        hdr1.push_back("");
        hdr2.push_back(a.arm.use_qp_map ? "yes" : "no");
        hdr2.push_back("");
        hdr3.push_back(a.arm.fine_tune ? "yes" : "no");
        hdr3.push_back("");
        hdr4.push_back("SR");
        hdr4.push_back("QE");
    }
    grid.push_back(hdr0);
    grid.push_back(hdr1);
    grid.push_back(hdr2);
    grid.push_back(hdr3);
    grid.push_back(hdr4);

    auto row_for = [&](int qp, const char* tag) {
        std::vector<std::string> row{tag};
        for (const auto& a : arms) {
            const AblationRow* found = nullptr;
            for (const auto& r : a.rows)
                if (r.qp == qp) found = &r;
            if (!a.error.empty()) {
                row.push_back("ERR");
                row.push_back("ERR");
            } else if (!found) {
                row.push_back("-");
                row.push_back("-");
            } else {
                row.push_back(render_cell(found->sr));
                row.push_back(render_cell(found->qe));
            }
        }
        grid.push_back(row);
    };
    for (int qp : qps) row_for(qp, std::to_string(qp).c_str());
    row_for(-1, "avg");

    std::vector<std::size_t> widths;
    for (const auto& row : grid) {
        if (widths.size() < row.size()) widths.resize(row.size(), 0);
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    }
    std::string out = "PSNR / delta-PSNR vs anchor, per (QP, task, arm)\n\n";
    for (const auto& row : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::string cell = row[c];
            cell.resize(widths[c], ' ');
            out += cell;
            out += c + 1 < row.size() ? "  " : "";
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += "\n";
    }
    bool any_err = false;
    for (const auto& a : arms)
        if (!a.error.empty()) {
            if (!any_err) out += "\nfailed arms:\n";
            any_err = true;
            out += "  " + a.error + "\n";
        }
    return out;
}

}  // namespace engine_detail

/// Runs every arm of the matrix with equalized update budgets, evaluates each
/// arm's best checkpoint against the task anchors, and renders the summary
/// table plus a machine-readable CSV. A failing arm is reported with its
/// identity attached and does not disturb the others.
template <typename Scalar>
AblationReport run_ablation(const Manifest& data, const NetworkConfig& net,
                            const std::vector<AblationArm>& arms, const TrainOptions& base,
                            const std::string& pretrain_ckpt, const std::string& out_dir) {
    namespace fs = std::filesystem;
    if (out_dir.empty()) throw ConfigError("run_ablation needs an output directory");
    if (arms.empty()) throw ConfigError("ablation matrix is empty");
    fs::create_directories(out_dir);

    AblationReport report;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        ArmOutcome outcome;
        outcome.arm = arms[i];
        if (outcome.arm.qps.empty()) outcome.arm.qps = data.qps;
        std::sort(outcome.arm.qps.begin(), outcome.arm.qps.end());
        outcome.arm.qps.erase(std::unique(outcome.arm.qps.begin(), outcome.arm.qps.end()),
                              outcome.arm.qps.end());
        outcome.name = "arm" + std::to_string(i) + "-" + outcome.arm.label();
        TrainOptions opts = base;
        opts.run_dir = (fs::path(out_dir) / outcome.name).string();
        try {
            outcome.runs = run_arm<Scalar>(data, net, outcome.arm, opts, pretrain_ckpt);
            const std::string split = data.select("test").empty() ? "val" : "test";
            outcome.rows = engine_detail::eval_arm<Scalar>(data, outcome.arm, outcome.runs, split);
        } catch (const std::exception& e) {
            outcome.error = outcome.name + ": " + e.what();
        }
        for (int q : outcome.arm.qps)
            if (std::find(report.qps.begin(), report.qps.end(), q) == report.qps.end())
                report.qps.push_back(q);
        report.arms.push_back(std::move(outcome));
    }
    std::sort(report.qps.begin(), report.qps.end());
    report.table = engine_detail::render_ablation_table(report.qps, report.arms);

    std::ofstream txt(fs::path(out_dir) / "ablation_report.txt", std::ios::trunc);
    txt << report.table;
    std::ofstream csv(fs::path(out_dir) / "ablation.csv", std::ios::trunc);
    csv << "arm,multi_qp,use_qp_map,fine_tune,qp,task,psnr,d_psnr\n";
    for (const auto& a : report.arms) {
        if (!a.error.empty()) continue;
        for (const auto& r : a.rows) {
            const std::string qp = r.qp < 0 ? "all" : std::to_string(r.qp);
            auto line = [&](const char* task, const AblationCell& c) {
                if (std::isnan(c.psnr)) return;
                csv << a.name << ',' << (a.arm.multi_qp ? 1 : 0) << ',' << (a.arm.use_qp_map ? 1 : 0)
                    << ',' << (a.arm.fine_tune ? 1 : 0) << ',' << qp << ',' << task << ','
                    << engine_detail::fmt_g17(c.psnr) << ',' << engine_detail::fmt_g17(c.d_psnr) << '\n';
            };
            line("sr", r.sr);
            line("qe", r.qe);
        }
    }
    return report;
}

}  // namespace mtlvqe
