// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/cli/run_config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "mtlvqe/priors.hpp"

namespace mtlvqe {

namespace {

using nlohmann::json;

/// Collects violations so a bad config reports every problem at once.
struct Collector {
    std::string origin;
    std::vector<std::string> bad;
    bool types_broken = false;  // a failed conversion left defaults behind

    void add(const std::string& msg) { bad.push_back(msg); }

    void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
        if (!j.is_object()) {
            add(where + ": expected an object");
            return;
        }
        for (const auto& item : j.items())
            if (!allowed.count(item.key())) add(where + ": unknown key '" + item.key() + "'");
    }

    /// from_json wrapped so a type error is recorded instead of thrown.
    template <typename T>
    void read(const json& j, const std::string& where, T& out) {
        try {
            out = j.get<T>();
        } catch (const json::exception& e) {
            add(where + ": " + e.what());
            types_broken = true;
        }
    }

    template <typename F>
    void validate(const std::string& where, F&& f) {
        try {
            f();
        } catch (const ConfigError& e) {
            add(where + ": " + e.what());
        }
    }

    void finish() const {
        if (bad.empty()) return;
        std::string msg = origin + " is invalid (" + std::to_string(bad.size()) + " problem(s)):";
        for (const auto& b : bad) msg += "\n  - " + b;
        throw ConfigError(msg);
    }
};

const std::set<std::string> kRootKeys{"seed", "paths",  "net",  "opt", "sched",  "degrader",
                                      "data", "train",  "arm",  "arms", "eval",  "inspect"};
const std::set<std::string> kPathsKeys{"hr_dir",   "data_dir",           "manifest", "run_dir",
                                       "rd_csv",   "pretrain_checkpoint", "checkpoint"};
const std::set<std::string> kNetKeys{"num_blocks", "trunk_width", "kernel_size", "scale_factor",
                                     "in_channels", "out_channels", "head_sr",   "head_qe",
                                     "alpha",       "strict_paper"};
const std::set<std::string> kOptKeys{"lr0", "beta1", "beta2", "epsilon", "batch_size"};
const std::set<std::string> kSchedKeys{"gamma", "step_epochs", "total_epochs", "epoch_multiplier"};
const std::set<std::string> kDegraderKeys{"kind", "command_template", "qp"};
const std::set<std::string> kDataKeys{"qps", "r", "val_count", "test_count"};
const std::set<std::string> kTrainKeys{"patch_size", "patches_per_image", "stop_below_loss",
                                       "max_updates", "log_every", "save_every_epoch", "resume_from"};
const std::set<std::string> kArmKeys{"multi_qp", "use_qp_map", "fine_tune", "qps"};
const std::set<std::string> kEvalKeys{"dataset", "split"};
const std::set<std::string> kInspectKeys{"layers", "images", "qp", "use_qp_map"};

void read_paths(Collector& c, const json& j, PathsConfig& p) {
    c.check_keys(j, "paths", kPathsKeys);
    if (!j.is_object()) return;
    if (j.contains("hr_dir")) c.read(j.at("hr_dir"), "paths.hr_dir", p.hr_dir);
    if (j.contains("data_dir")) c.read(j.at("data_dir"), "paths.data_dir", p.data_dir);
    if (j.contains("manifest")) c.read(j.at("manifest"), "paths.manifest", p.manifest);
    if (j.contains("run_dir")) c.read(j.at("run_dir"), "paths.run_dir", p.run_dir);
    if (j.contains("rd_csv")) c.read(j.at("rd_csv"), "paths.rd_csv", p.rd_csv);
    if (j.contains("pretrain_checkpoint"))
        c.read(j.at("pretrain_checkpoint"), "paths.pretrain_checkpoint", p.pretrain_checkpoint);
    if (j.contains("checkpoint")) c.read(j.at("checkpoint"), "paths.checkpoint", p.checkpoint);
}

void read_data(Collector& c, const json& j, DataConfig& d) {
    c.check_keys(j, "data", kDataKeys);
    if (!j.is_object()) return;
    if (j.contains("qps")) c.read(j.at("qps"), "data.qps", d.qps);
    if (j.contains("r")) c.read(j.at("r"), "data.r", d.r);
    if (j.contains("val_count")) c.read(j.at("val_count"), "data.val_count", d.val_count);
    if (j.contains("test_count")) c.read(j.at("test_count"), "data.test_count", d.test_count);
}

void read_train(Collector& c, const json& j, TrainKnobs& t) {
    c.check_keys(j, "train", kTrainKeys);
    if (!j.is_object()) return;
    if (j.contains("patch_size")) c.read(j.at("patch_size"), "train.patch_size", t.patch_size);
    if (j.contains("patches_per_image"))
        c.read(j.at("patches_per_image"), "train.patches_per_image", t.patches_per_image);
    if (j.contains("stop_below_loss"))
        c.read(j.at("stop_below_loss"), "train.stop_below_loss", t.stop_below_loss);
    if (j.contains("max_updates")) c.read(j.at("max_updates"), "train.max_updates", t.max_updates);
    if (j.contains("log_every")) c.read(j.at("log_every"), "train.log_every", t.log_every);
    if (j.contains("save_every_epoch"))
        c.read(j.at("save_every_epoch"), "train.save_every_epoch", t.save_every_epoch);
    if (j.contains("resume_from")) c.read(j.at("resume_from"), "train.resume_from", t.resume_from);
}

void read_eval(Collector& c, const json& j, EvalConfig& e) {
    c.check_keys(j, "eval", kEvalKeys);
    if (!j.is_object()) return;
    if (j.contains("dataset")) c.read(j.at("dataset"), "eval.dataset", e.dataset);
    if (j.contains("split")) c.read(j.at("split"), "eval.split", e.split);
}

void read_inspect(Collector& c, const json& j, InspectConfig& i) {
    c.check_keys(j, "inspect", kInspectKeys);
    if (!j.is_object()) return;
    if (j.contains("layers")) c.read(j.at("layers"), "inspect.layers", i.layers);
    if (j.contains("images")) c.read(j.at("images"), "inspect.images", i.images);
    if (j.contains("qp")) c.read(j.at("qp"), "inspect.qp", i.qp);
    if (j.contains("use_qp_map")) c.read(j.at("use_qp_map"), "inspect.use_qp_map", i.use_qp_map);
}

}  // namespace

std::string RunConfig::manifest_path() const {
    if (!paths.manifest.empty()) return paths.manifest;
    if (paths.data_dir.empty()) return "";
    return (std::filesystem::path(paths.data_dir) / "manifest.txt").string();
}

TrainOptions RunConfig::train_options() const {
    TrainOptions o;
    o.opt = opt;
    o.sched = sched;
    o.patch_size = train.patch_size;
    o.patches_per_image = train.patches_per_image;
    o.seed = seed;
    o.resume_from = train.resume_from;
    o.stop_below_loss = train.stop_below_loss;
    o.max_updates = train.max_updates;
    o.log_every = train.log_every;
    o.save_every_epoch = train.save_every_epoch;
    return o;
}

std::vector<AblationArm> default_ablation_arms() {
    return {{true, true, true, {}},
            {false, true, true, {}},
            {true, false, true, {}},
            {true, true, false, {}}};
}

RunConfig parse_run_config(const nlohmann::json& j, const std::string& origin) {
    Collector c{origin, {}};
    RunConfig cfg;
    c.check_keys(j, "top level", kRootKeys);
    if (j.is_object()) {
        if (j.contains("seed")) c.read(j.at("seed"), "seed", cfg.seed);
        if (j.contains("paths")) read_paths(c, j.at("paths"), cfg.paths);
        if (j.contains("net")) {
            cfg.net_in_file = true;
            c.check_keys(j.at("net"), "net", kNetKeys);
            c.read(j.at("net"), "net", cfg.net);
        }
        if (j.contains("opt")) {
            c.check_keys(j.at("opt"), "opt", kOptKeys);
            c.read(j.at("opt"), "opt", cfg.opt);
        }
        if (j.contains("sched")) {
            c.check_keys(j.at("sched"), "sched", kSchedKeys);
            c.read(j.at("sched"), "sched", cfg.sched);
        }
        if (j.contains("degrader")) {
            c.check_keys(j.at("degrader"), "degrader", kDegraderKeys);
            c.read(j.at("degrader"), "degrader", cfg.degrader);
        }
        if (j.contains("data")) read_data(c, j.at("data"), cfg.data);
        if (j.contains("train")) read_train(c, j.at("train"), cfg.train);
        if (j.contains("arm")) {
            c.check_keys(j.at("arm"), "arm", kArmKeys);
            c.read(j.at("arm"), "arm", cfg.arm);
        }
        if (j.contains("arms")) {
            const json& a = j.at("arms");
            if (!a.is_array()) {
                c.add("arms: expected an array");
            } else {
                for (std::size_t i = 0; i < a.size(); ++i) {
                    const std::string where = "arms[" + std::to_string(i) + "]";
                    c.check_keys(a[i], where, kArmKeys);
                    AblationArm arm;
                    c.read(a[i], where, arm);
                    cfg.arms.push_back(arm);
                }
            }
        }
        if (j.contains("eval")) read_eval(c, j.at("eval"), cfg.eval);
        if (j.contains("inspect")) read_inspect(c, j.at("inspect"), cfg.inspect);
    }

    // Range checks are meaningless over fields a failed conversion left at
    // their defaults; unknown keys do not interfere, so both lists combine.
    if (!c.types_broken) {
        c.validate("net", [&] { cfg.net.validate(); });
        c.validate("opt", [&] { cfg.opt.validate(); });
        c.validate("sched", [&] { cfg.sched.validate(); });
        c.validate("degrader", [&] { cfg.degrader.validate(); });
        c.validate("data", [&] {
            if (cfg.data.r < 1 || cfg.data.r > 4) throw ConfigError("r must be in [1, 4]");
            if (cfg.data.qps.empty()) throw ConfigError("qps must not be empty");
            for (int q : cfg.data.qps)
                if (q < 0 || q > kQpMax)
                    throw ConfigError("qp " + std::to_string(q) + " outside [0, " + std::to_string(kQpMax) + "]");
            if (cfg.data.val_count < 0 || cfg.data.test_count < 0)
                throw ConfigError("val_count and test_count must be >= 0");
        });
        c.validate("train", [&] {
            if (cfg.train.patch_size <= 0) throw ConfigError("patch_size must be > 0");
            if (cfg.train.patches_per_image <= 0) throw ConfigError("patches_per_image must be > 0");
            if (cfg.train.stop_below_loss < 0.0) throw ConfigError("stop_below_loss must be >= 0");
            if (cfg.train.max_updates < 0) throw ConfigError("max_updates must be >= 0");
        });
        c.validate("inspect", [&] {
            if (cfg.inspect.qp < 0 || cfg.inspect.qp > kQpMax)
                throw ConfigError("qp outside [0, " + std::to_string(kQpMax) + "]");
        });
        c.validate("eval", [&] {
            const std::string& s = cfg.eval.split;
            if (s != "train" && s != "val" && s != "test")
                throw ConfigError("split must be train, val, or test; got '" + s + "'");
        });
    }
    c.finish();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return parse_run_config(j, "config file " + path);
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["paths"] = {{"hr_dir", cfg.paths.hr_dir},
                  {"data_dir", cfg.paths.data_dir},
                  {"manifest", cfg.paths.manifest},
                  {"run_dir", cfg.paths.run_dir},
                  {"rd_csv", cfg.paths.rd_csv},
                  {"pretrain_checkpoint", cfg.paths.pretrain_checkpoint},
                  {"checkpoint", cfg.paths.checkpoint}};
    j["net"] = cfg.net;
    j["opt"] = cfg.opt;
    j["sched"] = cfg.sched;
    j["degrader"] = cfg.degrader;
    j["data"] = {{"qps", cfg.data.qps},
                 {"r", cfg.data.r},
                 {"val_count", cfg.data.val_count},
                 {"test_count", cfg.data.test_count}};
    j["train"] = {{"patch_size", cfg.train.patch_size},
                  {"patches_per_image", cfg.train.patches_per_image},
                  {"stop_below_loss", cfg.train.stop_below_loss},
                  {"max_updates", cfg.train.max_updates},
                  {"log_every", cfg.train.log_every},
                  {"save_every_epoch", cfg.train.save_every_epoch},
                  {"resume_from", cfg.train.resume_from}};
    j["arm"] = cfg.arm;
    j["arms"] = cfg.arms;
    j["eval"] = {{"dataset", cfg.eval.dataset}, {"split", cfg.eval.split}};
    j["inspect"] = {{"layers", cfg.inspect.layers},
                    {"images", cfg.inspect.images},
                    {"qp", cfg.inspect.qp},
                    {"use_qp_map", cfg.inspect.use_qp_map}};
    return j;
}

std::vector<std::string> diff_network_configs(const NetworkConfig& a, const NetworkConfig& b) {
    const nlohmann::json ja = a, jb = b;
    std::vector<std::string> out;
    for (const auto& item : ja.items()) {
        const auto& key = item.key();
        if (jb.at(key) != item.value())
            out.push_back(key + ": " + item.value().dump() + " vs " + jb.at(key).dump());
    }
    return out;
}

}  // namespace mtlvqe
