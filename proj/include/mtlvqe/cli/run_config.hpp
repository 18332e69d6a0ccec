// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtlvqe/config_json.hpp"
#include "mtlvqe/data/manifest.hpp"
#include "mtlvqe/train/engine.hpp"

namespace mtlvqe {

struct PathsConfig {
    std::string hr_dir;    // prepare: directory holding the source .ppm images
    std::string data_dir;  // prepare output root; consumers read <data_dir>/manifest.txt
    std::string manifest;  // explicit manifest file, overrides data_dir for consumers
    std::string run_dir;   // every output of one invocation lands here
    std::string pretrain_checkpoint;
    std::string checkpoint;  // eval / inspect subject
    std::string rd_csv;      // bdrate input measurements
};

struct DataConfig {
    std::vector<int> qps{22, 27, 32, 37};
    int r = 2;
    int val_count = 1;
    int test_count = 0;
};

/// Training knobs that are not part of the optimizer or schedule.
struct TrainKnobs {
    int patch_size = 64;
    int patches_per_image = 1;
    double stop_below_loss = 0.0;
    long long max_updates = 0;
    int log_every = 0;
    bool save_every_epoch = true;
    std::string resume_from;
};

struct EvalConfig {
    std::string dataset = "local";
    std::string split = "test";
};

struct InspectConfig {
    std::vector<std::string> layers{"conv_in"};
    std::vector<std::string> images;  // .ppm inputs; empty: eval split of the manifest
    int qp = 32;                      // prior value for explicit images
    bool use_qp_map = true;
};

/// Everything a subcommand needs, read from one JSON file. Flags override
/// individual keys after loading; nothing else feeds the run.
struct RunConfig {
    std::uint64_t seed = 1;
    PathsConfig paths;
    NetworkConfig net;
    OptimizerConfig opt;
    ScheduleConfig sched;
    DegraderSpec degrader;
    DataConfig data;
    TrainKnobs train;
    AblationArm arm;                // train: the single arm to run
    std::vector<AblationArm> arms;  // ablate; empty: the four classic arms
    EvalConfig eval;
    InspectConfig inspect;

    bool net_in_file = false;  // config file carried an explicit "net" object

    /// The manifest file consumers should read.
    std::string manifest_path() const;

    /// Assembles the engine options (run_dir left empty).
    TrainOptions train_options() const;
};

/// The ablation matrix used when the config lists no arms: full method,
/// then one column each with multi-QP, the QP map, or fine-tuning removed.
std::vector<AblationArm> default_ablation_arms();

/// Strict parse: unknown keys, wrong types, and out-of-range values are all
/// collected and reported in a single ConfigError. `origin` names the source
/// in messages.
RunConfig parse_run_config(const nlohmann::json& j, const std::string& origin);

/// parse_run_config over the JSON document at `path`.
RunConfig load_run_config(const std::string& path);

/// Full snapshot of a resolved config, suitable for exact re-execution.
nlohmann::json run_config_to_json(const RunConfig& cfg);

/// Field-by-field differences rendered as "name: a vs b", empty when equal.
std::vector<std::string> diff_network_configs(const NetworkConfig& a, const NetworkConfig& b);

}  // namespace mtlvqe
