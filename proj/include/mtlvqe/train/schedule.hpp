// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>

#include "mtlvqe/core/error.hpp"

namespace mtlvqe {

struct OptimizerConfig {
    double lr0 = 1e-4;  // halve for fine-tuning
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 8;

    void validate() const {
        if (lr0 <= 0.0) throw ConfigError("optimizer: lr0 must be positive");
        if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
            throw ConfigError("optimizer: betas must lie in (0, 1)");
        if (epsilon <= 0.0) throw ConfigError("optimizer: epsilon must be positive");
        if (batch_size < 1) throw ConfigError("optimizer: batch_size must be >= 1");
    }
};

struct ScheduleConfig {
    double gamma = 0.5;
    int step_epochs = 75;
    int total_epochs = 250;
    int epoch_multiplier = 1;  // |QP set| for per-QP ablation arms

    void validate() const {
        if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("schedule: gamma must be in (0, 1]");
        if (step_epochs < 1) throw ConfigError("schedule: step_epochs must be >= 1");
        if (total_epochs < 1) throw ConfigError("schedule: total_epochs must be >= 1");
        if (epoch_multiplier < 1) throw ConfigError("schedule: epoch_multiplier must be >= 1");
    }
};

/// Step decay: lr0 * gamma^floor(epoch / (step_epochs * epoch_multiplier)).
inline double lr_at(int epoch, const ScheduleConfig& sched, double lr0) {
    if (epoch < 0) throw ConfigError("lr_at: epoch must be >= 0, got " + std::to_string(epoch));
    const long long step = static_cast<long long>(sched.step_epochs) * sched.epoch_multiplier;
    return lr0 * std::pow(sched.gamma, static_cast<double>(epoch / step));
}

}  // namespace mtlvqe
