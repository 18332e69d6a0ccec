// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include "mtlvqe/data/degrader.hpp"
#include "mtlvqe/net/config.hpp"
#include "mtlvqe/train/schedule.hpp"

namespace mtlvqe {

// JSON bridges for the config structs. Missing keys keep the struct
// defaults; validation stays with each struct's validate().

inline void to_json(nlohmann::json& j, const NetworkConfig& c) {
    j = nlohmann::json{{"num_blocks", c.num_blocks},   {"trunk_width", c.trunk_width},
                       {"kernel_size", c.kernel_size}, {"scale_factor", c.scale_factor},
                       {"in_channels", c.in_channels}, {"out_channels", c.out_channels},
                       {"head_sr", c.head_sr},         {"head_qe", c.head_qe},
                       {"alpha", c.alpha},             {"strict_paper", c.strict_paper}};
}

inline void from_json(const nlohmann::json& j, NetworkConfig& c) {
    c.num_blocks = j.value("num_blocks", c.num_blocks);
    c.trunk_width = j.value("trunk_width", c.trunk_width);
    c.kernel_size = j.value("kernel_size", c.kernel_size);
    c.scale_factor = j.value("scale_factor", c.scale_factor);
    c.in_channels = j.value("in_channels", c.in_channels);
    c.out_channels = j.value("out_channels", c.out_channels);
    c.head_sr = j.value("head_sr", c.head_sr);
    c.head_qe = j.value("head_qe", c.head_qe);
    c.alpha = j.value("alpha", c.alpha);
    c.strict_paper = j.value("strict_paper", c.strict_paper);
}

inline void to_json(nlohmann::json& j, const OptimizerConfig& c) {
    j = nlohmann::json{{"lr0", c.lr0},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"epsilon", c.epsilon},
                       {"batch_size", c.batch_size}};
}

inline void from_json(const nlohmann::json& j, OptimizerConfig& c) {
    c.lr0 = j.value("lr0", c.lr0);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.batch_size = j.value("batch_size", c.batch_size);
}

inline void to_json(nlohmann::json& j, const ScheduleConfig& c) {
    j = nlohmann::json{{"gamma", c.gamma},
                       {"step_epochs", c.step_epochs},
                       {"total_epochs", c.total_epochs},
                       {"epoch_multiplier", c.epoch_multiplier}};
}

inline void from_json(const nlohmann::json& j, ScheduleConfig& c) {
    c.gamma = j.value("gamma", c.gamma);
    c.step_epochs = j.value("step_epochs", c.step_epochs);
    c.total_epochs = j.value("total_epochs", c.total_epochs);
    c.epoch_multiplier = j.value("epoch_multiplier", c.epoch_multiplier);
}

inline void to_json(nlohmann::json& j, const DegraderSpec& s) {
    j = nlohmann::json{{"kind", degrader_kind_name(s.kind)}, {"qp", s.qp}};
    if (!s.command_template.empty()) j["command_template"] = s.command_template;
}

inline void from_json(const nlohmann::json& j, DegraderSpec& s) {
    if (j.contains("kind")) s.kind = parse_degrader_kind(j.at("kind").get<std::string>());
    s.command_template = j.value("command_template", s.command_template);
    s.qp = j.value("qp", s.qp);
}

}  // namespace mtlvqe
