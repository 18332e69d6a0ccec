// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "mtlvqe/core/error.hpp"

namespace mtlvqe {

/// Architectural hyperparameters of the shared-trunk / two-head network.
struct NetworkConfig {
    int num_blocks = 8;     // residual blocks in the trunk
    int trunk_width = 256;  // channels of every trunk convolution
    int kernel_size = 3;    // square, odd
    int scale_factor = 2;   // SR upscale r, in {1,2,3,4}
    int in_channels = 4;    // image channels + 1 prior channel
    int out_channels = 3;
    bool head_sr = true;
    bool head_qe = true;
    double alpha = 0.9;        // SR weight in the multitask loss
    bool strict_paper = false; // reject SR at r=1 when set

    /// Task weight after the single-task degenerate rules: heads={SR} pins
    /// alpha to 1, heads={QE} pins it to 0.
    double effective_alpha() const {
        if (head_sr && !head_qe) return 1.0;
        if (!head_sr && head_qe) return 0.0;
        return alpha;
    }

    void validate() const {
        std::vector<std::string> bad;
        if (num_blocks < 0) bad.push_back("num_blocks must be >= 0");
        if (trunk_width <= 0) bad.push_back("trunk_width must be > 0");
        if (kernel_size <= 0 || kernel_size % 2 == 0) bad.push_back("kernel_size must be positive and odd");
        if (scale_factor < 1) bad.push_back("scale_factor must be >= 1");
        if (scale_factor > 4) bad.push_back("scale_factor must be <= 4");
        if (in_channels <= 0) bad.push_back("in_channels must be > 0");
        if (out_channels <= 0) bad.push_back("out_channels must be > 0");
        if (!head_sr && !head_qe) bad.push_back("heads must be a non-empty subset of {SR, QE}");
        if (alpha < 0.0 || alpha > 1.0) bad.push_back("alpha must be in [0, 1]");
        if (strict_paper && head_sr && scale_factor == 1)
            bad.push_back("strict-paper mode rejects an SR head with scale_factor = 1");
        if (!bad.empty()) {
            std::string msg = "NetworkConfig invalid:";
            for (const auto& b : bad) msg += "\n  - " + b;
            throw ConfigError(msg);
        }
    }

    /// Pixel-shuffle stages of the SR head: cascaded x2 stages for r=4,
    /// a single stage otherwise.
    std::vector<int> sr_stages() const {
        if (scale_factor == 4) return {2, 2};
        return {scale_factor};
    }
};

}  // namespace mtlvqe
