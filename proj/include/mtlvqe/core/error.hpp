// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mtlvqe {

// Shape/arity violations on tensors and images.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid configuration values (network, optimizer, run configs).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Dataset / file-system problems (missing manifest, unreadable image).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// External codec process failure. Carries the captured diagnostics.
struct DegraderError : std::runtime_error {
    DegraderError(const std::string& what, std::string diagnostics_)
        : std::runtime_error(what), diagnostics(std::move(diagnostics_)) {}
    explicit DegraderError(const std::string& what) : std::runtime_error(what) {}
    std::string diagnostics;
};

// Checkpoint container violations (bad magic, dtype/shape mismatch).
struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mtlvqe
