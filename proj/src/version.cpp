// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/version.hpp"

namespace mtlvqe {

const char* version() { return "0.1.0"; }

}  // namespace mtlvqe
