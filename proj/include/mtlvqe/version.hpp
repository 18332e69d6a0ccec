// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace mtlvqe {

const char* version();

}  // namespace mtlvqe
