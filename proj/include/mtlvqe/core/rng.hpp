// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace mtlvqe {

/// Derives an independent stream seed from (seed, tag). splitmix64-style mix
/// so that "init", "data", ... streams of one run never collide.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
    for (char ch : tag) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(ch));
        h *= 0xff51afd7ed558ccdULL;
        h ^= h >> 33;
    }
    h ^= h >> 29;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 32;
    return h;
}

inline std::string serialize_rng(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

inline std::mt19937_64 deserialize_rng(const std::string& state) {
    std::mt19937_64 rng;
    std::istringstream is(state);
    is >> rng;
    return rng;
}

}  // namespace mtlvqe
