// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <span>

namespace rsetl {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

/// FNV-1a 64 over an arbitrary byte range.
inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                             std::uint64_t state = kFnvOffsetBasis) noexcept {
    for (auto b : bytes) {
        state ^= b;
        state *= kFnvPrime;
    }
    return state;
}

/// FNV-1a 64 state after absorbing seed(LE). Constant per hashed feature.
inline constexpr std::uint64_t seed_state(std::uint64_t seed) noexcept {
    std::uint64_t h = kFnvOffsetBasis;
    for (int i = 0; i < 8; ++i) {
        h ^= (seed >> (8 * i)) & 0xFF;
        h *= kFnvPrime;
    }
    return h;
}

/// Continues a seed_state with id(LE).
inline constexpr std::uint64_t hash_from_state(std::uint64_t id, std::uint64_t state) noexcept {
    for (int i = 0; i < 8; ++i) {
        state ^= (id >> (8 * i)) & 0xFF;
        state *= kFnvPrime;
    }
    return state;
}

/// Seeded id hash: FNV-1a 64 over the 16 bytes seed(LE) || id(LE).
inline constexpr std::uint64_t compute_hash(std::uint64_t id, std::uint64_t seed) noexcept {
    return hash_from_state(id, seed_state(seed));
}

} // namespace rsetl
