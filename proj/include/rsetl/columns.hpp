// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// In-memory feature vectors. Sparse features use a jagged layout: a flat
// values array plus rows+1 offsets, row r owning values[offsets[r], offsets[r+1]).
//
#pragma once

#include "rsetl/error.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rsetl {

struct DenseColumn {
    std::vector<float> values;

    std::size_t rows() const noexcept { return values.size(); }
    bool operator==(const DenseColumn&) const = default;
};

struct SparseColumn {
    std::vector<std::uint64_t> offsets{0};
    std::vector<std::uint64_t> values;

    std::size_t rows() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::span<const std::uint64_t> row(std::size_t r) const {
        return {values.data() + offsets[r], values.data() + offsets[r + 1]};
    }
    bool operator==(const SparseColumn&) const = default;
};

/// Empty string when the jagged invariant holds, else a description of the first breach.
inline std::string jagged_violation(const SparseColumn& col) {
    if (col.offsets.empty()) return "offsets array is empty";
    if (col.offsets.front() != 0) return "offsets[0] != 0";
    for (std::size_t i = 1; i < col.offsets.size(); ++i) {
        if (col.offsets[i] < col.offsets[i - 1]) {
            return "offsets decrease at index " + std::to_string(i);
        }
    }
    if (col.offsets.back() != col.values.size()) {
        return "final offset " + std::to_string(col.offsets.back()) + " != values length " +
               std::to_string(col.values.size());
    }
    return {};
}

inline bool is_jagged_valid(const SparseColumn& col) { return jagged_violation(col).empty(); }

inline bool is_strictly_ascending(std::span<const float> b) {
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (std::isnan(b[i])) return false;
        if (i > 0 && !(b[i - 1] < b[i])) return false;
    }
    return true;
}

/// Bucket boundaries b[1..m]; strictly ascending, possibly empty.
class Boundaries {
public:
    Boundaries() = default;
    explicit Boundaries(std::vector<float> b) : b_(std::move(b)) {
        if (!is_strictly_ascending(b_)) {
            throw InvalidArgument("bucket boundaries must be strictly ascending and non-NaN");
        }
    }

    std::span<const float> values() const noexcept { return b_; }
    std::size_t size() const noexcept { return b_.size(); }
    bool operator==(const Boundaries&) const = default;

private:
    std::vector<float> b_;
};

/// Seed s and modulus d of a seeded hash reduction.
struct HashParams {
    std::uint64_t seed = 0;
    std::uint64_t max_value = 1;

    bool operator==(const HashParams&) const = default;
};

} // namespace rsetl
