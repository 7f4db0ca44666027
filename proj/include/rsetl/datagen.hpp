// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic raw-feature tables.
//
// Stream layout, relied upon by the determinism guarantee:
//   * generator: SplitMix64, state initialised to (rng_seed XOR partition_id);
//   * dense columns first, in index order, one draw per row:
//       value = (next() >> 40) * 2^-24 * kDenseValueUpper, rounded to float;
//   * then sparse columns in index order; for each row one length draw
//     followed by that many id draws, id = next() >> 1 (uniform on [0, 2^63)).
//   * a length draw is 1 + Poisson(mean - 1), sampled by Knuth's product
//     method on 53-bit uniforms, split into Poisson(30) pieces above 30.
//
#pragma once

#include "rsetl/columns.hpp"
#include "rsetl/error.hpp"
#include "rsetl/schema.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace rsetl {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// Per-row sparse length distribution: 1 + Poisson(mean - 1).
struct LengthLaw {
    double mean = 1.0;

    bool is_fixed() const noexcept { return mean == 1.0; }
};

namespace detail {

inline std::uint64_t poisson_knuth(double lambda, SplitMix64& rng) {
    const double limit = std::exp(-lambda);
    std::uint64_t k = 0;
    double p = rng.uniform01();
    while (p > limit) {
        ++k;
        p *= rng.uniform01();
    }
    return k;
}

} // namespace detail

inline std::uint64_t sample_length(const LengthLaw& law, SplitMix64& rng) {
    if (!(law.mean >= 1.0)) throw InvalidArgument("length law mean must be >= 1");
    if (law.is_fixed()) return 1;
    double lambda = law.mean - 1.0;
    std::uint64_t extra = 0;
    // exp(-lambda) loses precision for large lambda; Poisson sums are Poisson.
    constexpr double kPiece = 30.0;
    while (lambda > kPiece) {
        extra += detail::poisson_knuth(kPiece, rng);
        lambda -= kPiece;
    }
    return 1 + extra + detail::poisson_knuth(lambda, rng);
}

struct GenSpec {
    std::size_t num_rows = 0;
    std::uint64_t rng_seed = 0;
    LengthLaw length_law;

    static GenSpec for_schema(const FeatureSchema& schema, std::size_t rows, std::uint64_t seed) {
        return {rows, seed, LengthLaw{schema.avg_sparse_len}};
    }
};

struct RawTable {
    std::size_t num_rows = 0;
    std::vector<DenseColumn> dense;
    std::vector<SparseColumn> sparse;

    bool operator==(const RawTable&) const = default;

    /// Rows [begin, end) as an independent table with rebased offsets.
    RawTable slice(std::size_t begin, std::size_t end) const {
        if (begin > end || end > num_rows) throw InvalidArgument("slice out of range");
        RawTable out;
        out.num_rows = end - begin;
        out.dense.reserve(dense.size());
        for (const auto& col : dense) {
            out.dense.push_back({{col.values.begin() + static_cast<std::ptrdiff_t>(begin),
                                  col.values.begin() + static_cast<std::ptrdiff_t>(end)}});
        }
        out.sparse.reserve(sparse.size());
        for (const auto& col : sparse) {
            SparseColumn s;
            const auto base = col.offsets[begin];
            s.offsets.resize(out.num_rows + 1);
            for (std::size_t r = 0; r <= out.num_rows; ++r) s.offsets[r] = col.offsets[begin + r] - base;
            s.values.assign(col.values.begin() + static_cast<std::ptrdiff_t>(base),
                            col.values.begin() + static_cast<std::ptrdiff_t>(col.offsets[end]));
            out.sparse.push_back(std::move(s));
        }
        return out;
    }
};

inline float draw_dense_value(SplitMix64& rng) noexcept {
    const double u = static_cast<double>(rng.next() >> 40) * 0x1.0p-24;
    return static_cast<float>(u * kDenseValueUpper);
}

/// `rows` rows drawn from the stream of `partition_id`.
inline RawTable generate_partition(const FeatureSchema& schema, const GenSpec& spec,
                                   std::uint64_t partition_id, std::size_t rows) {
    if (auto v = schema_violations(schema); !v.empty()) throw ConfigError(std::move(v));
    SplitMix64 rng(spec.rng_seed ^ partition_id);

    RawTable t;
    t.num_rows = rows;
    t.dense.resize(schema.num_dense);
    for (auto& col : t.dense) {
        col.values.resize(rows);
        for (auto& v : col.values) v = draw_dense_value(rng);
    }
    t.sparse.resize(schema.num_sparse);
    const auto expected_nnz = static_cast<std::size_t>(static_cast<double>(rows) * spec.length_law.mean);
    for (auto& col : t.sparse) {
        col.offsets.assign(rows + 1, 0);
        col.values.reserve(expected_nnz + expected_nnz / 8);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto len = sample_length(spec.length_law, rng);
            for (std::uint64_t k = 0; k < len; ++k) col.values.push_back(rng.next() >> 1);
            col.offsets[r + 1] = col.values.size();
        }
    }
    return t;
}

/// Whole table from stream 0. Requires spec.num_rows >= 1.
inline RawTable generate(const FeatureSchema& schema, const GenSpec& spec) {
    if (spec.num_rows < 1) throw InvalidArgument("num_rows must be >= 1");
    return generate_partition(schema, spec, 0, spec.num_rows);
}

} // namespace rsetl
