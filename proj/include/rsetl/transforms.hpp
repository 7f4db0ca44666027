// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// Transform-phase kernels: Bucketize (feature generation), SigridHash and Log
// (feature normalization), and mini-batch assembly.
//
// Every kernel is pure. Span overloads operate on disjoint element ranges so
// callers may split one feature across executors (intra-feature
// parallelism); transform_partition hands whole features to an Executor
// (inter-feature parallelism).
//
#pragma once

#include "rsetl/bytes.hpp"
#include "rsetl/columns.hpp"
#include "rsetl/datagen.hpp"
#include "rsetl/error.hpp"
#include "rsetl/hash.hpp"
#include "rsetl/schema.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rsetl {

/// Number of boundaries <= x, i.e. the k with b[k] <= x < b[k+1] under
/// virtual sentinels -inf / +inf. A value equal to a boundary lands in the
/// upper bucket. NaN compares below everything and yields 0.
inline std::size_t search_bucket_id(float x, std::span<const float> b) noexcept {
    std::size_t lo = 0;
    std::size_t n = b.size();
    while (n > 0) {
        const std::size_t half = n / 2;
        if (b[lo + half] <= x) {
            lo += half + 1;
            n -= half + 1;
        } else {
            n = half;
        }
    }
    return lo;
}

inline std::size_t search_bucket_id(float x, const Boundaries& b) noexcept {
    return search_bucket_id(x, b.values());
}

inline void bucketize_into(std::span<const float> in, std::span<const float> b,
                           std::span<std::uint64_t> out) noexcept {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = search_bucket_id(in[i], b);
}

/// One bucket id per row: offsets are 0, 1, ..., n.
inline SparseColumn bucketize(const DenseColumn& a, const Boundaries& b) {
    SparseColumn out;
    const auto n = a.rows();
    out.offsets.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) out.offsets[i] = i;
    out.values.resize(n);
    bucketize_into(a.values, b.values(), out.values);
    return out;
}

inline void sigrid_hash_into(std::span<const std::uint64_t> in, const HashParams& p,
                             std::span<std::uint64_t> out) noexcept {
    const auto state = seed_state(p.seed);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = hash_from_state(in[i], state) % p.max_value;
}

/// values[i] := compute_hash(values[i], seed) mod d; offsets are untouched.
inline SparseColumn sigrid_hash(const SparseColumn& col, const HashParams& p) {
    if (p.max_value < 1) throw InvalidArgument("hash max value d must be >= 1");
    SparseColumn out;
    out.offsets = col.offsets;
    out.values.resize(col.values.size());
    sigrid_hash_into(col.values, p, out.values);
    return out;
}

inline void log_normalize_into(std::span<const float> in, std::span<float> out) noexcept {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::log1p(std::max(in[i], 0.0f));
}

/// y = ln(1 + max(x, 0)).
inline DenseColumn log_normalize(const DenseColumn& col) {
    DenseColumn out;
    out.values.resize(col.rows());
    log_normalize_into(col.values, out.values);
    return out;
}

/// Train-ready tensors for one partition.
struct MiniBatch {
    std::uint64_t seq_no = 0;
    std::size_t rows = 0;
    std::size_t num_dense = 0;
    /// rows x num_dense, row-major.
    std::vector<float> dense;
    /// Originals first, then generated features.
    std::vector<SparseColumn> sparse_features;

    float dense_at(std::size_t row, std::size_t feature) const { return dense[row * num_dense + feature]; }
    std::uint64_t total_sparse_values() const noexcept {
        std::uint64_t n = 0;
        for (const auto& f : sparse_features) n += f.values.size();
        return n;
    }

    bool operator==(const MiniBatch&) const = default;
};

/// Canonical wire size: dense block, then per feature offsets and values.
inline std::uint64_t serialized_size(const MiniBatch& mb) noexcept {
    std::uint64_t n = mb.dense.size() * sizeof(float);
    for (const auto& f : mb.sparse_features) n += (f.offsets.size() + f.values.size()) * sizeof(std::uint64_t);
    return n;
}

inline Bytes serialize(const MiniBatch& mb) {
    Bytes out;
    out.reserve(serialized_size(mb));
    ByteWriter w(out);
    w.put_array(std::span<const float>(mb.dense));
    for (const auto& f : mb.sparse_features) {
        w.put_array(std::span<const std::uint64_t>(f.offsets));
        w.put_array(std::span<const std::uint64_t>(f.values));
    }
    return out;
}

/// FNV-1a 64 of the canonical serialization.
inline std::uint64_t content_digest(const MiniBatch& mb) { return fnv1a64(serialize(mb)); }

inline MiniBatch assemble_minibatch(std::uint64_t seq_no, const std::vector<DenseColumn>& dense,
                                    std::vector<SparseColumn> sparse, const FeatureSchema& schema) {
    if (dense.size() != schema.num_dense) {
        throw InvalidArgument("expected " + std::to_string(schema.num_dense) + " dense columns, got " +
                              std::to_string(dense.size()));
    }
    if (sparse.size() != schema.total_sparse()) {
        throw InvalidArgument("expected " + std::to_string(schema.total_sparse()) +
                              " sparse features, got " + std::to_string(sparse.size()));
    }
    std::size_t rows = 0;
    bool have_rows = false;
    auto check_rows = [&](std::size_t r, const char* what, std::size_t i) {
        if (!have_rows) {
            rows = r;
            have_rows = true;
        } else if (r != rows) {
            throw InvalidArgument(std::string("row-count mismatch: ") + what + " column " +
                                  std::to_string(i) + " has " + std::to_string(r) + " rows, expected " +
                                  std::to_string(rows));
        }
    };
    for (std::size_t i = 0; i < dense.size(); ++i) check_rows(dense[i].rows(), "dense", i);
    for (std::size_t i = 0; i < sparse.size(); ++i) {
        if (auto why = jagged_violation(sparse[i]); !why.empty()) {
            throw InvalidArgument("sparse feature " + std::to_string(i) + ": " + why);
        }
        check_rows(sparse[i].rows(), "sparse", i);
        for (auto v : sparse[i].values) {
            if (v >= schema.max_embedding_index) {
                throw InvalidArgument("sparse feature " + std::to_string(i) + " holds index " +
                                      std::to_string(v) + " >= d");
            }
        }
    }

    MiniBatch mb;
    mb.seq_no = seq_no;
    mb.rows = rows;
    mb.num_dense = dense.size();
    mb.dense.resize(rows * mb.num_dense);
    for (std::size_t j = 0; j < dense.size(); ++j) {
        const auto& col = dense[j].values;
        for (std::size_t r = 0; r < rows; ++r) mb.dense[r * mb.num_dense + j] = col[r];
    }
    mb.sparse_features = std::move(sparse);
    return mb;
}

/// Runs fn(0..count-1) in any order, possibly concurrently.
template <typename E>
concept Executor = requires(E& e, std::size_t n, void (*fn)(std::size_t)) { e(n, fn); };

struct SequentialExecutor {
    template <typename Fn>
    void operator()(std::size_t count, Fn&& fn) const {
        for (std::size_t i = 0; i < count; ++i) fn(i);
    }
};

/// Seconds spent per transform stage of one partition.
struct TransformTimings {
    double bucketize = 0;
    double sigridhash = 0;
    double log = 0;
    double batch_convert = 0;
};

namespace detail {

class StageClock {
public:
    StageClock() : start_(std::chrono::steady_clock::now()) {}
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - start_).count();
        start_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace detail

/// Bucketize -> SigridHash -> Log -> assemble. The result does not depend on
/// the order or concurrency with which `exec` runs feature tasks.
template <typename Exec = SequentialExecutor>
MiniBatch transform_partition(std::uint64_t seq_no, const RawTable& raw, const TransformPlan& plan,
                              const FeatureSchema& schema, Exec&& exec = {},
                              TransformTimings* timings = nullptr) {
    if (raw.dense.size() != schema.num_dense || raw.sparse.size() != schema.num_sparse) {
        throw InvalidArgument("raw columns do not match schema");
    }
    if (auto v = plan_violations(plan, schema); !v.empty()) {
        throw InvalidArgument("invalid transform plan: " + v.front());
    }
    detail::StageClock clock;

    std::vector<SparseColumn> generated(plan.bucketize_specs.size());
    exec(plan.bucketize_specs.size(), [&](std::size_t g) {
        const auto& spec = plan.bucketize_specs[g];
        generated[g] = bucketize(raw.dense[spec.dense_index], spec.boundaries);
    });
    const double t_bucketize = clock.lap();

    std::vector<SparseColumn> hashed(schema.total_sparse());
    exec(plan.hash_specs.size(), [&](std::size_t i) {
        const auto& spec = plan.hash_specs[i];
        const auto k = spec.sparse_index;
        const SparseColumn& src = k < schema.num_sparse ? raw.sparse[k] : generated[k - schema.num_sparse];
        hashed[k] = sigrid_hash(src, spec.params);
    });
    const double t_hash = clock.lap();

    std::vector<DenseColumn> normalized(schema.num_dense);
    exec(plan.log_specs.size(), [&](std::size_t i) {
        const auto j = plan.log_specs[i];
        normalized[j] = log_normalize(raw.dense[j]);
    });
    const double t_log = clock.lap();

    auto mb = assemble_minibatch(seq_no, normalized, std::move(hashed), schema);
    if (timings) {
        timings->bucketize = t_bucketize;
        timings->sigridhash = t_hash;
        timings->log = t_log;
        timings->batch_convert = clock.lap();
    }
    return mb;
}

} // namespace rsetl
