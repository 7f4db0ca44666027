// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// Dataset schemas, the RM1..RM5 presets and the transform plan that drives
// feature generation and normalization.
//
#pragma once

#include "rsetl/columns.hpp"
#include "rsetl/error.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace rsetl {

/// Dense values are drawn uniformly from [0, kDenseValueUpper).
inline constexpr double kDenseValueUpper = 1.0e6;

struct FeatureSchema {
    std::size_t num_dense = 0;
    std::size_t num_sparse = 0;
    double avg_sparse_len = 1.0;
    std::size_t num_generated_sparse = 0;
    std::size_t bucket_size = 0;
    std::uint64_t max_embedding_index = 1;

    /// Sparse features in a mini-batch: originals followed by generated ones.
    std::size_t total_sparse() const noexcept { return num_sparse + num_generated_sparse; }
    /// Columns stored in a partition file: dense ids first, then sparse ids.
    std::size_t num_columns() const noexcept { return num_dense + num_sparse; }

    bool operator==(const FeatureSchema&) const = default;
};

struct RmPreset {
    std::string name;
    FeatureSchema schema;
};

namespace detail {

struct PresetRow {
    std::string_view name;
    FeatureSchema schema;
};

// Dataset-configuration columns of the five reference models.
inline constexpr std::array<PresetRow, 5> kPresetTable{{
    {"RM1", {13, 26, 1.0, 13, 1024, 500000}},
    {"RM2", {504, 42, 20.0, 21, 1024, 500000}},
    {"RM3", {504, 42, 20.0, 42, 1024, 500000}},
    {"RM4", {504, 42, 20.0, 42, 2048, 500000}},
    {"RM5", {504, 42, 20.0, 42, 4096, 500000}},
}};

} // namespace detail

inline std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& row : detail::kPresetTable) out.emplace_back(row.name);
    return out;
}

inline RmPreset preset(std::string_view name) {
    for (const auto& row : detail::kPresetTable) {
        if (row.name == name) return {std::string(row.name), row.schema};
    }
    throw InvalidArgument("unknown preset '" + std::string(name) + "' (expected RM1..RM5)");
}

/// Every invariant breach of `s`, with the offending field as path.
inline std::vector<ConfigViolation> schema_violations(const FeatureSchema& s) {
    std::vector<ConfigViolation> out;
    if (s.num_generated_sparse > s.num_dense) {
        out.push_back({"num_generated_sparse", "generated exceeds dense (" +
                                                   std::to_string(s.num_generated_sparse) + " > " +
                                                   std::to_string(s.num_dense) + ")"});
    }
    if (!(s.avg_sparse_len >= 1.0) || !std::isfinite(s.avg_sparse_len)) {
        out.push_back({"avg_sparse_len", "must be a finite value >= 1"});
    }
    if (s.max_embedding_index < 1) {
        out.push_back({"max_embedding_index", "must be >= 1"});
    }
    return out;
}

inline nlohmann::json to_json(const FeatureSchema& s) {
    return {
        {"num_dense", s.num_dense},
        {"num_sparse", s.num_sparse},
        {"avg_sparse_len", s.avg_sparse_len},
        {"num_generated_sparse", s.num_generated_sparse},
        {"bucket_size", s.bucket_size},
        {"max_embedding_index", s.max_embedding_index},
    };
}

/// Validates a parsed config document. A `preset` key overrides every other
/// field. Throws ConfigError listing all violations at once.
inline FeatureSchema validate_config(const nlohmann::json& doc) {
    std::vector<ConfigViolation> errors;
    if (!doc.is_object()) {
        throw ConfigError(std::vector<ConfigViolation>{{"$", "config must be a JSON object"}});
    }
    if (auto it = doc.find("preset"); it != doc.end()) {
        if (!it->is_string()) throw ConfigError(std::vector<ConfigViolation>{{"preset", "must be a string"}});
        try {
            return preset(it->get<std::string>()).schema;
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::vector<ConfigViolation>{{"preset", e.what()}});
        }
    }

    FeatureSchema s;
    auto read_count = [&](const char* key, auto& field) {
        auto it = doc.find(key);
        if (it == doc.end()) {
            errors.push_back({key, "missing required key"});
        } else if (!it->is_number_integer() && !it->is_number_unsigned()) {
            errors.push_back({key, "must be an integer"});
        } else if (it->is_number_integer() && it->template get<std::int64_t>() < 0) {
            errors.push_back({key, "must be non-negative"});
        } else {
            field = it->template get<std::remove_reference_t<decltype(field)>>();
        }
    };
    read_count("num_dense", s.num_dense);
    read_count("num_sparse", s.num_sparse);
    read_count("num_generated_sparse", s.num_generated_sparse);
    read_count("bucket_size", s.bucket_size);
    read_count("max_embedding_index", s.max_embedding_index);
    if (auto it = doc.find("avg_sparse_len"); it == doc.end()) {
        errors.push_back({"avg_sparse_len", "missing required key"});
    } else if (!it->is_number()) {
        errors.push_back({"avg_sparse_len", "must be a number"});
    } else {
        s.avg_sparse_len = it->get<double>();
    }

    // Cross-field invariants only make sense once every field parsed.
    if (errors.empty()) errors = schema_violations(s);
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return s;
}

struct BucketizeSpec {
    std::size_t dense_index = 0;
    Boundaries boundaries;

    bool operator==(const BucketizeSpec&) const = default;
};

struct HashSpec {
    /// Index into the mini-batch sparse ordering (originals, then generated).
    std::size_t sparse_index = 0;
    HashParams params;

    bool operator==(const HashSpec&) const = default;
};

struct TransformPlan {
    std::vector<BucketizeSpec> bucketize_specs;
    std::vector<HashSpec> hash_specs;
    std::vector<std::size_t> log_specs;

    bool operator==(const TransformPlan&) const = default;
};

/// m cut points splitting [0, kDenseValueUpper) into m+1 equal-mass intervals.
inline Boundaries uniform_quantile_boundaries(std::size_t m) {
    std::vector<float> b(m);
    for (std::size_t j = 0; j < m; ++j) {
        b[j] = static_cast<float>(kDenseValueUpper * static_cast<double>(j + 1) /
                                  static_cast<double>(m + 1));
    }
    return Boundaries(std::move(b));
}

/// Pure function of (schema, seed). The first num_generated_sparse dense
/// features are bucketized; hash seeds are seed + sparse index.
inline TransformPlan derive_transform_plan(const FeatureSchema& schema, std::uint64_t seed) {
    if (auto v = schema_violations(schema); !v.empty()) throw ConfigError(std::move(v));

    TransformPlan plan;
    const Boundaries shared = uniform_quantile_boundaries(schema.bucket_size);
    plan.bucketize_specs.reserve(schema.num_generated_sparse);
    for (std::size_t i = 0; i < schema.num_generated_sparse; ++i) {
        plan.bucketize_specs.push_back({i, shared});
    }
    plan.hash_specs.reserve(schema.total_sparse());
    for (std::size_t k = 0; k < schema.total_sparse(); ++k) {
        plan.hash_specs.push_back({k, {seed + k, schema.max_embedding_index}});
    }
    plan.log_specs.reserve(schema.num_dense);
    for (std::size_t i = 0; i < schema.num_dense; ++i) plan.log_specs.push_back(i);
    return plan;
}

/// Structural check of a plan against its schema; empty when valid.
inline std::vector<std::string> plan_violations(const TransformPlan& plan,
                                                const FeatureSchema& schema) {
    std::vector<std::string> out;
    for (const auto& spec : plan.bucketize_specs) {
        if (spec.dense_index >= schema.num_dense) {
            out.push_back("bucketize source " + std::to_string(spec.dense_index) + " out of range");
        }
        if (!is_strictly_ascending(spec.boundaries.values())) {
            out.push_back("boundaries not strictly ascending");
        }
    }
    if (plan.bucketize_specs.size() != schema.num_generated_sparse) {
        out.push_back("bucketize spec count != num_generated_sparse");
    }
    std::vector<int> hashed(schema.total_sparse(), 0);
    for (const auto& spec : plan.hash_specs) {
        if (spec.sparse_index >= hashed.size()) {
            out.push_back("hash spec index " + std::to_string(spec.sparse_index) + " out of range");
            continue;
        }
        ++hashed[spec.sparse_index];
        if (spec.params.max_value < 1) out.push_back("hash max value must be >= 1");
    }
    for (std::size_t k = 0; k < hashed.size(); ++k) {
        if (hashed[k] != 1) {
            out.push_back("sparse feature " + std::to_string(k) + " hashed " +
                          std::to_string(hashed[k]) + " times");
        }
    }
    std::vector<int> logged(schema.num_dense, 0);
    for (auto i : plan.log_specs) {
        if (i >= logged.size()) {
            out.push_back("log spec index " + std::to_string(i) + " out of range");
            continue;
        }
        ++logged[i];
    }
    for (std::size_t i = 0; i < logged.size(); ++i) {
        if (logged[i] != 1) out.push_back("dense feature " + std::to_string(i) + " not logged once");
    }
    return out;
}

} // namespace rsetl
