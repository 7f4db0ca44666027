// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// Stand-in for the GPU trainer: a rate limiter that spends exactly 1/rate
// seconds "training" on each mini-batch handed to it.
//
#pragma once

#include "rsetl/error.hpp"
#include "rsetl/schema.hpp"
#include "rsetl/transforms.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <thread>

namespace rsetl {

class TrainerSink {
public:
    using Clock = std::chrono::steady_clock;

    /// `rate` in mini-batches/sec; +infinity means unthrottled.
    explicit TrainerSink(double rate) : rate_(rate) {}

    double rate() const noexcept { return rate_; }

    /// Blocks until the batch's training slot has elapsed. Slots never
    /// overlap: a batch arriving while the previous one trains waits for it.
    void consume(const MiniBatch& /*batch*/) {
        if (!(rate_ > 0) || std::isnan(rate_)) {
            throw PipelineError("trainer sink failure: rate must be positive (got " + std::to_string(rate_) + ")");
        }
        const auto now = Clock::now();
        if (consumed_ == 0) first_start_ = now;
        const auto start = consumed_ > 0 && now < slot_end_ ? slot_end_ : now;
        if (std::isinf(rate_)) {
            slot_end_ = start;
        } else {
            const double slot = 1.0 / rate_;
            slot_end_ = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(slot));
            busy_seconds_ += slot;
            std::this_thread::sleep_until(slot_end_);
        }
        ++consumed_;
    }

    std::uint64_t consumed() const noexcept { return consumed_; }
    double busy_seconds() const noexcept { return busy_seconds_; }
    Clock::time_point last_slot_end() const noexcept { return slot_end_; }

private:
    double rate_;
    std::uint64_t consumed_ = 0;
    double busy_seconds_ = 0;
    Clock::time_point first_start_{};
    Clock::time_point slot_end_{};
};

struct TrainerCalibrationOptions {
    double window_seconds = 5.0;
    double warmup_seconds = 0.5;
    std::size_t dummy_rows = 256;
};

struct TrainerCalibration {
    double rate = 0;
    double window_seconds = 0;
    double warmup_seconds = 0;
    std::uint64_t batches = 0;
};

/// Zero-filled mini-batch with the schema's tensor shape (length-1 lists).
inline MiniBatch dummy_minibatch(const FeatureSchema& schema, std::size_t rows) {
    MiniBatch mb;
    mb.rows = rows;
    mb.num_dense = schema.num_dense;
    mb.dense.assign(rows * schema.num_dense, 0.0f);
    SparseColumn col;
    col.offsets.resize(rows + 1);
    for (std::size_t r = 0; r <= rows; ++r) col.offsets[r] = r;
    col.values.assign(rows, 0);
    mb.sparse_features.assign(schema.total_sparse(), col);
    return mb;
}

/// Stress-tests the sink with dummy batches: warm up, then count batches
/// consumed over the measurement window.
inline TrainerCalibration calibrate_trainer_throughput(TrainerSink& sink, const FeatureSchema& schema,
                                                       const TrainerCalibrationOptions& opt = {}) {
    if (!(opt.window_seconds > 0)) throw InvalidArgument("calibration window must be positive");
    if (std::isinf(sink.rate())) throw PipelineError("cannot calibrate an unthrottled sink");
    const auto batch = dummy_minibatch(schema, opt.dummy_rows);
    using Clock = TrainerSink::Clock;
    const auto seconds_since = [](Clock::time_point t) {
        return std::chrono::duration<double>(Clock::now() - t).count();
    };

    const auto warm_start = Clock::now();
    do {
        sink.consume(batch);
    } while (seconds_since(warm_start) < opt.warmup_seconds);

    const auto start = Clock::now();
    std::uint64_t n = 0;
    double elapsed = 0;
    do {
        sink.consume(batch);
        ++n;
        elapsed = seconds_since(start);
    } while (elapsed < opt.window_seconds);
    return {static_cast<double>(n) / elapsed, opt.window_seconds, opt.warmup_seconds, n};
}

} // namespace rsetl
