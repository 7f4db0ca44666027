// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end preprocessing runtime. A coordinator resolves the trainer rate
// T and per-worker rate P, provisions ceil(T/P) workers, and runs them as
// real threads feeding a bounded queue drained by the trainer sink.
//
// Deployment modes differ only in what crosses the emulated network:
//   colocated   nothing; worker count limited by the core budget
//   disagg_cpu  raw partition files in, tensors out
//   isp         tensors out only (raw data is read next to the storage)
//
#pragma once

#include "rsetl/columnar.hpp"
#include "rsetl/error.hpp"
#include "rsetl/network.hpp"
#include "rsetl/provision.hpp"
#include "rsetl/queue.hpp"
#include "rsetl/schema.hpp"
#include "rsetl/trainer.hpp"
#include "rsetl/transforms.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace rsetl {

enum class Mode { kColocated, kDisaggCpu, kIsp };

inline std::string_view to_string(Mode m) {
    switch (m) {
    case Mode::kColocated: return "colocated";
    case Mode::kDisaggCpu: return "disagg_cpu";
    case Mode::kIsp: return "isp";
    }
    return "?";
}

inline Mode parse_mode(std::string_view s) {
    if (s == "colocated") return Mode::kColocated;
    if (s == "disagg_cpu") return Mode::kDisaggCpu;
    if (s == "isp") return Mode::kIsp;
    throw InvalidArgument("invalid mode '" + std::string(s) + "' (expected colocated, disagg_cpu or isp)");
}

inline constexpr double kUnthrottled = std::numeric_limits<double>::infinity();
inline constexpr std::string_view kWorkersEnvVar = "PRESTO_WORKERS";

struct DeploymentSpec {
    Mode mode = Mode::kColocated;
    /// nullopt: auto, i.e. PRESTO_WORKERS if set, else ceil(T/P).
    std::optional<std::size_t> worker_count;
    /// nullopt: calibrate T against the sink running at sink_rate.
    std::optional<double> trainer_rate;
    /// True capacity of the emulated trainer, used when calibrating.
    double sink_rate = 50.0;
    NetworkModel network;
    std::size_t colocated_core_budget = 16;
    /// 0 selects 2 x worker count.
    std::size_t queue_capacity = 0;
    TrainerCalibrationOptions trainer_calibration;
    std::size_t worker_calibration_runs = 3;
    std::size_t worker_calibration_partitions = 3;
    bool impose_network_delay = true;
    bool record_digests = true;
};

struct RunBudget {
    std::optional<std::size_t> max_batches;
    std::optional<double> duration_seconds;
};

inline constexpr std::array<std::string_view, 7> kStageNames{
    "extract_read", "extract_decode", "bucketize", "sigridhash", "log", "batch_convert", "rpc_transfer"};

struct StageTimings {
    double extract_read = 0;
    double extract_decode = 0;
    double bucketize = 0;
    double sigridhash = 0;
    double log = 0;
    double batch_convert = 0;
    double rpc_transfer = 0;

    std::array<double, 7> as_array() const {
        return {extract_read, extract_decode, bucketize, sigridhash, log, batch_convert, rpc_transfer};
    }
    double sum() const {
        double s = 0;
        for (double v : as_array()) s += v;
        return s;
    }
};

struct BatchRecord {
    std::uint64_t seq_no = 0;
    std::size_t worker = 0;
    int attempt = 0;
    std::uint64_t rows = 0;
    std::uint64_t raw_bytes = 0;
    std::uint64_t tensor_bytes = 0;
    std::uint64_t content_digest = 0;
    StageTimings stages;
    double wall_seconds = 0;
    std::uint64_t arrival_index = 0;
};

struct StageStats {
    double mean = 0;
    double p50 = 0;
    double p95 = 0;
    double min = 0;
    double max = 0;
};

struct RunReport {
    Mode mode = Mode::kColocated;
    std::size_t worker_count = 0;
    bool workers_from_env = false;
    bool provision_clamped = false;
    std::size_t queue_capacity = 0;
    double trainer_rate = 0;
    std::optional<TrainerCalibration> trainer_calibration;
    std::optional<double> worker_rate;

    std::uint64_t batches = 0;
    double wall_seconds = 0;
    double throughput = 0;
    double trainer_utilization = 0;
    std::array<StageStats, 7> stages{};
    NetworkTotals network;
    std::size_t max_queue_occupancy = 0;
    std::size_t retries = 0;

    /// Trainer arrival order.
    std::vector<std::uint64_t> consumed_seq_nos;
    /// Sorted by seq_no.
    std::vector<BatchRecord> records;
};

/// Called before each processing attempt; throwing simulates a worker crash.
using FaultInjector = std::function<void(std::uint64_t partition_id, int attempt)>;

/// Minimal n with n * P >= T.
inline std::size_t provision_workers(double trainer_rate, double worker_rate) {
    return minimal_units(trainer_rate, worker_rate);
}

namespace detail {

inline double seconds_between(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

} // namespace detail

/// Extract (read, decode) -> transform -> tensor RPC for one partition.
/// `network` is null in colocated mode.
inline MiniBatch process_partition(const PartitionInfo& part, Mode mode, NetworkEmulator* network,
                                   const FeatureSchema& schema, const TransformPlan& plan, BatchRecord& rec) {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    rec.seq_no = part.id;

    std::vector<RawChunk> chunks;
    std::uint64_t rows = 0;
    if (mode == Mode::kDisaggCpu) {
        const Bytes file = read_file(part.path);
        network->transfer(file.size(), Channel::kRawIn);
        auto reader = PartitionReader::from_memory(file);
        chunks = reader.read_all_chunks();
        rows = reader.row_count();
        rec.raw_bytes = file.size();
    } else {
        auto reader = PartitionReader::open(part.path);
        chunks = reader.read_all_chunks();
        rows = reader.row_count();
        rec.raw_bytes = reader.io().bytes_read;
    }
    const auto t1 = Clock::now();

    RawTable raw = assemble_table(decode_chunks(chunks), rows);
    chunks.clear();
    if (raw.dense.size() != schema.num_dense || raw.sparse.size() != schema.num_sparse) {
        throw FormatError("partition '" + part.path.string() + "' does not match the schema");
    }
    const auto t2 = Clock::now();

    TransformTimings tt;
    MiniBatch mb = transform_partition(part.id, raw, plan, schema, SequentialExecutor{}, &tt);
    const auto t3 = Clock::now();

    rec.rows = mb.rows;
    rec.tensor_bytes = serialized_size(mb);
    if (mode != Mode::kColocated) network->transfer(rec.tensor_bytes, Channel::kTensorsOut);
    const auto t4 = Clock::now();

    rec.stages.extract_read = detail::seconds_between(t0, t1);
    rec.stages.extract_decode = detail::seconds_between(t1, t2);
    rec.stages.bucketize = tt.bucketize;
    rec.stages.sigridhash = tt.sigridhash;
    rec.stages.log = tt.log;
    rec.stages.batch_convert = tt.batch_convert;
    rec.stages.rpc_transfer = detail::seconds_between(t3, t4);
    rec.wall_seconds = detail::seconds_between(t0, t4);
    return mb;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw InvalidArgument("median of empty sample");
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Mini-batches/sec of one worker end to end, including the content digest
/// when digests are recorded: median over repeated passes across the sample
/// partitions, each pass timed as a whole.
inline double calibrate_worker_throughput(const DeploymentSpec& deployment, const FeatureSchema& schema,
                                          const TransformPlan& plan, std::span<const PartitionInfo> samples) {
    if (samples.size() < 3) {
        throw InvalidArgument("worker calibration needs at least 3 sample partitions, got " +
                              std::to_string(samples.size()));
    }
    const auto runs = std::max<std::size_t>(deployment.worker_calibration_runs, 3);
    std::optional<NetworkEmulator> net;
    if (deployment.mode != Mode::kColocated) net.emplace(deployment.network, deployment.impose_network_delay);

    std::vector<double> rates;
    volatile std::uint64_t digest_sink = 0;
    for (std::size_t r = 0; r < runs; ++r) {
        const auto start = std::chrono::steady_clock::now();
        for (const auto& part : samples) {
            BatchRecord rec;
            const auto mb = process_partition(part, deployment.mode, net ? &*net : nullptr, schema, plan, rec);
            if (deployment.record_digests) digest_sink = content_digest(mb);
        }
        const double elapsed = detail::seconds_between(start, std::chrono::steady_clock::now());
        rates.push_back(static_cast<double>(samples.size()) / std::max(elapsed, 1e-9));
    }
    return median(rates);
}

inline std::optional<std::size_t> workers_from_env() {
    const char* v = std::getenv(std::string(kWorkersEnvVar).c_str());
    if (v == nullptr || *v == '\0') return std::nullopt;
    try {
        std::size_t used = 0;
        const long long n = std::stoll(v, &used);
        if (used != std::strlen(v) || n < 1) throw std::invalid_argument("range");
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw InvalidArgument(std::string(kWorkersEnvVar) + " must be a positive integer, got '" + v + "'");
    }
}

namespace detail {

inline StageStats summarize(std::vector<double> v) {
    StageStats s;
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    double sum = 0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    auto pct = [&](double q) {
        const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) ;
        return v[std::min(v.size() - 1, idx == 0 ? 0 : idx - 1)];
    };
    s.p50 = pct(0.50);
    s.p95 = pct(0.95);
    s.min = v.front();
    s.max = v.back();
    return s;
}

struct QueueItem {
    MiniBatch batch;
    BatchRecord record;
};

} // namespace detail

inline void validate_deployment(const DeploymentSpec& d) {
    if (d.worker_count && *d.worker_count < 1) throw InvalidArgument("worker count must be >= 1");
    if (d.trainer_rate && !(*d.trainer_rate > 0)) throw InvalidArgument("trainer rate must be > 0");
    if (d.mode != Mode::kColocated) {
        if (!d.network.enabled) throw InvalidArgument(std::string(to_string(d.mode)) + " mode needs a network model");
        validate(d.network);
    }
    if (d.mode == Mode::kColocated && d.worker_count && *d.worker_count > d.colocated_core_budget) {
        throw InvalidArgument("colocated mode: " + std::to_string(*d.worker_count) + " workers exceed the core budget of " +
                              std::to_string(d.colocated_core_budget));
    }
}

/// Provisions, runs and reports. Partitions are assigned to workers
/// round-robin by id; a failed partition is retried once, a second failure
/// aborts the run with a PipelineError.
inline RunReport run_pipeline(const DeploymentSpec& deployment, const FeatureSchema& schema,
                              const TransformPlan& plan, const PartitionSet& partitions,
                              const RunBudget& budget = {}, const FaultInjector& fault = {}) {
    validate_deployment(deployment);
    if (partitions.partitions.empty()) throw InvalidArgument("no partitions to process");

    RunReport report;
    report.mode = deployment.mode;

    // Train manager: T.
    if (deployment.trainer_rate) {
        report.trainer_rate = *deployment.trainer_rate;
    } else {
        TrainerSink probe(deployment.sink_rate);
        report.trainer_calibration = calibrate_trainer_throughput(probe, schema, deployment.trainer_calibration);
        report.trainer_rate = report.trainer_calibration->rate;
    }

    // Preprocess manager: P and ceil(T/P).
    std::size_t n = 0;
    if (deployment.worker_count) {
        n = *deployment.worker_count;
    } else if (auto env = workers_from_env()) {
        n = *env;
        report.workers_from_env = true;
    } else {
        const auto k = std::min(partitions.partitions.size(), std::max<std::size_t>(deployment.worker_calibration_partitions, 3));
        const std::span<const PartitionInfo> samples(partitions.partitions.data(), k);
        report.worker_rate = calibrate_worker_throughput(deployment, schema, plan, samples);
        n = std::isinf(report.trainer_rate) ? deployment.colocated_core_budget
                                            : provision_workers(report.trainer_rate, *report.worker_rate);
    }
    if (deployment.mode == Mode::kColocated && n > deployment.colocated_core_budget) {
        if (deployment.worker_count) {
            throw InvalidArgument("colocated mode: worker count exceeds the core budget");
        }
        n = deployment.colocated_core_budget;
        report.provision_clamped = true;
    }
    report.worker_count = n;

    std::vector<const PartitionInfo*> work;
    for (const auto& p : partitions.partitions) work.push_back(&p);
    if (budget.max_batches && *budget.max_batches < work.size()) work.resize(*budget.max_batches);

    report.queue_capacity = deployment.queue_capacity ? deployment.queue_capacity : 2 * n;
    BoundedQueue<detail::QueueItem> queue(report.queue_capacity);
    std::optional<NetworkEmulator> net;
    if (deployment.mode != Mode::kColocated) net.emplace(deployment.network, deployment.impose_network_delay);

    std::atomic<bool> abort{false};
    std::atomic<std::size_t> live_workers{n};
    std::atomic<std::size_t> retries{0};
    std::mutex diag_mu;
    std::string diagnostics;

    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    const auto deadline = budget.duration_seconds
                              ? std::optional(start + std::chrono::duration_cast<Clock::duration>(
                                                          std::chrono::duration<double>(*budget.duration_seconds)))
                              : std::nullopt;

    auto worker_main = [&](std::size_t w) {
        std::deque<std::pair<const PartitionInfo*, int>> todo;
        for (const auto* p : work) {
            if (p->id % n == w) todo.emplace_back(p, 0);
        }
        while (!todo.empty() && !abort.load()) {
            if (deadline && Clock::now() >= *deadline) break;
            auto [part, attempt] = todo.front();
            todo.pop_front();
            detail::QueueItem item;
            try {
                if (fault) fault(part->id, attempt);
                item.batch = process_partition(*part, deployment.mode, net ? &*net : nullptr, schema, plan, item.record);
            } catch (const std::exception& e) {
                if (attempt == 0) {
                    ++retries;
                    todo.emplace_back(part, 1);
                    continue;
                }
                {
                    std::lock_guard lock(diag_mu);
                    diagnostics += "worker " + std::to_string(w) + " failed twice on partition " +
                                   std::to_string(part->id) + " (" + part->path.string() + "): " + e.what() + "\n";
                }
                abort = true;
                queue.close();
                break;
            }
            item.record.worker = w;
            item.record.attempt = attempt;
            if (deployment.record_digests) item.record.content_digest = content_digest(item.batch);
            if (!queue.push(std::move(item))) break;
        }
        if (live_workers.fetch_sub(1) == 1) queue.close();
    };

    {
        std::vector<std::jthread> workers;
        workers.reserve(n);
        for (std::size_t w = 0; w < n; ++w) workers.emplace_back(worker_main, w);

        // Train manager: drain the input queue into the trainer.
        TrainerSink sink(report.trainer_rate);
        try {
            while (auto item = queue.pop()) {
                sink.consume(item->batch);
                item->record.arrival_index = report.consumed_seq_nos.size();
                report.consumed_seq_nos.push_back(item->record.seq_no);
                report.records.push_back(std::move(item->record));
            }
        } catch (...) {
            abort = true;
            queue.close();
            throw;
        }
        report.wall_seconds = detail::seconds_between(start, std::max(Clock::now(), sink.last_slot_end()));
        report.trainer_utilization =
            report.wall_seconds > 0 ? std::clamp(sink.busy_seconds() / report.wall_seconds, 0.0, 1.0) : 0.0;
    }
    if (abort.load()) throw PipelineError("pipeline aborted:\n" + diagnostics);

    report.batches = report.consumed_seq_nos.size();
    report.throughput = report.wall_seconds > 0 ? static_cast<double>(report.batches) / report.wall_seconds : 0.0;
    report.retries = retries.load();
    report.max_queue_occupancy = queue.max_occupancy();
    if (net) report.network = net->totals();

    std::sort(report.records.begin(), report.records.end(),
              [](const BatchRecord& a, const BatchRecord& b) { return a.seq_no < b.seq_no; });
    for (std::size_t s = 0; s < kStageNames.size(); ++s) {
        std::vector<double> v;
        v.reserve(report.records.size());
        for (const auto& r : report.records) v.push_back(r.stages.as_array()[s]);
        report.stages[s] = detail::summarize(std::move(v));
    }
    return report;
}

struct SweepPoint {
    std::size_t workers = 0;
    double throughput = 0;
    double speedup = 0;
    double efficiency = 0;
    bool oversubscribed = false;
};

/// One unthrottled run per worker count. Speedup is relative to the first
/// count; efficiency = speedup / (count / first count).
inline std::vector<SweepPoint> scaling_sweep(const DeploymentSpec& deployment, const FeatureSchema& schema,
                                             const TransformPlan& plan, const PartitionSet& partitions,
                                             std::span<const std::size_t> counts, const RunBudget& budget = {}) {
    if (counts.empty()) throw InvalidArgument("sweep needs at least one worker count");
    for (auto c : counts) {
        if (c < 1) throw InvalidArgument("sweep worker counts must be >= 1");
    }
    const auto hw = std::max(1u, std::thread::hardware_concurrency());
    std::vector<SweepPoint> out;
    for (auto c : counts) {
        DeploymentSpec d = deployment;
        d.worker_count = c;
        d.trainer_rate = kUnthrottled;
        d.record_digests = false;
        const auto rep = run_pipeline(d, schema, plan, partitions, budget);
        out.push_back({c, rep.throughput, 0, 0, c > hw});
    }
    const double base = out.front().throughput;
    const double base_count = static_cast<double>(out.front().workers);
    for (auto& p : out) {
        p.speedup = base > 0 ? p.throughput / base : 0;
        p.efficiency = p.speedup / (static_cast<double>(p.workers) / base_count);
    }
    return out;
}

} // namespace rsetl
