// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
#include "rsetl/pipeline.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

using namespace rsetl;

namespace {

struct Dataset {
    rsetl::test::TempDir dir;
    FeatureSchema schema;
    TransformPlan plan;
    PartitionSet parts;

    Dataset(const FeatureSchema& s, std::size_t partitions, std::size_t rows_per_partition, std::uint64_t seed = 1)
        : schema(s), plan(derive_transform_plan(s, seed)) {
        const auto table = generate(s, GenSpec::for_schema(s, partitions * rows_per_partition, seed));
        parts = shard(table, rows_per_partition, s, dir.path());
    }
};

DeploymentSpec fast(Mode mode, std::size_t workers) {
    DeploymentSpec d;
    d.mode = mode;
    d.worker_count = workers;
    d.trainer_rate = kUnthrottled;
    d.network = {10e9, 0.0, true};
    return d;
}

std::set<std::uint64_t> ids(const PartitionSet& p) {
    std::set<std::uint64_t> out;
    for (const auto& x : p.partitions) out.insert(x.id);
    return out;
}

class EnvGuard {
public:
    explicit EnvGuard(const char* value) {
        if (value) ::setenv(std::string(kWorkersEnvVar).c_str(), value, 1);
        else ::unsetenv(std::string(kWorkersEnvVar).c_str());
    }
    ~EnvGuard() { ::unsetenv(std::string(kWorkersEnvVar).c_str()); }
};

} // namespace

TEST(ProvisionWorkers, Examples) {
    EXPECT_EQ(provision_workers(9000, 1000), 9u);
    EXPECT_EQ(provision_workers(9001, 1000), 10u);
    EXPECT_EQ(provision_workers(50, 1000), 1u);
    EXPECT_THROW(provision_workers(0, 1000), InvalidArgument);
}

TEST(Mode, ParseAndPrint) {
    for (auto m : {Mode::kColocated, Mode::kDisaggCpu, Mode::kIsp}) EXPECT_EQ(parse_mode(to_string(m)), m);
    EXPECT_THROW(parse_mode("cloud"), InvalidArgument);
}

TEST(RunPipeline, ExactlyOnceInEveryMode) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM1").schema, 100, 16);
    for (auto mode : {Mode::kColocated, Mode::kDisaggCpu, Mode::kIsp}) {
        for (std::size_t n : {1u, 4u}) {
            const auto r = run_pipeline(fast(mode, n), data.schema, data.plan, data.parts);
            SCOPED_TRACE(std::string(to_string(mode)) + " n=" + std::to_string(n));
            EXPECT_EQ(r.batches, 100u);
            EXPECT_EQ(r.consumed_seq_nos.size(), 100u);
            EXPECT_EQ(std::set<std::uint64_t>(r.consumed_seq_nos.begin(), r.consumed_seq_nos.end()), ids(data.parts));
            EXPECT_EQ(r.worker_count, n);
            EXPECT_EQ(r.queue_capacity, 2 * n);
            for (const auto& rec : r.records) EXPECT_EQ(rec.worker, rec.seq_no % n);
        }
    }
}

TEST(RunPipeline, ModeByteAccounting) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM2").schema, 12, 32);
    const auto col = run_pipeline(fast(Mode::kColocated, 2), data.schema, data.plan, data.parts);
    const auto dis = run_pipeline(fast(Mode::kDisaggCpu, 2), data.schema, data.plan, data.parts);
    const auto isp = run_pipeline(fast(Mode::kIsp, 2), data.schema, data.plan, data.parts);

    EXPECT_EQ(col.network.raw_in_bytes + col.network.tensors_out_bytes, 0u);
    EXPECT_EQ(col.network.calls, 0u);
    EXPECT_EQ(isp.network.raw_in_bytes, 0u);
    EXPECT_EQ(dis.network.raw_in_bytes, data.parts.total_bytes());

    std::uint64_t tensor_bytes = 0;
    for (const auto& rec : isp.records) tensor_bytes += rec.tensor_bytes;
    EXPECT_EQ(isp.network.tensors_out_bytes, tensor_bytes);
    EXPECT_EQ(dis.network.tensors_out_bytes, tensor_bytes);
    EXPECT_GT(dis.network.rpc_seconds, isp.network.rpc_seconds);
    EXPECT_EQ(isp.network.calls, 12u);
    EXPECT_EQ(dis.network.calls, 24u);
}

TEST(RunPipeline, DisaggRpcExceedsIspOnRm5) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM5").schema, 4, 64);
    auto d = fast(Mode::kDisaggCpu, 2);
    d.network = parse_network("10G,200us");
    const auto dis = run_pipeline(d, data.schema, data.plan, data.parts);
    d.mode = Mode::kIsp;
    const auto isp = run_pipeline(d, data.schema, data.plan, data.parts);
    EXPECT_GT(dis.network.rpc_seconds, isp.network.rpc_seconds);
    double dis_rpc_stage = 0, isp_rpc_stage = 0;
    for (const auto& r : dis.records) dis_rpc_stage += r.stages.rpc_transfer;
    for (const auto& r : isp.records) isp_rpc_stage += r.stages.rpc_transfer;
    EXPECT_GT(isp_rpc_stage, 0.0);
    EXPECT_GT(dis.network.rpc_seconds, 0.0);
    (void)dis_rpc_stage;
}

TEST(RunPipeline, ContentIndependentOfWorkerCount) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM2").schema, 10, 20);
    const auto one = run_pipeline(fast(Mode::kIsp, 1), data.schema, data.plan, data.parts);
    const auto four = run_pipeline(fast(Mode::kIsp, 4), data.schema, data.plan, data.parts);
    ASSERT_EQ(one.records.size(), four.records.size());
    for (std::size_t i = 0; i < one.records.size(); ++i) {
        EXPECT_EQ(one.records[i].seq_no, four.records[i].seq_no);
        EXPECT_EQ(one.records[i].content_digest, four.records[i].content_digest);
        EXPECT_NE(one.records[i].content_digest, 0u);
    }
}

TEST(RunPipeline, BackpressureBoundsQueue) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM1").schema, 30, 8);
    auto d = fast(Mode::kColocated, 4);
    d.trainer_rate = 300.0;
    d.queue_capacity = 1;
    const auto r = run_pipeline(d, data.schema, data.plan, data.parts);
    EXPECT_EQ(r.batches, 30u);
    EXPECT_EQ(r.queue_capacity, 1u);
    EXPECT_LE(r.max_queue_occupancy, 1u);
    EXPECT_GE(r.wall_seconds, 30.0 / 300.0 - 1e-3);
}

TEST(RunPipeline, StageTimingsWithinBatchWall) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM2").schema, 4, 64);
    auto d = fast(Mode::kDisaggCpu, 1);
    d.network = parse_network("1G,100us");
    const auto r = run_pipeline(d, data.schema, data.plan, data.parts);
    for (const auto& rec : r.records) {
        for (double v : rec.stages.as_array()) EXPECT_GE(v, 0.0);
        EXPECT_LE(rec.stages.sum(), rec.wall_seconds + 1e-9);
        EXPECT_GT(rec.stages.extract_read, 0.0);
        EXPECT_GT(rec.stages.rpc_transfer, 0.0);
    }
    EXPECT_GE(r.stages[0].p95, r.stages[0].p50);
    EXPECT_GE(r.stages[0].max, r.stages[0].p95);
}

TEST(RunPipeline, CrashIsRetriedOnce) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM1").schema, 10, 8);
    const auto r = run_pipeline(fast(Mode::kIsp, 3), data.schema, data.plan, data.parts, {},
                                [](std::uint64_t pid, int attempt) {
                                    if (pid == 3 && attempt == 0) throw std::runtime_error("injected crash");
                                });
    EXPECT_EQ(r.batches, 10u);
    EXPECT_EQ(r.retries, 1u);
    EXPECT_EQ(r.records[3].attempt, 1);
    EXPECT_EQ(std::set<std::uint64_t>(r.consumed_seq_nos.begin(), r.consumed_seq_nos.end()), ids(data.parts));
}

TEST(RunPipeline, SecondCrashAborts) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM1").schema, 10, 8);
    try {
        (void)run_pipeline(fast(Mode::kColocated, 2), data.schema, data.plan, data.parts, {},
                           [](std::uint64_t pid, int) {
                               if (pid == 5) throw std::runtime_error("disk on fire");
                           });
        FAIL() << "expected PipelineError";
    } catch (const PipelineError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("partition 5"), std::string::npos) << msg;
        EXPECT_NE(msg.find("disk on fire"), std::string::npos) << msg;
    }
}

TEST(RunPipeline, CorruptPartitionAborts) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM1").schema, 3, 8);
    {
        std::ofstream f(data.parts.partitions[1].path, std::ios::binary | std::ios::trunc);
        f << "garbage";
    }
    EXPECT_THROW(run_pipeline(fast(Mode::kIsp, 1), data.schema, data.plan, data.parts), PipelineError);
}

TEST(RunPipeline, BatchBudget) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM1").schema, 20, 4);
    RunBudget b;
    b.max_batches = 7;
    const auto r = run_pipeline(fast(Mode::kColocated, 3), data.schema, data.plan, data.parts, b);
    EXPECT_EQ(r.batches, 7u);
    EXPECT_EQ(std::set<std::uint64_t>(r.consumed_seq_nos.begin(), r.consumed_seq_nos.end()),
              (std::set<std::uint64_t>{0, 1, 2, 3, 4, 5, 6}));
}

TEST(RunPipeline, DeploymentValidation) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM1").schema, 3, 4);
    auto d = fast(Mode::kColocated, 64);
    EXPECT_THROW(run_pipeline(d, data.schema, data.plan, data.parts), InvalidArgument);
    d.worker_count = 0;
    EXPECT_THROW(run_pipeline(d, data.schema, data.plan, data.parts), InvalidArgument);
    d = fast(Mode::kIsp, 1);
    d.network = NetworkModel::disabled();
    EXPECT_THROW(run_pipeline(d, data.schema, data.plan, data.parts), InvalidArgument);
    d = fast(Mode::kIsp, 1);
    d.trainer_rate = 0.0;
    EXPECT_THROW(run_pipeline(d, data.schema, data.plan, data.parts), InvalidArgument);
    EXPECT_THROW(run_pipeline(fast(Mode::kIsp, 1), data.schema, data.plan, PartitionSet{}), InvalidArgument);
}

TEST(RunPipeline, EnvironmentOverridesAuto) {
    Dataset data(preset("RM1").schema, 6, 4);
    auto d = fast(Mode::kIsp, 1);
    d.worker_count.reset();
    {
        EnvGuard env("3");
        const auto r = run_pipeline(d, data.schema, data.plan, data.parts);
        EXPECT_TRUE(r.workers_from_env);
        EXPECT_EQ(r.worker_count, 3u);
        EXPECT_FALSE(r.worker_rate.has_value());
    }
    {
        EnvGuard env("zero");
        EXPECT_THROW(run_pipeline(d, data.schema, data.plan, data.parts), InvalidArgument);
    }
}

TEST(RunPipeline, AutoProvisionsCeilTOverP) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM1").schema, 12, 256);
    auto d = fast(Mode::kIsp, 1);
    d.worker_count.reset();
    d.trainer_rate = 400.0;
    const auto r = run_pipeline(d, data.schema, data.plan, data.parts);
    ASSERT_TRUE(r.worker_rate.has_value());
    EXPECT_GT(*r.worker_rate, 0.0);
    EXPECT_EQ(r.worker_count, provision_workers(400.0, *r.worker_rate));
}

TEST(RunPipeline, ColocatedAutoClampedToBudget) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM1").schema, 6, 64);
    auto d = fast(Mode::kColocated, 1);
    d.worker_count.reset();
    d.trainer_rate = 1e9;
    d.colocated_core_budget = 2;
    const auto r = run_pipeline(d, data.schema, data.plan, data.parts);
    EXPECT_EQ(r.worker_count, 2u);
    EXPECT_TRUE(r.provision_clamped);
}

TEST(RunPipeline, CalibratesTrainerWhenRateUnset) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM1").schema, 3, 4);
    auto d = fast(Mode::kColocated, 1);
    d.trainer_rate.reset();
    d.sink_rate = 200.0;
    d.trainer_calibration.window_seconds = 0.5;
    d.trainer_calibration.warmup_seconds = 0.1;
    const auto r = run_pipeline(d, data.schema, data.plan, data.parts);
    ASSERT_TRUE(r.trainer_calibration.has_value());
    EXPECT_NEAR(r.trainer_rate, 200.0, 4.0);
    EXPECT_DOUBLE_EQ(r.trainer_calibration->window_seconds, 0.5);
}

TEST(RunPipeline, UtilizationLawSingleWorker) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM2").schema, 40, 256);
    DeploymentSpec probe = fast(Mode::kColocated, 1);
    const std::span<const PartitionInfo> samples(data.parts.partitions.data(), 3);
    const double p = calibrate_worker_throughput(probe, data.schema, data.plan, samples);

    // Trainer twice as fast as the worker: utilization about 1/2.
    auto d = fast(Mode::kColocated, 1);
    d.trainer_rate = 2.0 * p;
    const auto half = run_pipeline(d, data.schema, data.plan, data.parts);
    EXPECT_NEAR(half.trainer_utilization, 0.5, 0.05) << "P=" << p;

    // Trainer slower than the worker: saturated.
    d.trainer_rate = 0.5 * p;
    RunBudget b;
    b.max_batches = 20;
    const auto full = run_pipeline(d, data.schema, data.plan, data.parts, b);
    EXPECT_NEAR(full.trainer_utilization, 1.0, 0.1) << "P=" << p;
    EXPECT_LE(full.trainer_utilization, 1.0);
}

TEST(CalibrateWorker, NeedsThreeSamples) {
    Dataset data(preset("RM1").schema, 2, 4);
    EXPECT_THROW(calibrate_worker_throughput(fast(Mode::kIsp, 1), data.schema, data.plan, data.parts.partitions),
                 InvalidArgument);
}

TEST(CalibrateWorker, RepeatableAndOrderedByModelSize) {
    Dataset rm1(preset("RM1").schema, 3, 1024);
    Dataset rm5(preset("RM5").schema, 3, 1024);
    const auto d = fast(Mode::kColocated, 1);
    const double a = calibrate_worker_throughput(d, rm1.schema, rm1.plan, rm1.parts.partitions);
    const double b = calibrate_worker_throughput(d, rm1.schema, rm1.plan, rm1.parts.partitions);
    EXPECT_LE(std::abs(a - b) / std::max(a, b), 0.10) << a << " vs " << b;
    const double p5 = calibrate_worker_throughput(d, rm5.schema, rm5.plan, rm5.parts.partitions);
    EXPECT_LT(p5, a);
}

TEST(CalibrateWorker, OneRowPartitionsFinite) {
    Dataset data(preset("RM1").schema, 3, 1);
    const double p = calibrate_worker_throughput(fast(Mode::kDisaggCpu, 1), data.schema, data.plan, data.parts.partitions);
    EXPECT_TRUE(std::isfinite(p));
    EXPECT_GT(p, 0.0);
}

TEST(ScalingSweep, ShapeAndOversubscription) {
    EnvGuard env(nullptr);
    Dataset data(preset("RM1").schema, 8, 64);
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::vector<std::size_t> counts{1, 2, hw + 1};
    const auto pts = scaling_sweep(fast(Mode::kIsp, 1), data.schema, data.plan, data.parts, counts);
    ASSERT_EQ(pts.size(), 3u);
    EXPECT_DOUBLE_EQ(pts[0].speedup, 1.0);
    EXPECT_DOUBLE_EQ(pts[0].efficiency, 1.0);
    EXPECT_FALSE(pts[0].oversubscribed);
    EXPECT_TRUE(pts[2].oversubscribed);
    for (const auto& p : pts) EXPECT_GT(p.throughput, 0.0);
    const std::vector<std::size_t> bad{0};
    EXPECT_THROW(scaling_sweep(fast(Mode::kIsp, 1), data.schema, data.plan, data.parts, bad), InvalidArgument);
}

TEST(Median, OddEvenEmpty) {
    EXPECT_DOUBLE_EQ(median({3, 1, 2}), 2.0);
    EXPECT_DOUBLE_EQ(median({4, 1, 2, 3}), 2.5);
    EXPECT_THROW(median({}), InvalidArgument);
}
