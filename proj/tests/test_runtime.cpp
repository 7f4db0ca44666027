// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// Queue, network emulation, trainer sink and provisioning arithmetic.
//
#include "rsetl/network.hpp"
#include "rsetl/provision.hpp"
#include "rsetl/queue.hpp"
#include "rsetl/trainer.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <random>
#include <set>
#include <thread>

using namespace rsetl;
using namespace std::chrono_literals;

TEST(BoundedQueue, FifoAndCloseDrains) {
    BoundedQueue<int> q(4);
    EXPECT_TRUE(q.push(1));
    EXPECT_TRUE(q.push(2));
    q.close();
    EXPECT_FALSE(q.push(3));
    EXPECT_EQ(q.pop(), 1);
    EXPECT_EQ(q.pop(), 2);
    EXPECT_EQ(q.pop(), std::nullopt);
}

TEST(BoundedQueue, ProducerBlocksWhenFull) {
    BoundedQueue<int> q(2);
    ASSERT_TRUE(q.push(1));
    ASSERT_TRUE(q.push(2));
    std::atomic<bool> pushed{false};
    std::jthread producer([&] {
        q.push(3);
        pushed = true;
    });
    std::this_thread::sleep_for(100ms);
    EXPECT_FALSE(pushed.load());
    EXPECT_EQ(q.size(), 2u);
    EXPECT_EQ(q.pop(), 1);
    producer.join();
    EXPECT_TRUE(pushed.load());
    EXPECT_LE(q.max_occupancy(), 2u);
}

TEST(BoundedQueue, CloseReleasesBlockedProducer) {
    BoundedQueue<int> q(1);
    ASSERT_TRUE(q.push(1));
    std::atomic<int> result{-1};
    std::jthread producer([&] { result = q.push(2) ? 1 : 0; });
    std::this_thread::sleep_for(50ms);
    q.close();
    producer.join();
    EXPECT_EQ(result.load(), 0);
}

TEST(BoundedQueue, ManyProducersExactlyOnce) {
    BoundedQueue<int> q(3);
    constexpr int kProducers = 6, kEach = 500;
    std::atomic<int> live{kProducers};
    std::vector<std::jthread> producers;
    for (int p = 0; p < kProducers; ++p) {
        producers.emplace_back([&, p] {
            for (int i = 0; i < kEach; ++i) q.push(p * kEach + i);
            if (live.fetch_sub(1) == 1) q.close();
        });
    }
    std::multiset<int> seen;
    std::vector<int> last(kProducers, -1);
    while (auto v = q.pop()) {
        seen.insert(*v);
        const int p = *v / kEach;
        EXPECT_GT(*v, last[static_cast<std::size_t>(p)]) << "per-producer FIFO violated";
        last[static_cast<std::size_t>(p)] = *v;
    }
    EXPECT_EQ(seen.size(), static_cast<std::size_t>(kProducers * kEach));
    EXPECT_EQ(std::set<int>(seen.begin(), seen.end()).size(), seen.size());
    EXPECT_LE(q.max_occupancy(), 3u);
    EXPECT_EQ(q.pushed(), static_cast<std::size_t>(kProducers * kEach));
}

TEST(Network, TransferSecondsFormula) {
    const NetworkModel m{10e9, 0.0, true};
    EXPECT_DOUBLE_EQ(transfer_seconds(1250000000ULL, m), 1.0);
    const NetworkModel lat{10e9, 200e-6, true};
    EXPECT_DOUBLE_EQ(transfer_seconds(0, lat), 200e-6);
}

TEST(Network, EmulatedTransferImposesDelay) {
    const NetworkModel m{8e6, 0.0, true}; // 1 MB/s
    const auto t0 = std::chrono::steady_clock::now();
    const double s = emulate_transfer(50000, m);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_DOUBLE_EQ(s, 0.05);
    EXPECT_GE(elapsed, 0.05);
}

TEST(Network, SequentialCallsAreAdditive) {
    NetworkEmulator emu({1e9, 1e-4, true}, false);
    const double a = emu.transfer(1000, Channel::kRawIn);
    const double b = emu.transfer(5000, Channel::kTensorsOut);
    const auto t = emu.totals();
    EXPECT_DOUBLE_EQ(t.rpc_seconds, a + b);
    EXPECT_EQ(t.raw_in_bytes, 1000u);
    EXPECT_EQ(t.tensors_out_bytes, 5000u);
    EXPECT_EQ(t.calls, 2u);
    EXPECT_EQ(emu.log().size(), 2u);
}

TEST(Network, DisabledAndInvalidModels) {
    NetworkEmulator off(NetworkModel::disabled());
    EXPECT_THROW(off.transfer(1, Channel::kRawIn), InvalidArgument);
    EXPECT_THROW(validate(NetworkModel{0.0, 0.0, true}), InvalidArgument);
    EXPECT_THROW(validate(NetworkModel{1e9, -1.0, true}), InvalidArgument);
}

TEST(Network, ParseSpec) {
    auto m = parse_network("10G,200us");
    EXPECT_DOUBLE_EQ(m.bandwidth_bps, 10e9);
    EXPECT_DOUBLE_EQ(m.per_call_latency_s, 200e-6);
    m = parse_network("100Mbps,1ms");
    EXPECT_DOUBLE_EQ(m.bandwidth_bps, 100e6);
    EXPECT_DOUBLE_EQ(m.per_call_latency_s, 1e-3);
    m = parse_network("2.5e9");
    EXPECT_DOUBLE_EQ(m.bandwidth_bps, 2.5e9);
    EXPECT_DOUBLE_EQ(m.per_call_latency_s, 0.0);
    EXPECT_THROW(parse_network("fast"), InvalidArgument);
    EXPECT_THROW(parse_network("10X,1us"), InvalidArgument);
    EXPECT_THROW(parse_network("0G,1us"), InvalidArgument);
    EXPECT_THROW(parse_network("10G,-1us"), InvalidArgument);
}

TEST(TrainerSink, PacesAtRate) {
    TrainerSink sink(100.0);
    const auto batch = dummy_minibatch(preset("RM1").schema, 4);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 20; ++i) sink.consume(batch);
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_GE(elapsed, 0.2 - 1e-3);
    EXPECT_LT(elapsed, 0.3);
    EXPECT_EQ(sink.consumed(), 20u);
    EXPECT_NEAR(sink.busy_seconds(), 0.2, 1e-9);
}

TEST(TrainerSink, ZeroOrNanRateFails) {
    const auto batch = dummy_minibatch(preset("RM1").schema, 1);
    TrainerSink zero(0.0);
    EXPECT_THROW(zero.consume(batch), PipelineError);
    TrainerSink neg(-3.0);
    EXPECT_THROW(neg.consume(batch), PipelineError);
    TrainerSink nan(std::numeric_limits<double>::quiet_NaN());
    EXPECT_THROW(nan.consume(batch), PipelineError);
    TrainerSink probe(0.0);
    EXPECT_THROW(calibrate_trainer_throughput(probe, preset("RM1").schema), PipelineError);
}

TEST(TrainerCalibration, FiftyPerSecondWithinTwoPercentAndRepeatable) {
    const auto s = preset("RM1").schema;
    TrainerCalibrationOptions opt;
    opt.window_seconds = 2.0;
    opt.warmup_seconds = 0.2;
    TrainerSink a(50.0), b(50.0);
    const auto c1 = calibrate_trainer_throughput(a, s, opt);
    const auto c2 = calibrate_trainer_throughput(b, s, opt);
    EXPECT_NEAR(c1.rate, 50.0, 1.0);
    EXPECT_NEAR(c2.rate, 50.0, 1.0);
    EXPECT_LE(std::abs(c1.rate - c2.rate) / c1.rate, 0.05);
    EXPECT_DOUBLE_EQ(c1.window_seconds, 2.0);
    EXPECT_DOUBLE_EQ(c1.warmup_seconds, 0.2);
    EXPECT_GT(c1.batches, 90u);
}

TEST(TrainerCalibration, DummyBatchShape) {
    const auto s = preset("RM3").schema;
    const auto mb = dummy_minibatch(s, 16);
    EXPECT_EQ(mb.dense.size(), 16u * 504u);
    EXPECT_EQ(mb.sparse_features.size(), 84u);
    EXPECT_TRUE(is_jagged_valid(mb.sparse_features.front()));
}

TEST(TrainerCalibration, RejectsBadOptions) {
    TrainerSink sink(50.0);
    TrainerCalibrationOptions opt;
    opt.window_seconds = 0;
    EXPECT_THROW(calibrate_trainer_throughput(sink, preset("RM1").schema, opt), InvalidArgument);
    TrainerSink inf(std::numeric_limits<double>::infinity());
    EXPECT_THROW(calibrate_trainer_throughput(inf, preset("RM1").schema), PipelineError);
}

TEST(MinimalUnits, Examples) {
    EXPECT_EQ(minimal_units(9000, 1000), 9u);
    EXPECT_EQ(minimal_units(9001, 1000), 10u);
    EXPECT_EQ(minimal_units(50, 1000), 1u);
    EXPECT_EQ(minimal_units(7, 7), 1u);
    EXPECT_THROW(minimal_units(0, 1), InvalidArgument);
    EXPECT_THROW(minimal_units(1, 0), InvalidArgument);
    EXPECT_THROW(minimal_units(-1, 1), InvalidArgument);
    EXPECT_THROW(minimal_units(std::numeric_limits<double>::infinity(), 1), InvalidArgument);
}

TEST(MinimalUnits, MinimalityOnRandomPairs) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> logu(-3.0, 6.0);
    for (int i = 0; i < 100000; ++i) {
        const double t = std::pow(10.0, logu(rng));
        const double p = std::pow(10.0, logu(rng) - 2.0);
        if (t / p > 1e9) continue;
        const auto n = minimal_units(t, p);
        ASSERT_GE(n, 1u);
        ASSERT_LE(t, static_cast<double>(n) * p) << t << " " << p;
        if (n > 1) ASSERT_LT(static_cast<double>(n - 1) * p, t) << t << " " << p;
    }
}
