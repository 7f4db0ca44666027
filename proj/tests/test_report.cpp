// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
#include "rsetl/report.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace rsetl;

namespace {

RunReport sample_report() {
    RunReport r;
    r.mode = Mode::kIsp;
    r.worker_count = 2;
    r.trainer_rate = 50;
    r.batches = 2;
    r.wall_seconds = 0.5;
    r.throughput = 4;
    r.consumed_seq_nos = {1, 0};
    for (std::uint64_t i = 0; i < 2; ++i) {
        BatchRecord b;
        b.seq_no = i;
        b.rows = 8;
        b.tensor_bytes = 100 + i;
        b.content_digest = 0xabcULL + i;
        b.stages.bucketize = 0.01 * static_cast<double>(i + 1);
        b.wall_seconds = 0.1;
        r.records.push_back(b);
    }
    r.stages[2] = {0.015, 0.01, 0.02, 0.01, 0.02};
    r.stages[3] = {0.5, 0.5, 0.5, 0.5, 0.5};
    return r;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    return {std::istreambuf_iterator<char>(f), {}};
}

} // namespace

TEST(ContentCsv, TimingFreeAndSorted) {
    const auto r = sample_report();
    EXPECT_EQ(content_csv(r), "seq_no,rows,tensor_bytes,content_digest\n"
                              "0,8,100,0000000000000abc\n"
                              "1,8,101,0000000000000abd\n");
    auto slower = r;
    slower.wall_seconds = 99;
    slower.records[0].stages.log = 5;
    EXPECT_EQ(content_csv(slower), content_csv(r));
}

TEST(BatchesCsv, HasEveryStageColumn) {
    const auto rows = parse_csv(batches_csv(sample_report()));
    ASSERT_EQ(rows.size(), 3u);
    for (auto name : kStageNames) {
        EXPECT_NE(std::find(rows[0].begin(), rows[0].end(), std::string(name) + "_s"), rows[0].end()) << name;
    }
    EXPECT_EQ(rows[1].size(), rows[0].size());
}

TEST(RunReportFiles, WrittenAndParsable) {
    rsetl::test::TempDir dir;
    write_run_report(sample_report(), dir / "run", "RM1");
    EXPECT_TRUE(std::filesystem::exists(dir / "run" / "batches.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "run" / "content.csv"));
    const auto j = nlohmann::json::parse(slurp(dir / "run" / "summary.json"));
    EXPECT_EQ(j["label"], "RM1");
    EXPECT_EQ(j["mode"], "isp");
    EXPECT_EQ(j["worker_count"], 2);
    EXPECT_EQ(j["consumed_seq_nos"], nlohmann::json({1, 0}));
    EXPECT_DOUBLE_EQ(j["stages"]["bucketize"]["mean"].get<double>(), 0.015);
    EXPECT_TRUE(j["trainer_calibration"].is_null());
    EXPECT_EQ(breakdown_from_summary(j, "x").stage_means, breakdown_from_report(sample_report(), "x").stage_means);
}

TEST(Breakdown, SelfBaselineAllOnes) {
    const auto b = breakdown_from_report(sample_report(), "self");
    const auto rows = parse_csv(breakdown_csv({b}, 0));
    ASSERT_EQ(rows.size(), 1u + kStageNames.size() + 1u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"run", "stage", "mean_seconds", "normalized", "share_of_total"}));
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][3], "1") << rows[i][1];
    EXPECT_EQ(rows.back()[1], "total");
}

TEST(Breakdown, NormalizesPerStage) {
    StageBreakdown base{"base", {1, 1, 1, 1, 1, 1, 0}};
    StageBreakdown big{"big", {2, 3, 4, 5, 6, 7, 1}};
    const auto rows = parse_csv(breakdown_csv({base, big}, 0));
    // big rows start after the 8 base rows.
    EXPECT_EQ(rows[9][3], "2");
    EXPECT_EQ(rows[12][3], "5");
    EXPECT_EQ(rows[15][3], "inf");
    EXPECT_EQ(rows[16][1], "total");
    EXPECT_EQ(rows[16][3], "4.66666667");
    EXPECT_THROW(breakdown_csv({}, 0), InvalidArgument);
    EXPECT_THROW(breakdown_csv({base}, 1), InvalidArgument);
}

TEST(Breakdown, MissingStagesRejected) {
    EXPECT_THROW(breakdown_from_summary(nlohmann::json::object(), "x"), InvalidArgument);
}

TEST(PlanCsv, MoneyInCents) {
    PlanReport r;
    PlanRow row;
    row.name = "isp";
    row.unit = UnitKind::kIspDevice;
    row.units = 9;
    row.nodes = 9;
    row.total_power_watts = 225;
    row.capex = 1234.5678;
    row.opex = 192.6324;
    r.rows.push_back(row);
    const auto rows = parse_csv(plan_csv(r));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[1][0], "isp");
    EXPECT_EQ(rows[1][1], "isp-device");
    EXPECT_EQ(rows[1][2], "9");
    EXPECT_EQ(rows[1][5], "1234.57");
    EXPECT_EQ(rows[1][6], "192.63");
    EXPECT_EQ(rows[1][7], "1427.20");
}

TEST(SweepCsv, Columns) {
    const auto rows = parse_csv(sweep_csv({{1, 10, 1, 1, false}, {2, 19, 1.9, 0.95, true}}));
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"workers", "throughput", "speedup", "efficiency", "oversubscribed"}));
    EXPECT_EQ(rows[2], (std::vector<std::string>{"2", "19", "1.9", "0.95", "1"}));
}
