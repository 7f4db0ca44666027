// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// CSV / JSON emitters for run reports, scaling sweeps, plans, and the merged
// per-stage breakdown.
//
#pragma once

#include "rsetl/columnar.hpp"
#include "rsetl/error.hpp"
#include "rsetl/pipeline.hpp"
#include "rsetl/sysmodel.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace rsetl {

namespace detail {

inline std::string fmt_double(double v, int precision = 9) {
    std::ostringstream os;
    os << std::setprecision(precision) << v;
    return os.str();
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << text;
    if (!f) throw IoError("write failed for '" + path.string() + "'");
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

} // namespace detail

/// One row per mini-batch, sorted by seq_no. Columns after content_digest
/// are wall-clock measurements.
inline std::string batches_csv(const RunReport& r) {
    std::ostringstream os;
    os << "seq_no,worker,attempt,rows,raw_bytes,tensor_bytes,content_digest";
    for (auto name : kStageNames) os << ',' << name << "_s";
    os << ",batch_wall_s,arrival_index\n";
    for (const auto& b : r.records) {
        os << b.seq_no << ',' << b.worker << ',' << b.attempt << ',' << b.rows << ',' << b.raw_bytes << ','
           << b.tensor_bytes << ',' << detail::hex64(b.content_digest);
        for (double v : b.stages.as_array()) os << ',' << detail::fmt_double(v);
        os << ',' << detail::fmt_double(b.wall_seconds) << ',' << b.arrival_index << '\n';
    }
    return os.str();
}

/// Timing-free content stream: identical inputs give identical bytes.
inline std::string content_csv(const RunReport& r) {
    std::ostringstream os;
    os << "seq_no,rows,tensor_bytes,content_digest\n";
    for (const auto& b : r.records) {
        os << b.seq_no << ',' << b.rows << ',' << b.tensor_bytes << ',' << detail::hex64(b.content_digest) << '\n';
    }
    return os.str();
}

inline nlohmann::json to_json(const RunReport& r, const std::string& label = {}) {
    nlohmann::json stages = nlohmann::json::object();
    for (std::size_t i = 0; i < kStageNames.size(); ++i) {
        const auto& s = r.stages[i];
        stages[std::string(kStageNames[i])] = {{"mean", s.mean}, {"p50", s.p50}, {"p95", s.p95}, {"min", s.min}, {"max", s.max}};
    }
    nlohmann::json j = {
        {"label", label},
        {"mode", to_string(r.mode)},
        {"worker_count", r.worker_count},
        {"workers_from_env", r.workers_from_env},
        {"provision_clamped", r.provision_clamped},
        {"queue_capacity", r.queue_capacity},
        {"trainer_rate", std::isinf(r.trainer_rate) ? nlohmann::json("unthrottled") : nlohmann::json(r.trainer_rate)},
        {"worker_rate", r.worker_rate ? nlohmann::json(*r.worker_rate) : nlohmann::json(nullptr)},
        {"batches", r.batches},
        {"wall_seconds", r.wall_seconds},
        {"throughput", r.throughput},
        {"trainer_utilization", r.trainer_utilization},
        {"network",
         {{"raw_in_bytes", r.network.raw_in_bytes},
          {"tensors_out_bytes", r.network.tensors_out_bytes},
          {"calls", r.network.calls},
          {"rpc_seconds", r.network.rpc_seconds}}},
        {"max_queue_occupancy", r.max_queue_occupancy},
        {"retries", r.retries},
        {"stages", stages},
        {"consumed_seq_nos", r.consumed_seq_nos},
    };
    if (r.trainer_calibration) {
        const auto& c = *r.trainer_calibration;
        j["trainer_calibration"] = {{"rate", c.rate},
                                    {"window_seconds", c.window_seconds},
                                    {"warmup_seconds", c.warmup_seconds},
                                    {"batches", c.batches}};
    } else {
        j["trainer_calibration"] = nullptr;
    }
    return j;
}

/// batches.csv, content.csv and summary.json under `dir`.
inline void write_run_report(const RunReport& r, const std::filesystem::path& dir, const std::string& label = {}) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    detail::write_text(dir / "batches.csv", batches_csv(r));
    detail::write_text(dir / "content.csv", content_csv(r));
    detail::write_text(dir / "summary.json", to_json(r, label).dump(2) + "\n");
}

inline std::string sweep_csv(const std::vector<SweepPoint>& points) {
    std::ostringstream os;
    os << "workers,throughput,speedup,efficiency,oversubscribed\n";
    for (const auto& p : points) {
        os << p.workers << ',' << detail::fmt_double(p.throughput) << ',' << detail::fmt_double(p.speedup) << ','
           << detail::fmt_double(p.efficiency) << ',' << (p.oversubscribed ? 1 : 0) << '\n';
    }
    return os.str();
}

inline std::string plan_csv(const PlanReport& r) {
    std::ostringstream os;
    os << "name,unit,units,nodes,total_power_watts,capex_dollars,opex_dollars,tco_dollars,cost_efficiency,"
          "energy_efficiency,units_ratio,power_ratio,tco_ratio,cost_efficiency_ratio,energy_efficiency_ratio\n";
    os << std::fixed;
    for (const auto& row : r.rows) {
        os << row.name << ',' << to_string(row.unit) << ',' << row.units << ',' << row.nodes << ','
           << std::setprecision(2) << row.total_power_watts << ',' << round_cents(row.capex) << ','
           << round_cents(row.opex) << ',' << round_cents(row.tco()) << ',' << std::setprecision(6)
           << row.cost_efficiency << ',' << row.energy_efficiency << ',' << row.units_ratio << ','
           << row.power_ratio << ',' << row.tco_ratio << ',' << row.cost_efficiency_ratio << ','
           << row.energy_efficiency_ratio << '\n';
    }
    return os.str();
}

/// Per-stage mean latency of one run, as read back from summary.json.
struct StageBreakdown {
    std::string label;
    std::vector<double> stage_means; // kStageNames order
    double total() const {
        double t = 0;
        for (double v : stage_means) t += v;
        return t;
    }
};

inline StageBreakdown breakdown_from_summary(const nlohmann::json& summary, std::string label) {
    StageBreakdown b;
    b.label = std::move(label);
    try {
        for (auto name : kStageNames) b.stage_means.push_back(summary.at("stages").at(std::string(name)).at("mean").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("run summary lacks stage data: ") + e.what());
    }
    return b;
}

inline StageBreakdown breakdown_from_report(const RunReport& r, std::string label) {
    StageBreakdown b;
    b.label = std::move(label);
    for (const auto& s : r.stages) b.stage_means.push_back(s.mean);
    return b;
}

namespace detail {

inline double normalize(double value, double base) {
    if (base == 0) return value == 0 ? 1.0 : std::numeric_limits<double>::infinity();
    return value / base;
}

} // namespace detail

/// Long-format breakdown: one row per (run, stage) plus a "total" row, each
/// stage normalized to the same stage of the baseline run.
inline std::string breakdown_csv(const std::vector<StageBreakdown>& runs, std::size_t baseline) {
    if (runs.empty()) throw InvalidArgument("breakdown needs at least one run");
    if (baseline >= runs.size()) throw InvalidArgument("baseline index out of range");
    const auto& base = runs[baseline];
    std::ostringstream os;
    os << "run,stage,mean_seconds,normalized,share_of_total\n";
    for (const auto& run : runs) {
        const double total = run.total();
        for (std::size_t s = 0; s < kStageNames.size(); ++s) {
            os << run.label << ',' << kStageNames[s] << ',' << detail::fmt_double(run.stage_means[s]) << ','
               << detail::fmt_double(detail::normalize(run.stage_means[s], base.stage_means[s])) << ','
               << detail::fmt_double(total > 0 ? run.stage_means[s] / total : 0.0) << '\n';
        }
        os << run.label << ",total," << detail::fmt_double(total) << ','
           << detail::fmt_double(detail::normalize(total, base.total())) << ",1\n";
    }
    return os.str();
}

} // namespace rsetl
