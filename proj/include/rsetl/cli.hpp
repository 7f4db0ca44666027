// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: gen, run, sweep, plan, report.
//
// Exit codes: 0 success, 2 usage error, 1 runtime error.
//
#pragma once

#include "rsetl/columnar.hpp"
#include "rsetl/datagen.hpp"
#include "rsetl/error.hpp"
#include "rsetl/network.hpp"
#include "rsetl/pipeline.hpp"
#include "rsetl/report.hpp"
#include "rsetl/schema.hpp"
#include "rsetl/sysmodel.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace rsetl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kManifestFormat = "rsetl-partitions-v1";

/// Bad flag values detected before any side effect.
class UsageError : public Error {
public:
    using Error::Error;
};

struct Manifest {
    std::string preset;
    FeatureSchema schema;
    std::uint64_t seed = 0;
    std::uint64_t rows = 0;
    std::uint64_t batch_size = 0;
    PartitionSet partitions;
};

inline nlohmann::json to_json(const Manifest& m, const std::filesystem::path& dir) {
    nlohmann::json parts = nlohmann::json::array();
    for (const auto& p : m.partitions.partitions) {
        parts.push_back({{"id", p.id},
                         {"file", std::filesystem::relative(p.path, dir).generic_string()},
                         {"first_row", p.first_row},
                         {"rows", p.rows},
                         {"bytes", p.bytes}});
    }
    return {{"format", kManifestFormat}, {"preset", m.preset},   {"schema", rsetl::to_json(m.schema)},
            {"seed", m.seed},            {"rows", m.rows},       {"batch_size", m.batch_size},
            {"partitions", parts}};
}

inline Manifest load_manifest(const std::filesystem::path& dir) {
    const auto path = dir / kManifestName;
    if (!std::filesystem::exists(path)) throw IoError("no manifest at '" + path.string() + "'");
    const auto doc = rsetl::detail::read_json(path);
    Manifest m;
    try {
        if (doc.at("format").get<std::string>() != kManifestFormat) {
            throw FormatError("'" + path.string() + "' has an unsupported format tag");
        }
        m.preset = doc.value("preset", std::string());
        m.schema = validate_config(doc.at("schema"));
        m.seed = doc.at("seed").get<std::uint64_t>();
        m.rows = doc.at("rows").get<std::uint64_t>();
        m.batch_size = doc.at("batch_size").get<std::uint64_t>();
        m.partitions.rows_per_partition = m.batch_size;
        for (const auto& p : doc.at("partitions")) {
            m.partitions.partitions.push_back({p.at("id").get<std::uint64_t>(), dir / p.at("file").get<std::string>(),
                                               p.at("first_row").get<std::uint64_t>(),
                                               p.at("rows").get<std::uint64_t>(), p.at("bytes").get<std::uint64_t>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed manifest '" + path.string() + "': " + e.what());
    }
    return m;
}

/// Each partition is drawn from its own stream (seed ^ partition id), so a
/// partition's content does not depend on how many others exist.
inline Manifest generate_dataset(const FeatureSchema& schema, std::string preset_name, std::uint64_t rows,
                                 std::uint64_t batch_size, std::uint64_t seed, const std::filesystem::path& out) {
    if (rows < 1) throw UsageError("--rows must be >= 1");
    if (batch_size < 1) throw UsageError("--batch-size must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());

    Manifest m{std::move(preset_name), schema, seed, rows, batch_size, {batch_size, {}}};
    const auto spec = GenSpec::for_schema(schema, rows, seed);
    for (const auto& range : shard_ranges(rows, batch_size)) {
        const auto id = m.partitions.partitions.size();
        const auto table = generate_partition(schema, spec, id, range.end - range.begin);
        const auto bytes = write_partition(table, schema);
        PartitionInfo info{id, out / partition_file_name(id), range.begin, range.end - range.begin, bytes.size()};
        write_file(info.path, bytes);
        m.partitions.partitions.push_back(std::move(info));
    }
    rsetl::detail::write_text(out / kManifestName, to_json(m, out).dump(2) + "\n");
    return m;
}

namespace detail {

inline std::uint64_t parse_count(const std::string& flag, const std::string& text) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used == text.size() && v >= 1) return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
    }
    throw UsageError(flag + " expects a positive integer, got '" + text + "'");
}

inline double parse_positive(const std::string& flag, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size() && v > 0 && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw UsageError(flag + " expects a positive number, got '" + text + "'");
}

inline std::vector<std::size_t> parse_count_list(const std::string& flag, const std::string& text) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        out.push_back(parse_count(flag, item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline Mode parse_mode_flag(const std::string& text) {
    try {
        return parse_mode(text);
    } catch (const InvalidArgument& e) {
        throw UsageError(std::string("--mode: ") + e.what());
    }
}

inline NetworkModel parse_net_flag(const std::string& text) {
    try {
        return parse_network(text);
    } catch (const InvalidArgument& e) {
        throw UsageError(std::string("--net: ") + e.what());
    }
}

inline FeatureSchema resolve_schema(const std::string& preset_name, const std::string& config_path,
                                    std::string& label) {
    if (!preset_name.empty() && !config_path.empty()) throw UsageError("--preset and --config are exclusive");
    if (preset_name.empty() && config_path.empty()) throw UsageError("one of --preset or --config is required");
    if (!preset_name.empty()) {
        try {
            label = preset_name;
            return preset(preset_name).schema;
        } catch (const InvalidArgument& e) {
            std::string names;
            for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
            throw UsageError(std::string(e.what()) + " (known presets: " + names + ")");
        }
    }
    label = std::filesystem::path(config_path).stem().string();
    try {
        return validate_config(rsetl::detail::read_json(config_path));
    } catch (const ConfigError& e) {
        throw UsageError(std::string("--config: ") + e.what());
    }
}

/// Flags shared by `run` and `sweep`.
struct DeployFlags {
    std::string mode = "colocated";
    std::string net = "10G,0us";
    std::optional<std::uint64_t> seed;
    std::size_t core_budget = 16;
    std::size_t queue_capacity = 0;
    std::optional<std::size_t> max_batches;

    void attach(CLI::App& app) {
        app.add_option("--mode", mode, "colocated | disagg_cpu | isp")->capture_default_str();
        app.add_option("--net", net, "emulated link as BANDWIDTH,LATENCY, e.g. 10G,200us")->capture_default_str();
        app.add_option("--seed", seed, "transform-plan seed (default: the manifest seed)");
        app.add_option("--core-budget", core_budget, "colocated core budget")->capture_default_str();
        app.add_option("--queue-capacity", queue_capacity, "input queue capacity (0 = 2 x workers)");
        app.add_option("--max-batches", max_batches, "stop after this many partitions");
    }

    DeploymentSpec deployment() const {
        DeploymentSpec d;
        d.mode = parse_mode_flag(mode);
        d.network = parse_net_flag(net);
        if (core_budget < 1) throw UsageError("--core-budget must be >= 1");
        d.colocated_core_budget = core_budget;
        d.queue_capacity = queue_capacity;
        return d;
    }

    RunBudget budget() const {
        RunBudget b;
        if (max_batches) {
            if (*max_batches < 1) throw UsageError("--max-batches must be >= 1");
            b.max_batches = *max_batches;
        }
        return b;
    }
};

} // namespace detail

/// Runs the CLI in-process. argv[0] is the program name.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"rsetl: recommendation-model preprocessing pipeline", "rsetl"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset as PSF1 partitions");
    std::string gen_preset, gen_config, gen_out;
    std::uint64_t gen_rows = 0, gen_batch = 8192, gen_seed = 0;
    gen->add_option("--preset", gen_preset, "RM1 .. RM5");
    gen->add_option("--config", gen_config, "feature schema JSON file");
    gen->add_option("--rows", gen_rows, "total rows")->required();
    gen->add_option("--batch-size", gen_batch, "rows per partition / mini-batch")->capture_default_str();
    gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
    gen->add_option("--out", gen_out, "output directory")->required();

    // run
    auto* runc = app.add_subcommand("run", "calibrate, provision and run the pipeline");
    std::string run_data, run_out, run_workers = "auto", run_rate = "calibrate", run_label;
    double run_sink_rate = 50, run_window = 5;
    detail::DeployFlags run_flags;
    runc->add_option("--data", run_data, "dataset directory written by gen")->required();
    runc->add_option("--workers", run_workers, "auto | N")->capture_default_str();
    runc->add_option("--trainer-rate", run_rate, "calibrate | unthrottled | batches/sec")->capture_default_str();
    runc->add_option("--sink-rate", run_sink_rate, "capacity of the emulated trainer when calibrating")
        ->capture_default_str();
    runc->add_option("--calibration-window", run_window, "trainer calibration window, seconds")
        ->capture_default_str();
    runc->add_option("--out", run_out, "report directory")->required();
    runc->add_option("--label", run_label, "run label recorded in the summary");
    run_flags.attach(*runc);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "throughput across worker counts");
    std::string sweep_data, sweep_workers = "1,2,4,8", sweep_out;
    detail::DeployFlags sweep_flags;
    sweep->add_option("--data", sweep_data, "dataset directory written by gen")->required();
    sweep->add_option("--workers", sweep_workers, "comma-separated worker counts")->capture_default_str();
    sweep->add_option("--out", sweep_out, "CSV file (default: stdout)");
    sweep_flags.attach(*sweep);

    // plan
    auto* plan = app.add_subcommand("plan", "capacity, cost and energy plan from a device catalog");
    std::string plan_catalog, plan_out;
    double plan_rate = 0;
    plan->add_option("--catalog", plan_catalog, "device catalog JSON")->required();
    plan->add_option("--trainer-rate", plan_rate, "trainer demand T, batches/sec")->required();
    plan->add_option("--out", plan_out, "output directory for plan.csv / plan.json (default: stdout)");

    // report
    auto* rep = app.add_subcommand("report", "merge run reports into a normalized stage breakdown");
    std::vector<std::string> rep_inputs;
    std::string rep_baseline, rep_out;
    rep->add_option("--inputs", rep_inputs, "run report directories")->required()->expected(1, -1);
    rep->add_option("--baseline", rep_baseline, "label or directory of the baseline run (default: first)");
    rep->add_option("--out", rep_out, "CSV file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) {
            std::string label;
            const auto schema = detail::resolve_schema(gen_preset, gen_config, label);
            const auto m = generate_dataset(schema, label, gen_rows, gen_batch, gen_seed, gen_out);
            out << "wrote " << m.partitions.partitions.size() << " partitions (" << m.partitions.total_bytes()
                << " bytes) to " << gen_out << "\n";
        } else if (*runc) {
            auto d = run_flags.deployment();
            const auto budget = run_flags.budget();
            if (run_workers != "auto") d.worker_count = detail::parse_count("--workers", run_workers);
            if (run_rate == "unthrottled") {
                d.trainer_rate = kUnthrottled;
            } else if (run_rate != "calibrate") {
                d.trainer_rate = detail::parse_positive("--trainer-rate", run_rate);
            }
            d.sink_rate = detail::parse_positive("--sink-rate", std::to_string(run_sink_rate));
            if (!(run_window > 0)) throw UsageError("--calibration-window must be positive");
            d.trainer_calibration.window_seconds = run_window;
            try {
                validate_deployment(d);
            } catch (const InvalidArgument& e) {
                throw UsageError(e.what());
            }
            const auto m = load_manifest(run_data);
            const auto tplan = derive_transform_plan(m.schema, run_flags.seed.value_or(m.seed));
            const auto r = run_pipeline(d, m.schema, tplan, m.partitions, budget);
            write_run_report(r, run_out, run_label.empty() ? std::filesystem::path(run_out).filename().string() : run_label);
            out << to_string(r.mode) << ": " << r.batches << " batches, " << r.worker_count << " workers, "
                << r.throughput << " batches/s, trainer utilization " << r.trainer_utilization << "\n";
        } else if (*sweep) {
            const auto d = sweep_flags.deployment();
            const auto budget = sweep_flags.budget();
            const auto counts = detail::parse_count_list("--workers", sweep_workers);
            if (d.mode == Mode::kColocated) {
                for (auto c : counts) {
                    if (c > d.colocated_core_budget) {
                        throw UsageError("colocated mode: " + std::to_string(c) + " workers exceed the core budget of " +
                                         std::to_string(d.colocated_core_budget));
                    }
                }
            }
            const auto m = load_manifest(sweep_data);
            const auto tplan = derive_transform_plan(m.schema, sweep_flags.seed.value_or(m.seed));
            const auto csv = sweep_csv(scaling_sweep(d, m.schema, tplan, m.partitions, counts, budget));
            if (sweep_out.empty()) out << csv;
            else rsetl::detail::write_text(sweep_out, csv);
        } else if (*plan) {
            if (!(plan_rate > 0) || !std::isfinite(plan_rate)) throw UsageError("--trainer-rate must be positive");
            const auto catalog = parse_catalog(rsetl::detail::read_json(plan_catalog));
            const auto report = compare_deployments(plan_rate, catalog.profiles, catalog.cost);
            const auto csv = plan_csv(report);
            if (plan_out.empty()) {
                out << csv;
            } else {
                std::filesystem::create_directories(plan_out);
                rsetl::detail::write_text(std::filesystem::path(plan_out) / "plan.csv", csv);
                rsetl::detail::write_text(std::filesystem::path(plan_out) / "plan.json", to_json(report).dump(2) + "\n");
            }
        } else if (*rep) {
            std::vector<StageBreakdown> runs;
            std::optional<std::size_t> baseline;
            for (const auto& in : rep_inputs) {
                const std::filesystem::path dir(in);
                const auto summary = rsetl::detail::read_json(dir / "summary.json");
                std::string label = summary.value("label", std::string());
                if (label.empty()) label = dir.filename().string();
                if (!rep_baseline.empty() && (rep_baseline == label || rep_baseline == in)) baseline = runs.size();
                runs.push_back(breakdown_from_summary(summary, label));
            }
            if (!rep_baseline.empty() && !baseline) throw UsageError("--baseline '" + rep_baseline + "' is not among --inputs");
            const auto csv = breakdown_csv(runs, baseline.value_or(0));
            if (rep_out.empty()) out << csv;
            else rsetl::detail::write_text(rep_out, csv);
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

} // namespace rsetl::cli
