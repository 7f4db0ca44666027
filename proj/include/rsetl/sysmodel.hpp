// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// Analytical capacity / cost / energy model.
//
//   units        = ceil(T / P)
//   OpEx         = power_kW * duration_h * $/kWh
//   cost-eff     = T * duration_s / (CapEx + OpEx)    (mini-batches per dollar)
//   energy-eff   = T / power                          (mini-batches per joule)
//
// Every deployment is provisioned to sustain the same T over the same
// duration, so cost-efficiency ratios reduce to inverse (CapEx + OpEx) ratios.
//
#pragma once

#include "rsetl/error.hpp"
#include "rsetl/provision.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace rsetl {

enum class UnitKind { kCore, kIspDevice, kNode, kAccelerator };

inline std::string_view to_string(UnitKind u) {
    switch (u) {
    case UnitKind::kCore: return "core";
    case UnitKind::kIspDevice: return "isp-device";
    case UnitKind::kNode: return "node";
    case UnitKind::kAccelerator: return "accelerator";
    }
    return "?";
}

inline UnitKind parse_unit_kind(std::string_view s) {
    if (s == "core") return UnitKind::kCore;
    if (s == "isp-device") return UnitKind::kIspDevice;
    if (s == "node") return UnitKind::kNode;
    if (s == "accelerator") return UnitKind::kAccelerator;
    throw InvalidArgument("unknown unit kind '" + std::string(s) + "'");
}

struct DeviceProfile {
    std::string name;
    UnitKind unit = UnitKind::kCore;
    /// P: mini-batches/sec delivered by one unit.
    double preproc_throughput = 1;
    double power_watts = 1;
    double capex_dollars = 0;
    /// Units are purchased and powered in whole nodes of this size.
    std::size_t units_per_node = 1;
};

inline constexpr double kHoursPerYear = 24.0 * 365.0;

struct CostParams {
    double duration_hours = 3 * kHoursPerYear;
    double electricity_per_kwh = 0.0733;
};

inline void validate(const DeviceProfile& p) {
    if (!(p.preproc_throughput > 0)) throw InvalidArgument("profile '" + p.name + "': throughput must be > 0");
    if (!(p.power_watts > 0)) throw InvalidArgument("profile '" + p.name + "': power must be > 0");
    if (!(p.capex_dollars >= 0)) throw InvalidArgument("profile '" + p.name + "': capex must be >= 0");
    if (p.units_per_node < 1) throw InvalidArgument("profile '" + p.name + "': units_per_node must be >= 1");
}

inline void validate(const CostParams& c) {
    if (!(c.duration_hours > 0)) throw InvalidArgument("duration must be positive");
    if (!(c.electricity_per_kwh > 0)) throw InvalidArgument("electricity price must be positive");
}

inline std::size_t required_units(double trainer_rate, const DeviceProfile& profile) {
    validate(profile);
    if (!(trainer_rate > 0)) throw InvalidArgument("trainer rate T must be positive");
    return minimal_units(trainer_rate, profile.preproc_throughput);
}

/// Fraction of time the trainer is busy when fed by n units: min(1, nP/T).
inline double gpu_utilization(std::size_t units, const DeviceProfile& profile, double trainer_rate) {
    if (!(trainer_rate > 0)) throw InvalidArgument("trainer rate T must be positive");
    return std::min(1.0, static_cast<double>(units) * profile.preproc_throughput / trainer_rate);
}

inline double opex(double power_watts, const CostParams& params) {
    if (!(power_watts >= 0)) throw InvalidArgument("power must be non-negative");
    return power_watts / 1000.0 * params.duration_hours * params.electricity_per_kwh;
}

inline double cost_efficiency(double throughput, const CostParams& params, double capex, double opex_dollars) {
    const double denom = capex + opex_dollars;
    if (!(denom > 0)) throw InvalidArgument("cost-efficiency needs CapEx + OpEx > 0");
    return throughput * params.duration_hours * 3600.0 / denom;
}

inline double energy_efficiency(double throughput, double total_power_watts) {
    if (!(total_power_watts > 0)) throw InvalidArgument("energy-efficiency needs positive power");
    return throughput / total_power_watts;
}

inline double round_cents(double dollars) { return std::round(dollars * 100.0) / 100.0; }

struct PlanRow {
    std::string name;
    UnitKind unit = UnitKind::kCore;
    std::size_t units = 0;
    std::size_t nodes = 0;
    double total_power_watts = 0;
    double capex = 0;
    double opex = 0;
    double cost_efficiency = 0;
    double energy_efficiency = 0;
    double units_ratio = 1;
    double power_ratio = 1;
    double tco_ratio = 1;
    double cost_efficiency_ratio = 1;
    double energy_efficiency_ratio = 1;

    double tco() const noexcept { return capex + opex; }
};

struct PlanReport {
    double trainer_rate = 0;
    CostParams params;
    std::vector<PlanRow> rows;
};

inline PlanRow plan_deployment(double trainer_rate, const DeviceProfile& p, const CostParams& params) {
    PlanRow row;
    row.name = p.name;
    row.unit = p.unit;
    row.units = required_units(trainer_rate, p);
    row.nodes = (row.units + p.units_per_node - 1) / p.units_per_node;
    const double billed_units = static_cast<double>(row.nodes * p.units_per_node);
    row.total_power_watts = billed_units * p.power_watts;
    row.capex = billed_units * p.capex_dollars;
    row.opex = opex(row.total_power_watts, params);
    // Every row sustains exactly T over the same duration.
    row.cost_efficiency = cost_efficiency(trainer_rate, params, row.capex, row.opex);
    row.energy_efficiency = energy_efficiency(trainer_rate, row.total_power_watts);
    return row;
}

/// Side-by-side plan; ratios are relative to the first profile.
inline PlanReport compare_deployments(double trainer_rate, const std::vector<DeviceProfile>& profiles,
                                      const CostParams& params) {
    if (profiles.size() < 2) throw InvalidArgument("compare_deployments needs at least two profiles");
    validate(params);
    PlanReport report{trainer_rate, params, {}};
    for (const auto& p : profiles) report.rows.push_back(plan_deployment(trainer_rate, p, params));
    const PlanRow b = report.rows.front();
    for (auto& r : report.rows) {
        r.units_ratio = static_cast<double>(r.units) / static_cast<double>(b.units);
        r.power_ratio = r.total_power_watts / b.total_power_watts;
        r.tco_ratio = r.tco() / b.tco();
        r.cost_efficiency_ratio = r.cost_efficiency / b.cost_efficiency;
        r.energy_efficiency_ratio = r.energy_efficiency / b.energy_efficiency;
    }
    return report;
}

struct Catalog {
    CostParams cost;
    std::vector<DeviceProfile> profiles;
};

inline Catalog parse_catalog(const nlohmann::json& doc) {
    Catalog c;
    try {
        if (auto it = doc.find("cost"); it != doc.end()) {
            c.cost.duration_hours = it->value("duration_hours", c.cost.duration_hours);
            c.cost.electricity_per_kwh = it->value("electricity_per_kwh", c.cost.electricity_per_kwh);
        }
        for (const auto& p : doc.at("profiles")) {
            DeviceProfile d;
            d.name = p.at("name").get<std::string>();
            d.unit = parse_unit_kind(p.value("unit", std::string("core")));
            d.preproc_throughput = p.at("preproc_throughput").get<double>();
            d.power_watts = p.at("power_watts").get<double>();
            d.capex_dollars = p.value("capex_dollars", 0.0);
            d.units_per_node = p.value("units_per_node", std::size_t{1});
            validate(d);
            c.profiles.push_back(std::move(d));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed device catalog: ") + e.what());
    }
    validate(c.cost);
    return c;
}

inline nlohmann::json to_json(const PlanReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        rows.push_back({
            {"name", row.name},
            {"unit", to_string(row.unit)},
            {"units", row.units},
            {"nodes", row.nodes},
            {"total_power_watts", row.total_power_watts},
            {"capex_dollars", round_cents(row.capex)},
            {"opex_dollars", round_cents(row.opex)},
            {"tco_dollars", round_cents(row.tco())},
            {"cost_efficiency", row.cost_efficiency},
            {"energy_efficiency", row.energy_efficiency},
            {"units_ratio", row.units_ratio},
            {"power_ratio", row.power_ratio},
            {"tco_ratio", row.tco_ratio},
            {"cost_efficiency_ratio", row.cost_efficiency_ratio},
            {"energy_efficiency_ratio", row.energy_efficiency_ratio},
        });
    }
    return {{"trainer_rate", r.trainer_rate},
            {"duration_hours", r.params.duration_hours},
            {"electricity_per_kwh", r.params.electricity_per_kwh},
            {"deployments", rows}};
}

} // namespace rsetl
