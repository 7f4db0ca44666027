// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
// Emulated inter-node network: each call costs latency + bytes*8/bandwidth,
// imposed as a real sleep and accumulated from the model (not measured), so
// counters are exact.
//
#pragma once

#include "rsetl/error.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace rsetl {

struct NetworkModel {
    double bandwidth_bps = 10e9;
    double per_call_latency_s = 0.0;
    bool enabled = true;

    static NetworkModel disabled() { return {10e9, 0.0, false}; }
};

inline void validate(const NetworkModel& m) {
    if (!(m.bandwidth_bps > 0) || !std::isfinite(m.bandwidth_bps)) {
        throw InvalidArgument("network bandwidth must be positive");
    }
    if (!(m.per_call_latency_s >= 0) || !std::isfinite(m.per_call_latency_s)) {
        throw InvalidArgument("network latency must be non-negative");
    }
}

/// Modeled duration of one transfer.
inline double transfer_seconds(std::uint64_t bytes, const NetworkModel& m) {
    validate(m);
    return m.per_call_latency_s + static_cast<double>(bytes) * 8.0 / m.bandwidth_bps;
}

namespace detail {

// "<number><unit>" with a unit table; empty unit means scale 1.
inline double parse_scaled(std::string_view text, std::initializer_list<std::pair<std::string_view, double>> units,
                           const char* what) {
    std::size_t i = 0;
    while (i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.' ||
                               text[i] == 'e' || text[i] == '-' || text[i] == '+')) {
        // An 'e' only continues the number when followed by a digit or sign.
        if (text[i] == 'e' && (i + 1 >= text.size() || !(std::isdigit(static_cast<unsigned char>(text[i + 1])) ||
                                                         text[i + 1] == '-' || text[i + 1] == '+'))) {
            break;
        }
        ++i;
    }
    const std::string number(text.substr(0, i));
    const std::string_view unit = text.substr(i);
    double value = 0;
    try {
        std::size_t used = 0;
        value = std::stod(number, &used);
        if (used != number.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw InvalidArgument(std::string("cannot parse ") + what + " '" + std::string(text) + "'");
    }
    for (const auto& [name, scale] : units) {
        if (unit == name) return value * scale;
    }
    throw InvalidArgument(std::string("unknown unit in ") + what + " '" + std::string(text) + "'");
}

} // namespace detail

/// Parses "10G,200us" style specs: bandwidth in bits/s with optional K/M/G
/// suffix, latency with s/ms/us/ns suffix (bare number = seconds).
inline NetworkModel parse_network(std::string_view spec) {
    const auto comma = spec.find(',');
    const auto bw_text = spec.substr(0, comma);
    const auto lat_text = comma == std::string_view::npos ? std::string_view("0") : spec.substr(comma + 1);
    NetworkModel m;
    m.bandwidth_bps = detail::parse_scaled(
        bw_text, {{"", 1.0}, {"K", 1e3}, {"M", 1e6}, {"G", 1e9}, {"Kbps", 1e3}, {"Mbps", 1e6}, {"Gbps", 1e9}},
        "bandwidth");
    m.per_call_latency_s = detail::parse_scaled(
        lat_text, {{"", 1.0}, {"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}}, "latency");
    m.enabled = true;
    validate(m);
    return m;
}

enum class Channel { kRawIn, kTensorsOut };

struct TransferRecord {
    Channel channel;
    std::uint64_t bytes;
    double seconds;
};

struct NetworkTotals {
    std::uint64_t raw_in_bytes = 0;
    std::uint64_t tensors_out_bytes = 0;
    std::uint64_t calls = 0;
    double rpc_seconds = 0;
};

class NetworkEmulator {
public:
    explicit NetworkEmulator(NetworkModel model, bool impose_delay = true)
        : model_(model), impose_delay_(impose_delay) {
        if (model_.enabled) validate(model_);
    }

    const NetworkModel& model() const noexcept { return model_; }

    /// Sleeps for the modeled duration and logs it. Returns modeled seconds.
    double transfer(std::uint64_t bytes, Channel channel) {
        if (!model_.enabled) throw InvalidArgument("transfer over a disabled network");
        const double s = transfer_seconds(bytes, model_);
        if (impose_delay_ && s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
        std::lock_guard lock(mu_);
        (channel == Channel::kRawIn ? totals_.raw_in_bytes : totals_.tensors_out_bytes) += bytes;
        ++totals_.calls;
        totals_.rpc_seconds += s;
        log_.push_back({channel, bytes, s});
        return s;
    }

    NetworkTotals totals() const {
        std::lock_guard lock(mu_);
        return totals_;
    }
    std::vector<TransferRecord> log() const {
        std::lock_guard lock(mu_);
        return log_;
    }

private:
    NetworkModel model_;
    bool impose_delay_;
    mutable std::mutex mu_;
    NetworkTotals totals_;
    std::vector<TransferRecord> log_;
};

/// One emulated transfer on a throwaway emulator; returns modeled seconds.
inline double emulate_transfer(std::uint64_t bytes, const NetworkModel& network, bool impose_delay = true) {
    NetworkEmulator emu(network, impose_delay);
    return emu.transfer(bytes, Channel::kRawIn);
}

} // namespace rsetl
