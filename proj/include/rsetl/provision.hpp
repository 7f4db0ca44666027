// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "rsetl/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace rsetl {

/// ceil(demand / per_unit): the minimal n >= 1 with n * per_unit >= demand.
/// The result satisfies (n - 1) * per_unit < demand <= n * per_unit exactly
/// in floating point, not only in the real-valued quotient.
inline std::size_t minimal_units(double demand, double per_unit) {
    if (!(demand > 0) || !(per_unit > 0) || !std::isfinite(demand) || !std::isfinite(per_unit)) {
        throw InvalidArgument("provisioning needs finite positive demand and per-unit rate");
    }
    const double ratio = demand / per_unit;
    if (ratio > 1e15) throw InvalidArgument("demand / per-unit rate too large to provision");
    auto n = static_cast<std::size_t>(std::ceil(ratio));
    while (n > 1 && static_cast<double>(n - 1) * per_unit >= demand) --n;
    while (static_cast<double>(n) * per_unit < demand) ++n;
    return std::max<std::size_t>(n, 1);
}

} // namespace rsetl
