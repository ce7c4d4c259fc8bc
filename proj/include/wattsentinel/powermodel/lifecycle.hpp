#pragma once

#include "wattsentinel/powermodel/model.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ws::powermodel {

/// Lifecycle energy E = E_m + E_u + E_d. Manufacturing/transport and
/// dismantling are configured constants; usage is integrated from telemetry.
struct LifecycleAccount {
    double e_m_joules{0.0};
    double e_d_joules{0.0};
    /// Trapezoid sum of (p_i + p_{i+1}) * dt in mW*ms, i.e. twice the usage
    /// energy in microjoules. Kept integral so the integral is exact.
    std::int64_t usage_twice_uj{0};

    [[nodiscard]] double e_u_joules() const { return static_cast<double>(usage_twice_uj) / 2.0e6; }
};

/// A power reading, or a gap marker when `power` is empty. Intervals that
/// touch a gap contribute nothing.
struct UsagePoint {
    TimestampMs timestamp_ms{0};
    std::optional<Milliwatts> power;
};

/// Adds the trapezoidal integral of `samples` to the usage term. Throws
/// ContractError when timestamps are not strictly increasing.
LifecycleAccount accumulate_usage(LifecycleAccount account, std::span<const UsagePoint> samples);

double lifecycle_total(const LifecycleAccount& account);

struct ClassRange {
    DeviceClass device_class;
    Milliwatts min;
    Milliwatts max;
};

std::vector<ClassRange> default_class_ranges();

/// The unique class whose [min, max] contains the baseline; nullopt when no
/// range or more than one range matches.
std::optional<DeviceClass> classify_socket(Milliwatts baseline, std::span<const ClassRange> table);

} // namespace ws::powermodel
