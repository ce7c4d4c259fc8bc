#pragma once

#include "wattsentinel/fdi/types.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ws::fdi {

struct WorkingHoursConfig {
    double activity_factor{1.5};
    double operational_fraction{0.9};
    /// Percentile of hourly network means taken as the night floor.
    double floor_percentile{10.0};
    std::int64_t max_sample_gap_ms{60'000};
    std::int64_t min_span_ms{24 * 3'600'000};
};

struct HourBucket {
    TimestampMs start_ms{0};
    double network_mean_w{0.0};
    bool working{false};
};

struct IdleDevice {
    std::string device_id;
    double off_hours_mean_w{0.0};
    double operational_baseline_w{0.0};
    std::string suggestion;
};

struct WorkingHoursReport {
    std::vector<HourBucket> hours;
    double night_floor_w{0.0};
    /// Contiguous working stretches as [start, end) in ms.
    std::vector<std::pair<TimestampMs, TimestampMs>> working_periods;
    std::vector<IdleDevice> flagged;
};

/// Finds the working hours from the network total and flags devices that
/// stay near their operational level outside them. Buckets are whole UTC
/// hours. Throws ContractError when a device history spans less than
/// min_span_ms or has a sampling gap above max_sample_gap_ms.
WorkingHoursReport working_hours_report(const std::map<std::string, std::vector<PowerSample>>& history,
                                        const std::map<std::string, Milliwatts>& operational_baseline,
                                        const WorkingHoursConfig& config = {});

} // namespace ws::fdi
