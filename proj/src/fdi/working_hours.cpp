#include "wattsentinel/fdi/working_hours.hpp"

#include "wattsentinel/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace ws::fdi {

namespace {

constexpr std::int64_t kHourMs = 3'600'000;

TimestampMs hour_of(TimestampMs ts) {
    return ts >= 0 ? ts / kHourMs * kHourMs : ((ts - kHourMs + 1) / kHourMs) * kHourMs;
}

void check_history(const std::string& device, const std::vector<PowerSample>& samples,
                   const WorkingHoursConfig& config) {
    const auto need = fmt::format("{} h of history at one sample per {} s or faster",
                                  static_cast<double>(config.min_span_ms) / kHourMs, config.max_sample_gap_ms / 1000);
    if (samples.size() < 2) {
        throw ContractError("working hours: " + device + " has too little history; need " + need);
    }
    std::int64_t step = config.max_sample_gap_ms;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const auto dt = samples[i].timestamp_ms - samples[i - 1].timestamp_ms;
        if (dt <= 0) {
            throw ContractError("working hours: " + device + " timestamps are not increasing");
        }
        if (dt > config.max_sample_gap_ms) {
            throw ContractError(fmt::format("working hours: {} has a {} s gap; need {}", device, dt / 1000, need));
        }
        step = std::min(step, dt);
    }
    const auto span = samples.back().timestamp_ms - samples.front().timestamp_ms + step;
    if (span < config.min_span_ms) {
        throw ContractError(fmt::format("working hours: {} covers {:.1f} h; need {}", device,
                                        static_cast<double>(span) / kHourMs, need));
    }
}

} // namespace

WorkingHoursReport working_hours_report(const std::map<std::string, std::vector<PowerSample>>& history,
                                        const std::map<std::string, Milliwatts>& operational_baseline,
                                        const WorkingHoursConfig& config) {
    if (history.empty()) {
        throw ContractError("working hours: no device history; need 24 h of history");
    }
    // device -> hour -> (sum W, samples)
    std::map<std::string, std::map<TimestampMs, std::pair<double, int>>> hourly;
    for (const auto& [device, samples] : history) {
        check_history(device, samples, config);
        auto& h = hourly[device];
        for (const auto& s : samples) {
            auto& [sum, n] = h[hour_of(s.timestamp_ms)];
            sum += s.power.watts();
            ++n;
        }
    }

    std::map<TimestampMs, double> network;
    for (const auto& [device, hours] : hourly) {
        for (const auto& [hour, acc] : hours) {
            network[hour] += acc.first / acc.second;
        }
    }

    WorkingHoursReport report;
    std::vector<double> means;
    for (const auto& [hour, w] : network) {
        report.hours.push_back(HourBucket{hour, w, false});
        means.push_back(w);
    }
    std::sort(means.begin(), means.end());
    const auto rank = static_cast<std::size_t>(
        std::max(1.0, std::ceil(config.floor_percentile / 100.0 * static_cast<double>(means.size()))));
    report.night_floor_w = means[rank - 1];

    for (auto& b : report.hours) {
        b.working = b.network_mean_w >= report.night_floor_w * config.activity_factor &&
                    b.network_mean_w > report.night_floor_w;
    }
    for (std::size_t i = 0; i < report.hours.size(); ++i) {
        if (!report.hours[i].working) {
            continue;
        }
        const TimestampMs start = report.hours[i].start_ms;
        while (i + 1 < report.hours.size() && report.hours[i + 1].working &&
               report.hours[i + 1].start_ms == report.hours[i].start_ms + kHourMs) {
            ++i;
        }
        report.working_periods.emplace_back(start, report.hours[i].start_ms + kHourMs);
    }

    std::map<TimestampMs, bool> working;
    for (const auto& b : report.hours) {
        working[b.start_ms] = b.working;
    }
    for (const auto& [device, samples] : history) {
        auto base = operational_baseline.find(device);
        if (base == operational_baseline.end()) {
            continue;
        }
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& s : samples) {
            if (!working[hour_of(s.timestamp_ms)]) {
                sum += s.power.watts();
                ++n;
            }
        }
        if (n == 0) {
            continue;
        }
        const double mean = sum / static_cast<double>(n);
        if (mean >= config.operational_fraction * base->second.watts()) {
            report.flagged.push_back(IdleDevice{device, std::round(mean * 1000.0) / 1000.0, base->second.watts(),
                                                "transition to sleep"});
        }
    }
    return report;
}

} // namespace ws::fdi
