#include "wattsentinel/powermodel/lifecycle.hpp"

#include "wattsentinel/errors.hpp"

namespace ws::powermodel {

LifecycleAccount accumulate_usage(LifecycleAccount account, std::span<const UsagePoint> samples) {
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const auto& a = samples[i - 1];
        const auto& b = samples[i];
        if (b.timestamp_ms <= a.timestamp_ms) {
            throw ContractError("accumulate_usage: timestamps must be strictly increasing");
        }
        if (!a.power || !b.power) {
            continue;
        }
        account.usage_twice_uj += (a.power->value + b.power->value) * (b.timestamp_ms - a.timestamp_ms);
    }
    return account;
}

double lifecycle_total(const LifecycleAccount& account) {
    return account.e_m_joules + account.e_u_joules() + account.e_d_joules;
}

std::vector<ClassRange> default_class_ranges() {
    return {
        {DeviceClass::access_point, Milliwatts{3'000}, Milliwatts{20'000}},
        {DeviceClass::switch_, Milliwatts{30'000}, Milliwatts{80'000}},
        {DeviceClass::host, Milliwatts{80'000}, Milliwatts{200'000}},
    };
}

std::optional<DeviceClass> classify_socket(Milliwatts baseline, std::span<const ClassRange> table) {
    std::optional<DeviceClass> match;
    int hits = 0;
    for (const auto& r : table) {
        if (baseline >= r.min && baseline <= r.max) {
            match = r.device_class;
            ++hits;
        }
    }
    return hits == 1 ? match : std::nullopt;
}

} // namespace ws::powermodel
