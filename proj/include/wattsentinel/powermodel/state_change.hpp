#pragma once

#include "wattsentinel/powermodel/model.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace ws::powermodel {

/// Network state changes the knowledge base can attribute a power change to.
enum class ChangeClass {
    PortDown,
    PortUp,
    LinkRateDown,
    LinkRateUp,
    LinkRateNoop,
    EEE_LPI_Enter,
    EEE_LPI_Exit,
    STPReevaluation,
    Sleep,
    Wake,
    DeviceOff,
    DeviceOn,
    Unknown,
};

std::string_view to_string(ChangeClass c);
std::optional<ChangeClass> parse_change_class(std::string_view s);

/// A detected change applied to one device.
struct StateChange {
    ChangeClass change_class{ChangeClass::Unknown};
    std::optional<int> port;       ///< port-level classes
    std::optional<int> to_speed;   ///< link-rate classes
    std::optional<Milliwatts> observed;  ///< measured signed amplitude, if any

    bool operator==(const StateChange&) const = default;
};

/// New snapshot after `change`. Throws ContractError if the change does not
/// apply (unknown port, port already in the target state, wrong mode).
DeviceStateSnapshot apply_change(const DeviceStateSnapshot& before, const StateChange& change);

/// expected_power(model, apply_change(before, change)) - expected_power(model, before).
Milliwatts modeled_delta(const DevicePowerModel& model, const DeviceStateSnapshot& before, const StateChange& change);

struct Recomputed {
    DevicePowerModel model;
    DeviceStateSnapshot snapshot;
    bool model_updated{false};
    std::string note;
};

/// Applies a detected change to the (model, snapshot) pair.
///
/// Port, link-rate and LPI classes adopt the observed amplitude into the
/// model only when it differs from the modeled delta by more than
/// `adopt_fraction` of that delta. Mode transitions (sleep, wake, off, on)
/// re-measure the destination level from the observation. Whenever a
/// parameter shared by other ports changes, the base is rebalanced so the
/// pre-change expectation is preserved exactly.
Recomputed recompute_parameters(const DevicePowerModel& model, const DeviceStateSnapshot& before,
                                const StateChange& change, double adopt_fraction = 0.2);

} // namespace ws::powermodel
