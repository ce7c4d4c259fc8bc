#pragma once

#include "wattsentinel/units.hpp"

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ws::powermodel {

enum class DeviceClass { switch_, router, host, access_point };
enum class DeviceMode { off, sleep, operational };
enum class StpRole { none, root, designated, blocking };

inline constexpr std::array<int, 3> kPortSpeeds{10, 100, 1000};

std::string_view to_string(DeviceClass c);
std::string_view to_string(DeviceMode m);
std::string_view to_string(StpRole r);
std::optional<DeviceClass> parse_device_class(std::string_view s);
std::optional<DeviceMode> parse_device_mode(std::string_view s);
std::optional<StpRole> parse_stp_role(std::string_view s);
bool is_valid_speed(int mbps);

struct PortState {
    int port_id{1};
    bool admin_up{true};
    bool oper_up{true};
    int speed_mbps{1000};
    bool lpi_active{false};
    StpRole stp_role{StpRole::none};

    bool operator==(const PortState&) const = default;
};

struct DeviceStateSnapshot {
    std::string device_id;
    DeviceClass device_class{DeviceClass::switch_};
    DeviceMode mode{DeviceMode::operational};
    std::vector<PortState> ports;
    TimestampMs as_of_ms{0};

    bool operator==(const DeviceStateSnapshot&) const = default;

    /// Throws ValidationError on a broken invariant.
    void validate() const;

    [[nodiscard]] const PortState* port(int port_id) const;
    [[nodiscard]] PortState* port(int port_id);
    [[nodiscard]] int ports_up() const;
};

/// Additive device power model: chassis base while operational plus a
/// per-port increment by negotiated speed, minus the LPI saving on idle
/// ports. Transient terms (STP spike, wake burst) are not part of the
/// steady-state expectation; the simulator uses them to shape traces.
struct DevicePowerModel {
    DeviceClass device_class{DeviceClass::switch_};
    Milliwatts base{0};
    Milliwatts sleep{0};
    Milliwatts off{0};
    std::map<int, Milliwatts> port_active;
    Milliwatts lpi_saving{0};
    Milliwatts stp_spike{0};
    Milliwatts wake_burst{0};
    double wake_burst_s{5.0};
    TimestampMs calibrated_at_ms{0};

    bool operator==(const DevicePowerModel&) const = default;

    void validate() const;
    [[nodiscard]] Milliwatts port_increment(int speed_mbps) const;

    /// Defaults used by the simulator and tests.
    static DevicePowerModel defaults(DeviceClass c);
};

/// Power drawn by one port in the given state (0 when the port is down).
Milliwatts port_contribution(const DevicePowerModel& model, const PortState& port);

/// Throws ContractError when the model and snapshot classes differ.
Milliwatts expected_power(const DevicePowerModel& model, const DeviceStateSnapshot& state);

} // namespace ws::powermodel
