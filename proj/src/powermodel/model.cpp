#include "wattsentinel/powermodel/model.hpp"

#include "wattsentinel/errors.hpp"

#include <algorithm>
#include <set>

namespace ws::powermodel {

std::string_view to_string(DeviceClass c) {
    switch (c) {
    case DeviceClass::switch_: return "switch";
    case DeviceClass::router: return "router";
    case DeviceClass::host: return "host";
    case DeviceClass::access_point: return "access_point";
    }
    return "?";
}

std::string_view to_string(DeviceMode m) {
    switch (m) {
    case DeviceMode::off: return "off";
    case DeviceMode::sleep: return "sleep";
    case DeviceMode::operational: return "operational";
    }
    return "?";
}

std::string_view to_string(StpRole r) {
    switch (r) {
    case StpRole::none: return "none";
    case StpRole::root: return "root";
    case StpRole::designated: return "designated";
    case StpRole::blocking: return "blocking";
    }
    return "?";
}

std::optional<DeviceClass> parse_device_class(std::string_view s) {
    for (auto c : {DeviceClass::switch_, DeviceClass::router, DeviceClass::host, DeviceClass::access_point}) {
        if (to_string(c) == s) {
            return c;
        }
    }
    return std::nullopt;
}

std::optional<DeviceMode> parse_device_mode(std::string_view s) {
    for (auto m : {DeviceMode::off, DeviceMode::sleep, DeviceMode::operational}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    return std::nullopt;
}

std::optional<StpRole> parse_stp_role(std::string_view s) {
    for (auto r : {StpRole::none, StpRole::root, StpRole::designated, StpRole::blocking}) {
        if (to_string(r) == s) {
            return r;
        }
    }
    return std::nullopt;
}

bool is_valid_speed(int mbps) {
    return std::find(kPortSpeeds.begin(), kPortSpeeds.end(), mbps) != kPortSpeeds.end();
}

void DeviceStateSnapshot::validate() const {
    std::set<int> ids;
    for (const auto& p : ports) {
        const std::string field = device_id + ".port[" + std::to_string(p.port_id) + "]";
        if (p.port_id < 1) {
            throw ValidationError(field, "port id must be >= 1");
        }
        if (!ids.insert(p.port_id).second) {
            throw ValidationError(field, "duplicate port id");
        }
        if (!is_valid_speed(p.speed_mbps)) {
            throw ValidationError(field, "speed must be 10, 100 or 1000");
        }
        if (p.oper_up && !p.admin_up) {
            throw ValidationError(field, "oper_up requires admin_up");
        }
        if (p.lpi_active && !p.oper_up) {
            throw ValidationError(field, "lpi_active requires oper_up");
        }
        if (mode == DeviceMode::off && p.oper_up) {
            throw ValidationError(field, "port up on a powered-off device");
        }
    }
}

const PortState* DeviceStateSnapshot::port(int port_id) const {
    auto it = std::find_if(ports.begin(), ports.end(), [port_id](const PortState& p) { return p.port_id == port_id; });
    return it == ports.end() ? nullptr : &*it;
}

PortState* DeviceStateSnapshot::port(int port_id) {
    auto it = std::find_if(ports.begin(), ports.end(), [port_id](const PortState& p) { return p.port_id == port_id; });
    return it == ports.end() ? nullptr : &*it;
}

int DeviceStateSnapshot::ports_up() const {
    return static_cast<int>(std::count_if(ports.begin(), ports.end(), [](const PortState& p) { return p.oper_up; }));
}

void DevicePowerModel::validate() const {
    const std::string cls(to_string(device_class));
    if (off.value < 0 || sleep.value < 0 || base.value < 0) {
        throw ValidationError(cls + ".model", "mode levels must be non-negative");
    }
    if (!(off <= sleep && sleep <= base)) {
        throw ValidationError(cls + ".model", "requires off_w <= sleep_w <= base_w");
    }
    Milliwatts prev{0};
    for (int s : kPortSpeeds) {
        const Milliwatts inc = port_increment(s);
        if (inc < prev) {
            throw ValidationError(cls + ".model.port_active_w", "increments must be non-decreasing in speed");
        }
        if (lpi_saving > inc) {
            throw ValidationError(cls + ".model.lpi_saving_w", "exceeds the port increment at " + std::to_string(s) + " Mb/s");
        }
        prev = inc;
    }
    if (wake_burst_s < 0.0) {
        throw ValidationError(cls + ".model.wake_burst_s", "must be non-negative");
    }
}

Milliwatts DevicePowerModel::port_increment(int speed_mbps) const {
    auto it = port_active.find(speed_mbps);
    return it == port_active.end() ? Milliwatts{0} : it->second;
}

DevicePowerModel DevicePowerModel::defaults(DeviceClass c) {
    DevicePowerModel m;
    m.device_class = c;
    switch (c) {
    case DeviceClass::switch_:
        m.base = Milliwatts{45'000};
        m.sleep = Milliwatts{15'000};
        m.off = Milliwatts{0};
        m.port_active = {{10, Milliwatts{350}}, {100, Milliwatts{350}}, {1000, Milliwatts{650}}};
        m.lpi_saving = Milliwatts{350};
        m.stp_spike = Milliwatts{1'000};
        break;
    case DeviceClass::router:
        m.base = Milliwatts{38'000};
        m.sleep = Milliwatts{12'000};
        m.off = Milliwatts{0};
        m.port_active = {{10, Milliwatts{350}}, {100, Milliwatts{350}}, {1000, Milliwatts{650}}};
        m.lpi_saving = Milliwatts{350};
        break;
    case DeviceClass::host:
        m.base = Milliwatts{60'000};
        m.sleep = Milliwatts{3'000};
        m.off = Milliwatts{500};
        break;
    case DeviceClass::access_point:
        m.base = Milliwatts{8'000};
        m.sleep = Milliwatts{2'000};
        m.off = Milliwatts{200};
        break;
    }
    // Burst on entering operational state, 60% of operational power for 5 s.
    m.wake_burst = Milliwatts{m.base.value * 6 / 10};
    m.wake_burst_s = 5.0;
    return m;
}

Milliwatts port_contribution(const DevicePowerModel& model, const PortState& port) {
    if (!port.oper_up) {
        return Milliwatts{0};
    }
    Milliwatts w = model.port_increment(port.speed_mbps);
    if (port.lpi_active) {
        w -= model.lpi_saving;
    }
    return w;
}

Milliwatts expected_power(const DevicePowerModel& model, const DeviceStateSnapshot& state) {
    if (model.device_class != state.device_class) {
        throw ContractError("model class " + std::string(to_string(model.device_class)) + " does not match device " +
                            state.device_id + " of class " + std::string(to_string(state.device_class)));
    }
    switch (state.mode) {
    case DeviceMode::off: return model.off;
    case DeviceMode::sleep: return model.sleep;
    case DeviceMode::operational: break;
    }
    // Blocking ports draw the same as forwarding ones; STP role is not a term.
    Milliwatts total = model.base;
    for (const auto& p : state.ports) {
        total += port_contribution(model, p);
    }
    return total;
}

} // namespace ws::powermodel
