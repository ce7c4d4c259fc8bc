#include "wattsentinel/powermodel/state_change.hpp"

#include "wattsentinel/errors.hpp"

#include <array>
#include <cstdlib>
#include <utility>

namespace ws::powermodel {

namespace {

constexpr std::array<std::pair<ChangeClass, std::string_view>, 13> kNames{{
    {ChangeClass::PortDown, "PortDown"},
    {ChangeClass::PortUp, "PortUp"},
    {ChangeClass::LinkRateDown, "LinkRateDown"},
    {ChangeClass::LinkRateUp, "LinkRateUp"},
    {ChangeClass::LinkRateNoop, "LinkRateNoop"},
    {ChangeClass::EEE_LPI_Enter, "EEE_LPI_Enter"},
    {ChangeClass::EEE_LPI_Exit, "EEE_LPI_Exit"},
    {ChangeClass::STPReevaluation, "STPReevaluation"},
    {ChangeClass::Sleep, "Sleep"},
    {ChangeClass::Wake, "Wake"},
    {ChangeClass::DeviceOff, "DeviceOff"},
    {ChangeClass::DeviceOn, "DeviceOn"},
    {ChangeClass::Unknown, "Unknown"},
}};

[[noreturn]] void reject(const DeviceStateSnapshot& s, const StateChange& c, const std::string& why) {
    throw ContractError(std::string(to_string(c.change_class)) + " on " + s.device_id + ": " + why);
}

PortState& require_port(DeviceStateSnapshot& s, const StateChange& c) {
    if (!c.port) {
        reject(s, c, "no port given");
    }
    PortState* p = s.port(*c.port);
    if (p == nullptr) {
        reject(s, c, "unknown port " + std::to_string(*c.port));
    }
    return *p;
}

void require_mode(const DeviceStateSnapshot& s, const StateChange& c, DeviceMode mode) {
    if (s.mode != mode) {
        reject(s, c, "device is " + std::string(to_string(s.mode)) + ", expected " + std::string(to_string(mode)));
    }
}

bool deviates(Milliwatts observed, Milliwatts modeled, double fraction) {
    const double diff = std::abs(static_cast<double>(observed.value - modeled.value));
    return diff > fraction * std::abs(static_cast<double>(modeled.value));
}

int count_ports(const DeviceStateSnapshot& s, auto pred) {
    int n = 0;
    for (const auto& p : s.ports) {
        if (pred(p)) {
            ++n;
        }
    }
    return n;
}

} // namespace

std::string_view to_string(ChangeClass c) {
    for (const auto& [cls, name] : kNames) {
        if (cls == c) {
            return name;
        }
    }
    return "Unknown";
}

std::optional<ChangeClass> parse_change_class(std::string_view s) {
    for (const auto& [cls, name] : kNames) {
        if (name == s) {
            return cls;
        }
    }
    return std::nullopt;
}

DeviceStateSnapshot apply_change(const DeviceStateSnapshot& before, const StateChange& change) {
    DeviceStateSnapshot after = before;
    switch (change.change_class) {
    case ChangeClass::PortDown: {
        require_mode(after, change, DeviceMode::operational);
        PortState& p = require_port(after, change);
        if (!p.oper_up) {
            reject(after, change, "port " + std::to_string(p.port_id) + " is already down");
        }
        p.oper_up = false;
        p.lpi_active = false;
        p.stp_role = StpRole::none;
        break;
    }
    case ChangeClass::PortUp: {
        require_mode(after, change, DeviceMode::operational);
        PortState& p = require_port(after, change);
        if (p.oper_up) {
            reject(after, change, "port " + std::to_string(p.port_id) + " is already up");
        }
        p.admin_up = true;
        p.oper_up = true;
        break;
    }
    case ChangeClass::LinkRateDown:
    case ChangeClass::LinkRateUp:
    case ChangeClass::LinkRateNoop: {
        PortState& p = require_port(after, change);
        if (!p.oper_up) {
            reject(after, change, "port " + std::to_string(p.port_id) + " is down");
        }
        if (!change.to_speed || !is_valid_speed(*change.to_speed)) {
            reject(after, change, "target speed missing or invalid");
        }
        const int to = *change.to_speed;
        if ((change.change_class == ChangeClass::LinkRateDown && to >= p.speed_mbps) ||
            (change.change_class == ChangeClass::LinkRateUp && to <= p.speed_mbps)) {
            reject(after, change,
                   "cannot go from " + std::to_string(p.speed_mbps) + " to " + std::to_string(to) + " Mb/s");
        }
        p.speed_mbps = to;
        break;
    }
    case ChangeClass::EEE_LPI_Enter: {
        PortState& p = require_port(after, change);
        if (!p.oper_up || p.lpi_active) {
            reject(after, change, "port " + std::to_string(p.port_id) + " cannot enter LPI");
        }
        p.lpi_active = true;
        break;
    }
    case ChangeClass::EEE_LPI_Exit: {
        PortState& p = require_port(after, change);
        if (!p.lpi_active) {
            reject(after, change, "port " + std::to_string(p.port_id) + " is not in LPI");
        }
        p.lpi_active = false;
        break;
    }
    case ChangeClass::STPReevaluation:
        break;
    case ChangeClass::Sleep:
        require_mode(after, change, DeviceMode::operational);
        after.mode = DeviceMode::sleep;
        break;
    case ChangeClass::Wake:
        require_mode(after, change, DeviceMode::sleep);
        after.mode = DeviceMode::operational;
        break;
    case ChangeClass::DeviceOff:
        if (after.mode == DeviceMode::off) {
            reject(after, change, "device is already off");
        }
        after.mode = DeviceMode::off;
        for (auto& p : after.ports) {
            p.oper_up = false;
            p.lpi_active = false;
            p.stp_role = StpRole::none;
        }
        break;
    case ChangeClass::DeviceOn:
        require_mode(after, change, DeviceMode::off);
        after.mode = DeviceMode::operational;
        for (auto& p : after.ports) {
            p.oper_up = p.admin_up;
        }
        break;
    case ChangeClass::Unknown:
        reject(after, change, "no state change can be applied for an unknown class");
    }
    return after;
}

Milliwatts modeled_delta(const DevicePowerModel& model, const DeviceStateSnapshot& before, const StateChange& change) {
    return expected_power(model, apply_change(before, change)) - expected_power(model, before);
}

Recomputed recompute_parameters(const DevicePowerModel& model, const DeviceStateSnapshot& before,
                                const StateChange& change, double adopt_fraction) {
    Recomputed out{model, apply_change(before, change), false, {}};
    if (!change.observed) {
        return out;
    }
    const Milliwatts observed = *change.observed;
    const Milliwatts expected_before = expected_power(model, before);
    DevicePowerModel cand = model;
    std::string note;

    switch (change.change_class) {
    case ChangeClass::PortDown:
    case ChangeClass::PortUp: {
        const PortState* p = before.port(*change.port);
        if (p->lpi_active) {
            return out;
        }
        const int speed = p->speed_mbps;
        const Milliwatts inc = model.port_increment(speed);
        const Milliwatts seen = abs(observed);
        if (!deviates(seen, inc, adopt_fraction)) {
            return out;
        }
        const int n = count_ports(before, [speed](const PortState& q) { return q.oper_up && q.speed_mbps == speed; });
        cand.port_active[speed] = seen;
        cand.base -= (seen - inc) * n;
        note = "port increment at " + std::to_string(speed) + " Mb/s " + format_watts(inc) + " -> " +
               format_watts(seen) + " W";
        break;
    }
    case ChangeClass::LinkRateDown:
    case ChangeClass::LinkRateUp: {
        const PortState* p = before.port(*change.port);
        const int from = p->speed_mbps;
        const int to = *change.to_speed;
        const Milliwatts modeled = model.port_increment(to) - model.port_increment(from);
        if (!deviates(observed, modeled, adopt_fraction)) {
            return out;
        }
        const Milliwatts old_to = model.port_increment(to);
        const Milliwatts new_to = model.port_increment(from) + observed;
        const int n = count_ports(before, [to](const PortState& q) { return q.oper_up && q.speed_mbps == to; });
        cand.port_active[to] = new_to;
        cand.base -= (new_to - old_to) * n;
        note = "port increment at " + std::to_string(to) + " Mb/s " + format_watts(old_to) + " -> " +
               format_watts(new_to) + " W";
        break;
    }
    case ChangeClass::EEE_LPI_Enter:
    case ChangeClass::EEE_LPI_Exit: {
        const Milliwatts seen = abs(observed);
        if (!deviates(seen, model.lpi_saving, adopt_fraction)) {
            return out;
        }
        const int n = count_ports(before, [](const PortState& q) { return q.lpi_active; });
        cand.lpi_saving = seen;
        cand.base += (seen - model.lpi_saving) * n;
        note = "LPI saving " + format_watts(model.lpi_saving) + " -> " + format_watts(seen) + " W";
        break;
    }
    case ChangeClass::STPReevaluation:
        if (!deviates(observed, model.stp_spike, adopt_fraction)) {
            return out;
        }
        cand.stp_spike = observed;
        note = "STP spike " + format_watts(model.stp_spike) + " -> " + format_watts(observed) + " W";
        break;
    case ChangeClass::Sleep:
        cand.sleep = expected_before + observed;
        note = "sleep level re-measured at " + format_watts(cand.sleep) + " W";
        break;
    case ChangeClass::DeviceOff:
        cand.off = expected_before + observed;
        note = "off level re-measured at " + format_watts(cand.off) + " W";
        break;
    case ChangeClass::Wake:
    case ChangeClass::DeviceOn: {
        Milliwatts ports{0};
        for (const auto& q : out.snapshot.ports) {
            ports += port_contribution(model, q);
        }
        cand.base = expected_before + observed - ports;
        note = "operational base re-measured at " + format_watts(cand.base) + " W";
        break;
    }
    case ChangeClass::LinkRateNoop:
    case ChangeClass::Unknown:
        return out;
    }

    if (cand == model) {
        return out;
    }
    try {
        cand.validate();
    } catch (const ValidationError& e) {
        out.note = std::string("observation not adopted (") + e.what() + ")";
        return out;
    }
    out.model = std::move(cand);
    out.model_updated = true;
    out.note = std::move(note);
    return out;
}

} // namespace ws::powermodel
