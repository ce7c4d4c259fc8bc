#include "wattsentinel/sim/simulator.hpp"

#include "wattsentinel/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <set>

namespace ws::sim {

using powermodel::DeviceClass;
using powermodel::DeviceMode;
using powermodel::PortState;

namespace {

[[noreturn]] void reject(const ScriptAction& a, const std::string& why) {
    throw ContractError(format_action(a) + ": " + why);
}

PortState& port_of(SimDevice& d, const ScriptAction& a) {
    PortState* p = a.port ? d.state.port(*a.port) : nullptr;
    if (p == nullptr) {
        reject(a, d.spec.id + " has no port " + (a.port ? std::to_string(*a.port) : std::string("(none)")));
    }
    return *p;
}

SimLink* link_at(NetworkState& net, const std::string& dev, int port) {
    for (auto& l : net.links) {
        if ((l.spec.a == dev && l.spec.a_port == port) || (l.spec.b == dev && l.spec.b_port == port)) {
            return &l;
        }
    }
    return nullptr;
}

/// Peer end of a link as (device, port).
std::pair<std::string, int> peer_of(const SimLink& l, const std::string& dev, int port) {
    if (l.spec.a == dev && l.spec.a_port == port) {
        return {l.spec.b, l.spec.b_port};
    }
    return {l.spec.a, l.spec.a_port};
}

} // namespace

void SimConfig::validate() const {
    if (!(tick_s > 0.0)) {
        throw ValidationError("tick_s", "must be positive");
    }
    if (noise_sigma_w < 0.0) {
        throw ValidationError("noise_sigma_w", "must not be negative");
    }
    if (duration_s < 0.0) {
        throw ValidationError("duration_s", "must not be negative");
    }
    if (baseline_offset_fraction < 0.0 || baseline_offset_fraction >= 1.0) {
        throw ValidationError("baseline_offset_fraction", "must be in [0, 1)");
    }
    if (stp_spike_min_s <= 0.0 || stp_spike_max_s < stp_spike_min_s) {
        throw ValidationError("stp_spike_s", "requires 0 < min <= max");
    }
}

std::int64_t SimConfig::tick_ms() const { return std::llround(tick_s * 1000.0); }

std::uint64_t SimConfig::total_ticks() const {
    return static_cast<std::uint64_t>(std::ceil(duration_s / tick_s - 1e-9));
}

NetworkState NetworkState::from_topology(const Topology& topology) {
    NetworkState net;
    for (const auto& d : topology.devices) {
        SimDevice s;
        s.spec = d;
        s.state = powermodel::DeviceStateSnapshot{d.id, d.device_class, d.mode, d.ports, 0};
        s.bridge_priority = d.bridge_priority;
        net.devices.push_back(std::move(s));
    }
    for (const auto& l : topology.links) {
        net.links.push_back(SimLink{l, false});
    }
    net.refresh_ports();
    return net;
}

SimDevice* NetworkState::find(const std::string& id) {
    for (auto& d : devices) {
        if (d.spec.id == id) {
            return &d;
        }
    }
    return nullptr;
}

const SimDevice* NetworkState::find(const std::string& id) const {
    return const_cast<NetworkState*>(this)->find(id);
}

std::vector<StpBridge> NetworkState::bridges() const {
    std::vector<StpBridge> out;
    for (const auto& d : devices) {
        if (d.spec.device_class == DeviceClass::switch_ && d.state.mode != DeviceMode::off) {
            out.push_back(StpBridge{d.spec.id, d.bridge_priority});
        }
    }
    return out;
}

std::vector<StpLink> NetworkState::stp_links() const {
    std::vector<StpLink> out;
    for (const auto& l : links) {
        const auto* a = find(l.spec.a);
        const auto* b = find(l.spec.b);
        const bool up = a->state.port(l.spec.a_port)->oper_up && b->state.port(l.spec.b_port)->oper_up;
        out.push_back(StpLink{l.spec.a, l.spec.a_port, l.spec.b, l.spec.b_port, up});
    }
    return out;
}

void NetworkState::refresh_ports() {
    for (auto& d : devices) {
        for (auto& p : d.state.ports) {
            bool up = p.admin_up && d.state.mode != DeviceMode::off;
            if (const SimLink* l = link_at(*this, d.spec.id, p.port_id); l != nullptr && up) {
                const auto [peer_id, peer_port] = peer_of(*l, d.spec.id, p.port_id);
                const SimDevice* peer = find(peer_id);
                up = !l->failed && peer->state.mode != DeviceMode::off && peer->state.port(peer_port)->admin_up;
            }
            p.oper_up = up;
            if (!up) {
                p.lpi_active = false;
                p.stp_role = powermodel::StpRole::none;
            }
        }
    }
}

void apply_action(NetworkState& net, const ScriptAction& a) {
    SimDevice* d = net.find(a.device);
    if (d == nullptr) {
        reject(a, "unknown device " + a.device);
    }
    auto& st = d->state;
    if (st.mode == DeviceMode::off && a.kind != ActionKind::power_on) {
        reject(a, a.device + " is powered off");
    }
    switch (a.kind) {
    case ActionKind::sleep:
        if (st.mode != DeviceMode::operational) {
            reject(a, a.device + " is not operational");
        }
        st.mode = DeviceMode::sleep;
        break;
    case ActionKind::wake:
        if (st.mode != DeviceMode::sleep) {
            reject(a, a.device + " is not asleep");
        }
        st.mode = DeviceMode::operational;
        break;
    case ActionKind::power_off:
        st.mode = DeviceMode::off;
        break;
    case ActionKind::power_on:
        if (st.mode != DeviceMode::off) {
            reject(a, a.device + " is already on");
        }
        st.mode = DeviceMode::operational;
        break;
    case ActionKind::port_down: {
        PortState& p = port_of(*d, a);
        if (!p.admin_up) {
            reject(a, "port is already administratively down");
        }
        p.admin_up = false;
        break;
    }
    case ActionKind::port_up: {
        PortState& p = port_of(*d, a);
        SimLink* l = link_at(net, a.device, p.port_id);
        if (p.admin_up && (l == nullptr || !l->failed)) {
            reject(a, "port is already up");
        }
        p.admin_up = true;
        if (l != nullptr) {
            l->failed = false;
        }
        break;
    }
    case ActionKind::set_speed: {
        PortState& p = port_of(*d, a);
        if (!a.arg || !powermodel::is_valid_speed(*a.arg)) {
            reject(a, "speed must be 10, 100 or 1000");
        }
        if (p.speed_mbps == *a.arg) {
            reject(a, "port already runs at that speed");
        }
        p.speed_mbps = *a.arg;
        if (SimLink* l = link_at(net, a.device, p.port_id)) {
            const auto [peer_id, peer_port] = peer_of(*l, a.device, p.port_id);
            net.find(peer_id)->state.port(peer_port)->speed_mbps = *a.arg;
        }
        break;
    }
    case ActionKind::lpi_enter: {
        PortState& p = port_of(*d, a);
        if (!p.oper_up || p.lpi_active) {
            reject(a, "port must be up and not already in LPI");
        }
        p.lpi_active = true;
        break;
    }
    case ActionKind::lpi_exit: {
        PortState& p = port_of(*d, a);
        if (!p.lpi_active) {
            reject(a, "port is not in LPI");
        }
        p.lpi_active = false;
        break;
    }
    case ActionKind::link_fail: {
        PortState& p = port_of(*d, a);
        SimLink* l = link_at(net, a.device, p.port_id);
        if (l == nullptr) {
            reject(a, "port has no link");
        }
        if (l->failed || !p.oper_up) {
            reject(a, "link is already down");
        }
        l->failed = true;
        break;
    }
    case ActionKind::set_priority:
        if (d->spec.device_class != DeviceClass::switch_) {
            reject(a, a.device + " is not a switch");
        }
        if (!a.arg || *a.arg < 0 || *a.arg > 65535) {
            reject(a, "priority must be in 0..65535");
        }
        d->bridge_priority = *a.arg;
        break;
    }
    net.refresh_ports();
}

Simulator::Simulator(Topology topology, FaultScript script, SimConfig config)
    : topology_(std::move(topology)),
      script_(std::move(script)),
      config_(config),
      net_(NetworkState::from_topology(topology_)),
      noise_rng_(config.seed),
      spike_rng_(config.seed ^ 0x5bd1e995ULL) {
    config_.validate();
    std::mt19937_64 offset_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> offset(-config_.baseline_offset_fraction, config_.baseline_offset_fraction);
    for (auto& d : net_.devices) {
        const double f = config_.baseline_offset_fraction > 0.0 ? offset(offset_rng) : 0.0;
        d.baseline_offset = Milliwatts::from_watts(f * d.spec.model.base.watts());
    }
    stp_ = stp_converge(net_.bridges(), net_.stp_links());
    apply_roles();
}

TimestampMs Simulator::now_ms() const {
    return config_.start_ms + static_cast<TimestampMs>(tick_) * config_.tick_ms();
}

bool Simulator::finished() const { return config_.duration_s > 0.0 && tick_ >= config_.total_ticks(); }

void Simulator::inject(ScriptAction action) {
    NetworkState dry = net_;
    for (const auto& q : injected_) {
        apply_action(dry, q);
    }
    apply_action(dry, action);
    injected_.push_back(std::move(action));
}

void Simulator::apply_roles() {
    for (auto& d : net_.devices) {
        for (auto& p : d.state.ports) {
            auto it = stp_.roles.find({d.spec.id, p.port_id});
            p.stp_role = it == stp_.roles.end() ? powermodel::StpRole::none : it->second;
        }
    }
}

void Simulator::reconverge() {
    const StpResult before = stp_;
    stp_ = stp_converge(net_.bridges(), net_.stp_links());
    apply_roles();
    if (stp_ == before) {
        return;
    }
    std::set<std::string> changed;
    auto note = [&](const StpResult& a, const StpResult& b) {
        for (const auto& [id, root] : a.root_of) {
            auto it = b.root_of.find(id);
            if (it == b.root_of.end() || it->second != root) {
                changed.insert(id);
            }
        }
        for (const auto& [key, role] : a.roles) {
            auto it = b.roles.find(key);
            if (it == b.roles.end() || it->second != role) {
                changed.insert(key.first);
            }
        }
    };
    note(before, stp_);
    note(stp_, before);
    std::set<std::string> roots;
    for (const auto& id : changed) {
        if (auto it = stp_.root_of.find(id); it != stp_.root_of.end()) {
            roots.insert(it->second);
        }
    }
    std::uniform_real_distribution<double> duration(config_.stp_spike_min_s, config_.stp_spike_max_s);
    for (auto& d : net_.devices) {
        auto it = stp_.root_of.find(d.spec.id);
        const bool affected = changed.contains(d.spec.id) || (it != stp_.root_of.end() && roots.contains(it->second));
        if (!affected || d.state.mode != DeviceMode::operational) {
            continue;
        }
        const double secs = duration(spike_rng_);
        d.spike_ticks_left = std::max(1, static_cast<int>(std::lround(secs / config_.tick_s)));
    }
}

void Simulator::apply_due(double t_s) {
    std::vector<ScriptAction> due;
    while (next_action_ < script_.actions.size() && script_.actions[next_action_].at_s <= t_s + 1e-9) {
        due.push_back(script_.actions[next_action_++]);
    }
    while (!injected_.empty()) {
        due.push_back(std::move(injected_.front()));
        injected_.pop_front();
    }
    if (due.empty()) {
        return;
    }
    for (const auto& a : due) {
        apply_action(net_, a);
        if (a.kind == ActionKind::wake || a.kind == ActionKind::power_on) {
            SimDevice* d = net_.find(a.device);
            d->burst_ticks_left = static_cast<int>(std::lround(d->spec.model.wake_burst_s / config_.tick_s));
        }
    }
    reconverge();
}

std::vector<telemetry::ProbeResponse> Simulator::step() {
    apply_due(static_cast<double>(tick_) * config_.tick_s);
    const TimestampMs ts = now_ms();

    std::normal_distribution<double> noise(0.0, config_.noise_sigma_w > 0.0 ? config_.noise_sigma_w : 1.0);
    std::map<std::pair<std::string, int>, Milliwatts> at_socket;
    last_power_.clear();
    for (auto& d : net_.devices) {
        const auto& m = d.spec.model;
        Milliwatts level = powermodel::expected_power(m, d.state);
        if (d.state.mode == DeviceMode::operational) {
            level += d.baseline_offset;
        }
        if (d.spike_ticks_left > 0) {
            level += m.stp_spike;
            --d.spike_ticks_left;
        }
        if (d.burst_ticks_left > 0) {
            if (d.state.mode == DeviceMode::operational) {
                level += m.wake_burst;
            }
            --d.burst_ticks_left;
        }
        double w = level.watts();
        if (config_.noise_sigma_w > 0.0) {
            w += noise(noise_rng_);
        }
        const Milliwatts p{std::max<std::int64_t>(0, std::llround(w * 1000.0))};
        last_power_[d.spec.id] = p;
        at_socket[{d.spec.pdu_id, d.spec.socket_id}] = p;
    }

    std::vector<telemetry::ProbeResponse> out;
    for (const auto& pdu : topology_.pdus) {
        telemetry::ProbeResponse probe;
        probe.pdu_id = pdu.id;
        probe.timestamp_ms = ts;
        Milliwatts sum{0};
        for (int s = 1; s <= pdu.sockets; ++s) {
            auto it = at_socket.find({pdu.id, s});
            const Milliwatts p = it == at_socket.end() ? Milliwatts{0} : it->second;
            probe.sockets.push_back(telemetry::synthesize_sample(s, p));
            sum += telemetry::active_power(probe.sockets.back());
        }
        probe.total = telemetry::synthesize_sample(0, sum);
        out.push_back(std::move(probe));
    }
    ++tick_;
    return out;
}

std::vector<telemetry::ProbeResponse> simulate_all(const Topology& topology, const FaultScript& script,
                                                   const SimConfig& config) {
    Simulator sim(topology, script, config);
    std::vector<telemetry::ProbeResponse> out;
    if (config.duration_s <= 0.0) {
        return out;
    }
    while (!sim.finished()) {
        auto probes = sim.step();
        out.insert(out.end(), std::make_move_iterator(probes.begin()), std::make_move_iterator(probes.end()));
    }
    return out;
}

} // namespace ws::sim
