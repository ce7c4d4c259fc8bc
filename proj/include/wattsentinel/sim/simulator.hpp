#pragma once

#include "wattsentinel/sim/script.hpp"
#include "wattsentinel/sim/stp.hpp"
#include "wattsentinel/sim/topology.hpp"
#include "wattsentinel/telemetry/probe.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace ws::sim {

struct SimConfig {
    double tick_s{1.0};
    double noise_sigma_w{0.02};
    std::uint64_t seed{1};
    /// 0 runs without end (live sources).
    double duration_s{600.0};
    /// Per-device baseline offset, uniform in +-fraction of the base power.
    double baseline_offset_fraction{0.05};
    double stp_spike_min_s{2.0};
    double stp_spike_max_s{4.0};
    /// 2024-01-01T00:00:00Z, so hourly buckets line up with the clock.
    TimestampMs start_ms{1'704'067'200'000};

    void validate() const;
    [[nodiscard]] std::int64_t tick_ms() const;
    [[nodiscard]] std::uint64_t total_ticks() const;
};

struct SimDevice {
    DeviceSpec spec;
    powermodel::DeviceStateSnapshot state;
    int bridge_priority{32768};
    Milliwatts baseline_offset{0};
    int spike_ticks_left{0};
    int burst_ticks_left{0};
};

struct SimLink {
    LinkSpec spec;
    bool failed{false};
};

/// Ground-truth network state.
struct NetworkState {
    std::vector<SimDevice> devices;
    std::vector<SimLink> links;

    static NetworkState from_topology(const Topology& topology);

    [[nodiscard]] SimDevice* find(const std::string& id);
    [[nodiscard]] const SimDevice* find(const std::string& id) const;
    [[nodiscard]] std::vector<StpBridge> bridges() const;
    [[nodiscard]] std::vector<StpLink> stp_links() const;
    /// Re-derives oper state of every port from admin state, device modes
    /// and link failures.
    void refresh_ports();
};

/// Applies one action to the state. Throws ContractError when it does not
/// apply (unknown target, device off, wrong mode, port already in state).
void apply_action(NetworkState& net, const ScriptAction& action);

/// Deterministic discrete-time simulation of the scripted network.
class Simulator {
public:
    Simulator(Topology topology, FaultScript script, SimConfig config);

    /// Advances one tick and returns one probe per PDU, in topology order.
    std::vector<telemetry::ProbeResponse> step();

    /// Queues an action for the next tick after checking it against the
    /// current state. Throws ContractError if it would not apply.
    void inject(ScriptAction action);

    [[nodiscard]] bool finished() const;
    [[nodiscard]] std::uint64_t tick() const { return tick_; }
    [[nodiscard]] TimestampMs now_ms() const;
    [[nodiscard]] const NetworkState& network() const { return net_; }
    [[nodiscard]] const StpResult& stp() const { return stp_; }
    [[nodiscard]] const Topology& topology() const { return topology_; }
    [[nodiscard]] const SimConfig& config() const { return config_; }
    /// Device powers of the last step, noise included.
    [[nodiscard]] const std::map<std::string, Milliwatts>& last_power() const { return last_power_; }

private:
    void apply_due(double t_s);
    void reconverge();
    void apply_roles();

    Topology topology_;
    FaultScript script_;
    SimConfig config_;
    NetworkState net_;
    StpResult stp_;
    std::size_t next_action_{0};
    std::deque<ScriptAction> injected_;
    std::uint64_t tick_{0};
    std::mt19937_64 noise_rng_;
    std::mt19937_64 spike_rng_;
    std::map<std::string, Milliwatts> last_power_;
};

/// Runs a whole simulation and returns every probe in (time, pdu) order.
/// A zero duration yields no probes here rather than an endless run.
std::vector<telemetry::ProbeResponse> simulate_all(const Topology& topology, const FaultScript& script,
                                                   const SimConfig& config);

} // namespace ws::sim
