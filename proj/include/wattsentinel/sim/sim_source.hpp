#pragma once

#include "wattsentinel/sim/simulator.hpp"
#include "wattsentinel/telemetry/source.hpp"

#include <map>
#include <mutex>

namespace ws::sim {

/// Serves simulator ticks to the poller. The first PDU to ask for a tick
/// advances the simulation; the others read the cached probes.
class SimSource final : public telemetry::PowerSource {
public:
    SimSource(Topology topology, FaultScript script, SimConfig config);

    [[nodiscard]] std::vector<std::string> pdu_ids() const override;
    telemetry::ReadResult read(const std::string& pdu_id, std::uint64_t tick, TimestampMs scheduled_ms) override;
    [[nodiscard]] bool simulated() const override { return true; }

    /// Throws ContractError when the action does not apply.
    void inject(ScriptAction action);
    [[nodiscard]] std::map<std::string, Milliwatts> device_powers() const;
    [[nodiscard]] NetworkState network() const;

private:
    mutable std::mutex mutex_;
    Simulator sim_;
    std::vector<std::string> pdu_ids_;
    /// tick -> probes in topology PDU order
    std::map<std::uint64_t, std::vector<telemetry::ProbeResponse>> cache_;
};

} // namespace ws::sim
