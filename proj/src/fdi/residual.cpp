#include "wattsentinel/fdi/residual.hpp"

namespace ws::fdi {

Residual total_residual(const telemetry::ProbeResponse& probe, const powermodel::ModelRegistry& registry) {
    Milliwatts expected{0};
    for (const auto& s : probe.sockets) {
        expected += registry.expected_at(SocketRef{probe.pdu_id, s.socket_id});
    }
    return Residual{probe.pdu_id, std::nullopt, probe.timestamp_ms, telemetry::active_power(probe.total), expected};
}

std::vector<Residual> socket_residuals(const telemetry::ProbeResponse& probe,
                                       const powermodel::ModelRegistry& registry) {
    std::vector<Residual> out;
    out.reserve(probe.sockets.size());
    for (const auto& s : probe.sockets) {
        out.push_back(Residual{probe.pdu_id, s.socket_id, probe.timestamp_ms, telemetry::active_power(s),
                               registry.expected_at(SocketRef{probe.pdu_id, s.socket_id})});
    }
    return out;
}

std::optional<std::vector<Residual>> compare_total(const telemetry::ProbeResponse& probe,
                                                   const powermodel::ModelRegistry& registry, Milliwatts theta) {
    if (abs(total_residual(probe, registry).value()) <= theta) {
        return std::nullopt;
    }
    std::vector<Residual> flagged;
    for (auto& r : socket_residuals(probe, registry)) {
        if (abs(r.value()) > theta) {
            flagged.push_back(std::move(r));
        }
    }
    return flagged;
}

} // namespace ws::fdi
