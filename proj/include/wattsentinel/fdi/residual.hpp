#pragma once

#include "wattsentinel/fdi/types.hpp"
#include "wattsentinel/powermodel/registry.hpp"
#include "wattsentinel/telemetry/probe.hpp"

#include <optional>
#include <vector>

namespace ws::fdi {

/// Whole-PDU residual: measured total minus the sum of expectations of every
/// socket in the probe (unbound sockets expect 0 W).
Residual total_residual(const telemetry::ProbeResponse& probe, const powermodel::ModelRegistry& registry);

/// Residual for every socket of the probe, in probe order.
std::vector<Residual> socket_residuals(const telemetry::ProbeResponse& probe,
                                       const powermodel::ModelRegistry& registry);

/// nullopt when |total residual| <= theta. Otherwise the sockets whose own
/// residual magnitude exceeds theta, in probe order. Both signs flag.
/// Unbound sockets are included; the caller turns those into UnknownDevice
/// events.
std::optional<std::vector<Residual>> compare_total(const telemetry::ProbeResponse& probe,
                                                   const powermodel::ModelRegistry& registry, Milliwatts theta);

} // namespace ws::fdi
