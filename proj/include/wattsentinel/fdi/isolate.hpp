#pragma once

#include "wattsentinel/fdi/knowledge_base.hpp"
#include "wattsentinel/fdi/types.hpp"
#include "wattsentinel/powermodel/registry.hpp"

#include <set>
#include <span>
#include <string>

namespace ws::fdi {

/// Operator policy. Entries are "device" or "device:port"; a degrading
/// change (port down, slower link, LPI, sleep, off) on one of them is a
/// misconfiguration even when the models explain it.
struct IsolationPolicy {
    std::set<std::string> critical_ports;

    [[nodiscard]] bool violated_by(const std::string& device_id, const StateChange& change) const;
};

/// First half of isolation: the chosen change applied to the device's model
/// and snapshot. The caller installs `after` in the registry and collects
/// verification residuals against it.
struct IsolationPlan {
    DetectionEvent event;
    powermodel::DeviceEntry before;
    powermodel::DeviceEntry after;
    bool model_updated{false};
    /// Set when the change could not be applied; the verdict is then fault.
    std::string contract_error;
    std::string note;
};

/// Throws ContractError for Unknown events or an unregistered device.
IsolationPlan begin_isolation(const DetectionEvent& event, const powermodel::ModelRegistry& registry,
                              double adopt_fraction);

/// Verdict from the verification window: fault unless mean |residual| < theta,
/// then misconfiguration or benign by policy.
IsolationResult conclude_isolation(const IsolationPlan& plan, std::span<const Residual> verification,
                                   const IsolationPolicy& policy, Milliwatts theta, TimestampMs now_ms);

/// begin + install + conclude + KB bookkeeping in one call, for callers that
/// already hold the verification residuals.
IsolationResult isolate(const DetectionEvent& event, powermodel::ModelRegistry& registry, KnowledgeBase& kb,
                        std::span<const Residual> verification, const IsolationPolicy& policy, Milliwatts theta,
                        double adopt_fraction, TimestampMs now_ms);

} // namespace ws::fdi
