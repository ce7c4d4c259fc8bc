#pragma once

#include "wattsentinel/fdi/knowledge_base.hpp"
#include "wattsentinel/fdi/types.hpp"
#include "wattsentinel/powermodel/registry.hpp"

#include <optional>
#include <string>

namespace ws::fdi {

struct DetectConfig {
    double min_score{0.25};
    double tie_gap{0.05};
    /// Allowed distance outside a static band (3 sigma of the default noise).
    double amplitude_tolerance_w{0.06};
    /// Allowed distance from a model-predicted amplitude, relative to it.
    double model_relative_tolerance{0.1};
    double lpi_revert_horizon_s{60.0};

    void validate() const;
};

/// Score in [0, 1] for an amplitude against a static band: 1 at the midpoint,
/// 0.5 at the edges, decaying linearly to 0 at `tolerance` outside.
double band_score(double amplitude, const ValueRange& band, double tolerance);

/// Score in [0, 1] for an amplitude against a model prediction.
double model_score(double amplitude, double predicted, const DetectConfig& config);

/// Ranks every applicable signature against `feature` for the device's
/// current (model, snapshot) and the KB's event history. Candidates whose
/// state precondition fails (e.g. PortDown with no port up) are dropped.
/// Throws ContractError when the KB has no signatures. The caller assigns
/// event_id and socket.
DetectionEvent detect(const std::string& device_id, const powermodel::DeviceEntry& device,
                      const ChangeFeature& feature, const KnowledgeBase& kb, const DetectConfig& config,
                      TimestampMs now_ms);

} // namespace ws::fdi
