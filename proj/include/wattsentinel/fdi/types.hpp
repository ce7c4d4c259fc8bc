#pragma once

#include "wattsentinel/powermodel/registry.hpp"
#include "wattsentinel/powermodel/state_change.hpp"
#include "wattsentinel/units.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ws::fdi {

using powermodel::ChangeClass;
using powermodel::DeviceClass;
using powermodel::SocketRef;
using powermodel::StateChange;

/// measured - expected for one socket, or for a whole PDU when `socket` is empty.
struct Residual {
    std::string pdu_id;
    std::optional<int> socket_id;
    TimestampMs timestamp_ms{0};
    Milliwatts measured;
    Milliwatts expected;

    [[nodiscard]] Milliwatts value() const { return measured - expected; }
};

struct PowerSample {
    TimestampMs timestamp_ms{0};
    Milliwatts power;
};

enum class ShapeKind { step, spike, burst_then_step };

std::string_view to_string(ShapeKind k);
std::optional<ShapeKind> parse_shape(std::string_view s);

struct ChangeFeature {
    ShapeKind kind{ShapeKind::step};
    TimestampMs onset_ms{0};
    /// Signed. Step and burst: post - pre. Spike: peak excursion.
    double amplitude_w{0.0};
    /// Spike and burst only.
    double duration_s{0.0};
    double pre_mean_w{0.0};
    double post_mean_w{0.0};

    bool operator==(const ChangeFeature&) const = default;
};

struct Candidate {
    ChangeClass change_class{ChangeClass::Unknown};
    double score{0.0};
    /// Resolved target (port, speed) for this class on this device.
    StateChange change;
    /// Set when the candidate reverts a recent event (LPI revert).
    std::optional<std::uint64_t> reverts_event;

    bool operator==(const Candidate&) const = default;
};

struct DetectionEvent {
    std::uint64_t event_id{0};
    std::string device_id;  ///< empty for an unbound socket
    SocketRef socket;
    ChangeFeature feature;
    std::vector<Candidate> candidates;
    ChangeClass chosen{ChangeClass::Unknown};
    bool ambiguous{false};
    TimestampMs detected_at_ms{0};
    std::string note;

    bool operator==(const DetectionEvent&) const = default;

    [[nodiscard]] bool unbound_socket() const { return device_id.empty(); }
};

enum class Verdict { fault, misconfiguration, benign_state_change };

std::string_view to_string(Verdict v);
std::optional<Verdict> parse_verdict(std::string_view s);

struct IsolationResult {
    std::uint64_t event_id{0};
    std::string device_id;
    SocketRef socket;
    ChangeClass change_class{ChangeClass::Unknown};
    Verdict verdict{Verdict::fault};
    bool model_updated{false};
    double mean_abs_residual_w{0.0};
    std::string narrative;
    TimestampMs resolved_at_ms{0};

    bool operator==(const IsolationResult&) const = default;
};

/// Retroactive reclassification of an earlier event. Never rewrites the
/// original record.
struct CorrectionRecord {
    std::uint64_t corrects_event_id{0};
    std::string device_id;
    SocketRef socket;
    ChangeClass from{ChangeClass::Unknown};
    ChangeClass to{ChangeClass::Unknown};
    double amplitude_w{0.0};
    TimestampMs at_ms{0};
    std::string narrative;

    bool operator==(const CorrectionRecord&) const = default;
};

struct Warning {
    TimestampMs timestamp_ms{0};
    std::string message;

    bool operator==(const Warning&) const = default;
};

} // namespace ws::fdi
