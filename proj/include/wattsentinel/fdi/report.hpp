#pragma once

#include "wattsentinel/fdi/types.hpp"

#include <span>
#include <string>
#include <string_view>

namespace ws::fdi {

inline constexpr std::string_view kReportHeader =
    "ts_ms,pdu,socket,device,class,verdict,amplitude_w,duration_s,ambiguous,narrative";

/// Class label used in reports; unbound-socket events read "UnknownDevice".
std::string report_class(const DetectionEvent& event);

/// One row per detection (verdict taken from the matching isolation,
/// "pending" if none yet, "unresolved" for unbound sockets) and one row per
/// correction (verdict "correction"). Rows sorted by timestamp, pdu, socket,
/// event id. Deterministic byte for byte.
std::string report_csv(std::span<const DetectionEvent> detections, std::span<const IsolationResult> isolations,
                       std::span<const CorrectionRecord> corrections);

/// RFC 4180 quoting when needed.
std::string csv_field(std::string_view value);

} // namespace ws::fdi
