#include "wattsentinel/fdi/report.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <map>
#include <tuple>
#include <vector>

namespace ws::fdi {

namespace {

struct Row {
    TimestampMs ts{0};
    SocketRef socket;
    std::uint64_t event_id{0};
    int order{0};
    std::string text;
};

} // namespace

std::string report_class(const DetectionEvent& event) {
    return event.unbound_socket() ? "UnknownDevice" : std::string(powermodel::to_string(event.chosen));
}

std::string csv_field(std::string_view value) {
    if (value.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(value);
    }
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::string report_csv(std::span<const DetectionEvent> detections, std::span<const IsolationResult> isolations,
                       std::span<const CorrectionRecord> corrections) {
    std::map<std::uint64_t, const IsolationResult*> by_event;
    for (const auto& r : isolations) {
        by_event[r.event_id] = &r;
    }

    std::vector<Row> rows;
    rows.reserve(detections.size() + corrections.size());
    for (const auto& ev : detections) {
        std::string verdict = "pending";
        std::string narrative = ev.note;
        if (ev.unbound_socket()) {
            verdict = "unresolved";
        } else if (auto it = by_event.find(ev.event_id); it != by_event.end()) {
            verdict = std::string(to_string(it->second->verdict));
            narrative = it->second->narrative;
        }
        const std::string duration =
            ev.feature.kind == ShapeKind::step ? std::string() : fmt::format("{:.1f}", ev.feature.duration_s);
        rows.push_back(Row{ev.feature.onset_ms, ev.socket, ev.event_id, 0,
                           fmt::format("{},{},{},{},{},{},{:.3f},{},{},{}", ev.feature.onset_ms,
                                       csv_field(ev.socket.pdu_id), ev.socket.socket_id, csv_field(ev.device_id),
                                       report_class(ev), verdict, ev.feature.amplitude_w, duration,
                                       ev.ambiguous ? "true" : "false", csv_field(narrative))});
    }
    for (const auto& c : corrections) {
        rows.push_back(Row{c.at_ms, c.socket, c.corrects_event_id, 1,
                           fmt::format("{},{},{},{},{},correction,{:.3f},,false,{}", c.at_ms,
                                       csv_field(c.socket.pdu_id), c.socket.socket_id, csv_field(c.device_id),
                                       powermodel::to_string(c.to), c.amplitude_w, csv_field(c.narrative))});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::tie(a.ts, a.socket, a.event_id, a.order) < std::tie(b.ts, b.socket, b.event_id, b.order);
    });

    std::string out(kReportHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += r.text;
        out += '\n';
    }
    return out;
}

} // namespace ws::fdi
