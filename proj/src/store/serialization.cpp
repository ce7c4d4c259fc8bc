#include "wattsentinel/store/serialization.hpp"

#include "wattsentinel/errors.hpp"

namespace ws::store {

using nlohmann::json;
using powermodel::ChangeClass;

namespace {

template <typename T, typename Parse>
T parse_enum(const json& j, const char* field, Parse parse) {
    const auto v = parse(j.at(field).get<std::string>());
    if (!v) {
        throw ValidationError(field, "unknown value " + j.at(field).get<std::string>());
    }
    return *v;
}

ChangeClass change_class(const json& j, const char* field) {
    return parse_enum<ChangeClass>(j, field, powermodel::parse_change_class);
}

json socket_json(const powermodel::SocketRef& s) { return json{{"pdu", s.pdu_id}, {"socket", s.socket_id}}; }

powermodel::SocketRef socket_from(const json& j) {
    return powermodel::SocketRef{j.at("pdu").get<std::string>(), j.at("socket").get<int>()};
}

json change_json(const powermodel::StateChange& c) {
    json j{{"class", powermodel::to_string(c.change_class)}};
    if (c.port) {
        j["port"] = *c.port;
    }
    if (c.to_speed) {
        j["to_speed"] = *c.to_speed;
    }
    if (c.observed) {
        j["observed_mw"] = c.observed->value;
    }
    return j;
}

powermodel::StateChange change_from(const json& j) {
    powermodel::StateChange c;
    c.change_class = change_class(j, "class");
    if (j.contains("port")) {
        c.port = j.at("port").get<int>();
    }
    if (j.contains("to_speed")) {
        c.to_speed = j.at("to_speed").get<int>();
    }
    if (j.contains("observed_mw")) {
        c.observed = Milliwatts{j.at("observed_mw").get<std::int64_t>()};
    }
    return c;
}

fdi::ChangeFeature feature_from(const json& j) {
    fdi::ChangeFeature f;
    f.kind = parse_enum<fdi::ShapeKind>(j, "kind", fdi::parse_shape);
    f.onset_ms = j.at("onset_ms").get<TimestampMs>();
    f.amplitude_w = j.at("amplitude_w").get<double>();
    f.duration_s = j.at("duration_s").get<double>();
    f.pre_mean_w = j.at("pre_mean_w").get<double>();
    f.post_mean_w = j.at("post_mean_w").get<double>();
    return f;
}

} // namespace

json to_json(const powermodel::DeviceStateSnapshot& s) {
    json ports = json::array();
    for (const auto& p : s.ports) {
        ports.push_back(json{{"id", p.port_id},
                             {"admin_up", p.admin_up},
                             {"oper_up", p.oper_up},
                             {"speed_mbps", p.speed_mbps},
                             {"lpi_active", p.lpi_active},
                             {"stp_role", powermodel::to_string(p.stp_role)}});
    }
    return json{{"device_id", s.device_id},
                {"class", powermodel::to_string(s.device_class)},
                {"mode", powermodel::to_string(s.mode)},
                {"ports", ports},
                {"as_of_ms", s.as_of_ms}};
}

powermodel::DeviceStateSnapshot snapshot_from_json(const json& j) {
    powermodel::DeviceStateSnapshot s;
    s.device_id = j.at("device_id").get<std::string>();
    s.device_class = parse_enum<powermodel::DeviceClass>(j, "class", powermodel::parse_device_class);
    s.mode = parse_enum<powermodel::DeviceMode>(j, "mode", powermodel::parse_device_mode);
    s.as_of_ms = j.at("as_of_ms").get<TimestampMs>();
    for (const auto& p : j.at("ports")) {
        powermodel::PortState port;
        port.port_id = p.at("id").get<int>();
        port.admin_up = p.at("admin_up").get<bool>();
        port.oper_up = p.at("oper_up").get<bool>();
        port.speed_mbps = p.at("speed_mbps").get<int>();
        port.lpi_active = p.at("lpi_active").get<bool>();
        port.stp_role = parse_enum<powermodel::StpRole>(p, "stp_role", powermodel::parse_stp_role);
        s.ports.push_back(port);
    }
    return s;
}

json to_json(const fdi::ChangeFeature& f) {
    return json{{"kind", fdi::to_string(f.kind)},   {"onset_ms", f.onset_ms},     {"amplitude_w", f.amplitude_w},
                {"duration_s", f.duration_s},        {"pre_mean_w", f.pre_mean_w}, {"post_mean_w", f.post_mean_w}};
}

json to_json(const fdi::DetectionEvent& ev) {
    json candidates = json::array();
    for (const auto& c : ev.candidates) {
        json cj{{"class", powermodel::to_string(c.change_class)}, {"score", c.score}, {"change", change_json(c.change)}};
        if (c.reverts_event) {
            cj["reverts_event"] = *c.reverts_event;
        }
        candidates.push_back(cj);
    }
    return json{{"event_id", ev.event_id},
                {"device_id", ev.device_id},
                {"socket", socket_json(ev.socket)},
                {"feature", to_json(ev.feature)},
                {"candidates", candidates},
                {"chosen", powermodel::to_string(ev.chosen)},
                {"ambiguous", ev.ambiguous},
                {"detected_at_ms", ev.detected_at_ms},
                {"note", ev.note}};
}

fdi::DetectionEvent detection_from_json(const json& j) {
    fdi::DetectionEvent ev;
    ev.event_id = j.at("event_id").get<std::uint64_t>();
    ev.device_id = j.at("device_id").get<std::string>();
    ev.socket = socket_from(j.at("socket"));
    ev.feature = feature_from(j.at("feature"));
    for (const auto& c : j.at("candidates")) {
        fdi::Candidate cand;
        cand.change_class = change_class(c, "class");
        cand.score = c.at("score").get<double>();
        cand.change = change_from(c.at("change"));
        if (c.contains("reverts_event")) {
            cand.reverts_event = c.at("reverts_event").get<std::uint64_t>();
        }
        ev.candidates.push_back(cand);
    }
    ev.chosen = change_class(j, "chosen");
    ev.ambiguous = j.at("ambiguous").get<bool>();
    ev.detected_at_ms = j.at("detected_at_ms").get<TimestampMs>();
    ev.note = j.at("note").get<std::string>();
    return ev;
}

json to_json(const fdi::IsolationResult& r) {
    return json{{"event_id", r.event_id},
                {"device_id", r.device_id},
                {"socket", socket_json(r.socket)},
                {"class", powermodel::to_string(r.change_class)},
                {"verdict", fdi::to_string(r.verdict)},
                {"model_updated", r.model_updated},
                {"mean_abs_residual_w", r.mean_abs_residual_w},
                {"narrative", r.narrative},
                {"resolved_at_ms", r.resolved_at_ms}};
}

fdi::IsolationResult isolation_from_json(const json& j) {
    fdi::IsolationResult r;
    r.event_id = j.at("event_id").get<std::uint64_t>();
    r.device_id = j.at("device_id").get<std::string>();
    r.socket = socket_from(j.at("socket"));
    r.change_class = change_class(j, "class");
    r.verdict = parse_enum<fdi::Verdict>(j, "verdict", fdi::parse_verdict);
    r.model_updated = j.at("model_updated").get<bool>();
    r.mean_abs_residual_w = j.at("mean_abs_residual_w").get<double>();
    r.narrative = j.at("narrative").get<std::string>();
    r.resolved_at_ms = j.at("resolved_at_ms").get<TimestampMs>();
    return r;
}

json to_json(const fdi::CorrectionRecord& c) {
    return json{{"corrects_event_id", c.corrects_event_id},
                {"device_id", c.device_id},
                {"socket", socket_json(c.socket)},
                {"from", powermodel::to_string(c.from)},
                {"to", powermodel::to_string(c.to)},
                {"amplitude_w", c.amplitude_w},
                {"at_ms", c.at_ms},
                {"narrative", c.narrative}};
}

fdi::CorrectionRecord correction_from_json(const json& j) {
    fdi::CorrectionRecord c;
    c.corrects_event_id = j.at("corrects_event_id").get<std::uint64_t>();
    c.device_id = j.at("device_id").get<std::string>();
    c.socket = socket_from(j.at("socket"));
    c.from = change_class(j, "from");
    c.to = change_class(j, "to");
    c.amplitude_w = j.at("amplitude_w").get<double>();
    c.at_ms = j.at("at_ms").get<TimestampMs>();
    c.narrative = j.at("narrative").get<std::string>();
    return c;
}

json to_json(const HistoryRecord& r) {
    json payload = std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PowerReading>) {
                return json{{"power_mw", p.power.value}};
            } else {
                return to_json(p);
            }
        },
        r.payload);
    return json{{"kind", to_string(r.kind)}, {"key", r.key}, {"ts_ms", r.timestamp_ms}, {"payload", payload}};
}

HistoryRecord record_from_json(const json& j) {
    try {
        HistoryRecord r;
        r.kind = parse_enum<RecordKind>(j, "kind", parse_kind);
        r.key = j.at("key").get<std::string>();
        r.timestamp_ms = j.at("ts_ms").get<TimestampMs>();
        const json& p = j.at("payload");
        switch (r.kind) {
        case RecordKind::power_total:
        case RecordKind::power_socket:
            r.payload = PowerReading{Milliwatts{p.at("power_mw").get<std::int64_t>()}};
            break;
        case RecordKind::state_snapshot: r.payload = snapshot_from_json(p); break;
        case RecordKind::detection: r.payload = detection_from_json(p); break;
        case RecordKind::isolation: r.payload = isolation_from_json(p); break;
        case RecordKind::correction: r.payload = correction_from_json(p); break;
        }
        return r;
    } catch (const json::exception& e) {
        throw ValidationError("record", e.what());
    }
}

} // namespace ws::store
