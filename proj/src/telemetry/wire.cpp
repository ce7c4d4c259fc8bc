#include "wattsentinel/telemetry/wire.hpp"

#include "wattsentinel/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace ws::telemetry {

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, std::string_view line, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ParseError("missing field '" + where + key + "'", line.size());
    }
    return *it;
}

std::int64_t read_int(const json& v, const std::string& field, std::string_view line) {
    if (!v.is_number_integer()) {
        throw ParseError("field '" + field + "' must be an integer", line.size());
    }
    return v.get<std::int64_t>();
}

Milli read_decimal(const json& v, const std::string& field, std::string_view line) {
    if (!v.is_number()) {
        throw ParseError("field '" + field + "' must be a number", line.size());
    }
    const double d = v.get<double>();
    const double scaled = d * 1000.0;
    const double rounded = std::round(scaled);
    if (!std::isfinite(d) || std::abs(scaled - rounded) > std::max(1e-6, 1e-12 * std::abs(scaled))) {
        throw ValidationError(field, "more than three fractional digits");
    }
    return Milli{static_cast<std::int64_t>(rounded)};
}

SocketSample read_sample(const json& obj, const std::string& where, bool aggregate, std::string_view line) {
    if (!obj.is_object()) {
        throw ParseError("'" + where + "' must be an object", line.size());
    }
    SocketSample s;
    if (!aggregate) {
        s.socket_id = static_cast<int>(read_int(require(obj, "id", line, where + "."), where + ".id", line));
    }
    s.current_milliamps = read_int(require(obj, "mA", line, where + "."), where + ".mA", line);
    s.voltage = read_decimal(require(obj, "V", line, where + "."), where + ".V", line);
    s.power_factor = read_decimal(require(obj, "pf", line, where + "."), where + ".pf", line);
    return s;
}

void append_sample(std::string& out, const SocketSample& s, bool aggregate) {
    out += '{';
    if (!aggregate) {
        out += "\"id\":";
        out += std::to_string(s.socket_id);
        out += ',';
    }
    out += "\"mA\":";
    out += std::to_string(s.current_milliamps);
    out += ",\"V\":";
    out += format_milli(s.voltage.thousandths);
    out += ",\"pf\":";
    out += format_milli(s.power_factor.thousandths);
    out += '}';
}

} // namespace

ProbeResponse parse_probe(std::string_view line, const ParseOptions& options) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) {
        line.remove_suffix(1);
    }
    json doc;
    try {
        doc = json::parse(line.begin(), line.end());
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
    if (!doc.is_object()) {
        throw ParseError("record must be an object", 0);
    }

    ProbeResponse p;
    const json& pdu = require(doc, "pdu", line, "");
    if (!pdu.is_string()) {
        throw ParseError("field 'pdu' must be a string", line.size());
    }
    p.pdu_id = pdu.get<std::string>();
    p.timestamp_ms = read_int(require(doc, "ts_ms", line, ""), "ts_ms", line);

    const json& sockets = require(doc, "sockets", line, "");
    if (!sockets.is_array()) {
        throw ParseError("field 'sockets' must be an array", line.size());
    }
    p.sockets.reserve(sockets.size());
    for (std::size_t i = 0; i < sockets.size(); ++i) {
        p.sockets.push_back(read_sample(sockets[i], "sockets[" + std::to_string(i) + "]", false, line));
    }
    p.total = read_sample(require(doc, "total", line, ""), "total", true, line);

    validate_probe(p, options.aggregate_tolerance);
    return p;
}

std::string encode_probe(const ProbeResponse& probe, Milliwatts aggregate_tolerance) {
    validate_probe(probe, aggregate_tolerance);

    // pdu ids go through the JSON serializer for escaping.
    std::string out = "{\"pdu\":";
    out += json(probe.pdu_id).dump();
    out += ",\"ts_ms\":";
    out += std::to_string(probe.timestamp_ms);
    out += ",\"sockets\":[";
    for (std::size_t i = 0; i < probe.sockets.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        append_sample(out, probe.sockets[i], false);
    }
    out += "],\"total\":";
    append_sample(out, probe.total, true);
    out += '}';
    return out;
}

} // namespace ws::telemetry
