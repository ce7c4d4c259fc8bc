#include "wattsentinel/sim/topology.hpp"

#include "wattsentinel/errors.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

namespace ws::sim {

using nlohmann::json;
using powermodel::DeviceClass;
using powermodel::DevicePowerModel;

namespace {

Milliwatts watts_field(const json& j, const char* key, Milliwatts fallback) {
    auto it = j.find(key);
    if (it == j.end()) {
        return fallback;
    }
    if (!it->is_number()) {
        throw ValidationError(key, "expected a number");
    }
    return Milliwatts::from_watts(it->get<double>());
}

DevicePowerModel model_from(const json& j, DeviceClass cls) {
    DevicePowerModel m = DevicePowerModel::defaults(cls);
    if (j.is_null()) {
        return m;
    }
    m.base = watts_field(j, "base_w", m.base);
    m.wake_burst = Milliwatts{m.base.value * 6 / 10};
    m.sleep = watts_field(j, "sleep_w", m.sleep);
    m.off = watts_field(j, "off_w", m.off);
    m.lpi_saving = watts_field(j, "lpi_saving_w", m.lpi_saving);
    m.stp_spike = watts_field(j, "stp_spike_w", m.stp_spike);
    m.wake_burst = watts_field(j, "wake_burst_w", m.wake_burst);
    m.wake_burst_s = j.value("wake_burst_s", m.wake_burst_s);
    if (auto it = j.find("port_active_w"); it != j.end()) {
        for (const auto& [speed, w] : it->items()) {
            m.port_active[std::stoi(speed)] = Milliwatts::from_watts(w.get<double>());
        }
    }
    return m;
}

std::vector<powermodel::PortState> ports_from(const json& d) {
    std::vector<powermodel::PortState> ports;
    auto it = d.find("ports");
    if (it == d.end()) {
        return ports;
    }
    const int default_speed = d.value("port_speed", 1000);
    if (it->is_number_integer()) {
        for (int i = 1; i <= it->get<int>(); ++i) {
            ports.push_back(powermodel::PortState{i, true, true, default_speed, false, powermodel::StpRole::none});
        }
        return ports;
    }
    for (const auto& p : *it) {
        powermodel::PortState port;
        port.port_id = p.at("id").get<int>();
        port.speed_mbps = p.value("speed", default_speed);
        port.admin_up = p.value("up", true);
        port.oper_up = port.admin_up;
        port.lpi_active = p.value("lpi", false);
        ports.push_back(port);
    }
    return ports;
}

} // namespace

Topology Topology::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open topology " + path.string(), 0);
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw LoadError(path.string() + ": " + e.what(), 0);
    }
    return from_json(doc);
}

Topology Topology::from_json(const json& doc) {
    Topology t;
    try {
        for (const auto& p : doc.at("pdus")) {
            t.pdus.push_back(PduSpec{p.at("id").get<std::string>(), p.value("sockets", 8)});
        }
        for (const auto& d : doc.at("devices")) {
            DeviceSpec spec;
            spec.id = d.at("id").get<std::string>();
            const auto cls = powermodel::parse_device_class(d.at("class").get<std::string>());
            if (!cls) {
                throw ValidationError(spec.id + ".class", "unknown device class " + d.at("class").get<std::string>());
            }
            spec.device_class = *cls;
            spec.pdu_id = d.at("pdu").get<std::string>();
            spec.socket_id = d.at("socket").get<int>();
            spec.bridge_priority = d.value("priority", 32768);
            const auto mode = powermodel::parse_device_mode(d.value("mode", std::string("operational")));
            if (!mode) {
                throw ValidationError(spec.id + ".mode", "unknown mode");
            }
            spec.mode = *mode;
            spec.ports = ports_from(d);
            if (spec.mode == powermodel::DeviceMode::off) {
                for (auto& p : spec.ports) {
                    p.oper_up = false;
                    p.lpi_active = false;
                }
            }
            spec.model = model_from(d.contains("model") ? d.at("model") : json(), *cls);
            spec.e_m_joules = d.value("e_m_joules", 0.0);
            spec.e_d_joules = d.value("e_d_joules", 0.0);
            t.devices.push_back(std::move(spec));
        }
        if (doc.contains("links")) {
            for (const auto& l : doc.at("links")) {
                t.links.push_back(LinkSpec{l.at("a").get<std::string>(), l.at("a_port").get<int>(),
                                           l.at("b").get<std::string>(), l.at("b_port").get<int>()});
            }
        }
    } catch (const json::exception& e) {
        throw ValidationError("topology", e.what());
    }
    t.validate();
    return t;
}

void Topology::validate() const {
    std::set<std::string> pdu_ids;
    for (const auto& p : pdus) {
        if (p.id.empty() || !pdu_ids.insert(p.id).second) {
            throw ValidationError("pdus", "empty or duplicate PDU id '" + p.id + "'");
        }
        if (p.sockets < 1) {
            throw ValidationError("pdus." + p.id + ".sockets", "must be at least 1");
        }
    }
    std::set<std::string> ids;
    std::set<std::pair<std::string, int>> sockets;
    for (const auto& d : devices) {
        if (d.id.empty() || !ids.insert(d.id).second) {
            throw ValidationError("devices", "empty or duplicate device id '" + d.id + "'");
        }
        const PduSpec* p = pdu(d.pdu_id);
        if (p == nullptr) {
            throw ValidationError(d.id + ".pdu", "unknown PDU " + d.pdu_id);
        }
        if (d.socket_id < 1 || d.socket_id > p->sockets) {
            throw ValidationError(d.id + ".socket", "outside 1.." + std::to_string(p->sockets));
        }
        if (!sockets.insert({d.pdu_id, d.socket_id}).second) {
            throw ValidationError(d.id + ".socket", "socket already used");
        }
        if (d.model.device_class != d.device_class) {
            throw ValidationError(d.id + ".model", "class mismatch");
        }
        d.model.validate();
        powermodel::DeviceStateSnapshot{d.id, d.device_class, d.mode, d.ports, 0}.validate();
    }
    std::set<std::pair<std::string, int>> used;
    for (const auto& l : links) {
        for (const auto& [dev, port] : {std::pair{l.a, l.a_port}, std::pair{l.b, l.b_port}}) {
            const DeviceSpec* d = device(dev);
            if (d == nullptr) {
                throw ValidationError("links", "unknown device " + dev);
            }
            const bool has_port = std::any_of(d->ports.begin(), d->ports.end(),
                                              [p = port](const powermodel::PortState& s) { return s.port_id == p; });
            if (!has_port) {
                throw ValidationError("links", dev + " has no port " + std::to_string(port));
            }
            if (!used.insert({dev, port}).second) {
                throw ValidationError("links", dev + " port " + std::to_string(port) + " is linked twice");
            }
        }
        if (l.a == l.b) {
            throw ValidationError("links", "self link on " + l.a);
        }
    }
}

const DeviceSpec* Topology::device(const std::string& id) const {
    for (const auto& d : devices) {
        if (d.id == id) {
            return &d;
        }
    }
    return nullptr;
}

const PduSpec* Topology::pdu(const std::string& id) const {
    for (const auto& p : pdus) {
        if (p.id == id) {
            return &p;
        }
    }
    return nullptr;
}

std::vector<std::string> Topology::pdu_ids() const {
    std::vector<std::string> out;
    for (const auto& p : pdus) {
        out.push_back(p.id);
    }
    return out;
}

powermodel::ModelRegistry Topology::registry() const {
    powermodel::ModelRegistry r;
    for (const auto& d : devices) {
        r.add_device(d.model, powermodel::DeviceStateSnapshot{d.id, d.device_class, d.mode, d.ports, 0});
        r.bind(powermodel::SocketRef{d.pdu_id, d.socket_id}, d.id);
    }
    return r;
}

} // namespace ws::sim
