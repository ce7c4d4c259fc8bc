#pragma once

#include "wattsentinel/powermodel/model.hpp"
#include "wattsentinel/powermodel/registry.hpp"

#include <filesystem>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

namespace ws::sim {

struct PduSpec {
    std::string id;
    int sockets{8};
};

struct DeviceSpec {
    std::string id;
    powermodel::DeviceClass device_class{powermodel::DeviceClass::switch_};
    std::string pdu_id;
    int socket_id{1};
    int bridge_priority{32768};
    powermodel::DeviceMode mode{powermodel::DeviceMode::operational};
    std::vector<powermodel::PortState> ports;
    powermodel::DevicePowerModel model;
    double e_m_joules{0.0};
    double e_d_joules{0.0};
};

struct LinkSpec {
    std::string a;
    int a_port{0};
    std::string b;
    int b_port{0};
};

/// Devices, their PDU sockets and the links between port-bearing devices.
///
/// JSON layout:
///   {"pdus": [{"id": "pdu1", "sockets": 8}],
///    "devices": [{"id": "sw1", "class": "switch", "pdu": "pdu1", "socket": 1,
///                 "priority": 4096, "mode": "operational",
///                 "ports": 4 | [{"id": 1, "speed": 1000, "up": true, "lpi": false}],
///                 "port_speed": 1000,
///                 "model": {"base_w": 45.0, "port_active_w": {"1000": 0.65}, ...},
///                 "e_m_joules": 0, "e_d_joules": 0}],
///    "links": [{"a": "sw1", "a_port": 1, "b": "sw2", "b_port": 1}]}
struct Topology {
    std::vector<PduSpec> pdus;
    std::vector<DeviceSpec> devices;
    std::vector<LinkSpec> links;

    /// Throws LoadError (unreadable file or bad JSON) or ValidationError.
    static Topology load(const std::filesystem::path& path);
    static Topology from_json(const nlohmann::json& doc);

    /// Throws ValidationError on dangling references, double-bound sockets,
    /// or links that reuse a port.
    void validate() const;

    [[nodiscard]] const DeviceSpec* device(const std::string& id) const;
    [[nodiscard]] const PduSpec* pdu(const std::string& id) const;
    [[nodiscard]] std::vector<std::string> pdu_ids() const;

    /// Registry seeded with the declared models and configuration. STP
    /// roles are left unset: they are not observable from power.
    [[nodiscard]] powermodel::ModelRegistry registry() const;
};

} // namespace ws::sim
