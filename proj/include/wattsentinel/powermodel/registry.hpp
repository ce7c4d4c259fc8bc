#pragma once

#include "wattsentinel/powermodel/model.hpp"

#include <compare>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace ws::powermodel {

struct SocketRef {
    std::string pdu_id;
    int socket_id{0};

    auto operator<=>(const SocketRef&) const = default;
    [[nodiscard]] std::string str() const { return pdu_id + "/" + std::to_string(socket_id); }
};

struct DeviceEntry {
    DevicePowerModel model;
    DeviceStateSnapshot snapshot;
    /// Level shift left behind by an unexplained change; added to the
    /// expectation so detection continues from the new level.
    Milliwatts unexplained_offset{0};

    bool operator==(const DeviceEntry&) const = default;
};

/// Models and inferred state per device, plus socket bindings. Readers get
/// copies; writers replace whole entries.
class ModelRegistry {
public:
    ModelRegistry() = default;
    ModelRegistry(const ModelRegistry& other);
    ModelRegistry& operator=(const ModelRegistry& other);

    /// Throws ValidationError when model or snapshot is invalid, or the id is taken.
    void add_device(DevicePowerModel model, DeviceStateSnapshot snapshot);

    /// Throws ValidationError if the socket or the device is already bound,
    /// or the device is unknown.
    void bind(const SocketRef& socket, const std::string& device_id);

    [[nodiscard]] std::optional<DeviceEntry> device(const std::string& device_id) const;
    [[nodiscard]] std::optional<std::string> device_at(const SocketRef& socket) const;
    [[nodiscard]] std::optional<SocketRef> socket_of(const std::string& device_id) const;
    [[nodiscard]] std::vector<std::string> device_ids() const;
    [[nodiscard]] std::map<SocketRef, std::string> bindings() const;

    /// Throws ContractError for an unknown device.
    void replace(const std::string& device_id, DeviceEntry entry);

    /// Expected power at a socket: 0 for unbound sockets.
    [[nodiscard]] Milliwatts expected_at(const SocketRef& socket) const;

private:
    mutable std::shared_mutex mutex_;
    std::map<std::string, DeviceEntry> devices_;
    std::map<SocketRef, std::string> bindings_;
    std::map<std::string, SocketRef> reverse_;
};

} // namespace ws::powermodel
