#include "wattsentinel/powermodel/registry.hpp"

#include "wattsentinel/errors.hpp"

#include <mutex>

namespace ws::powermodel {

ModelRegistry::ModelRegistry(const ModelRegistry& other) {
    std::shared_lock lock(other.mutex_);
    devices_ = other.devices_;
    bindings_ = other.bindings_;
    reverse_ = other.reverse_;
}

ModelRegistry& ModelRegistry::operator=(const ModelRegistry& other) {
    if (this != &other) {
        ModelRegistry copy(other);
        std::unique_lock lock(mutex_);
        devices_ = std::move(copy.devices_);
        bindings_ = std::move(copy.bindings_);
        reverse_ = std::move(copy.reverse_);
    }
    return *this;
}

void ModelRegistry::add_device(DevicePowerModel model, DeviceStateSnapshot snapshot) {
    model.validate();
    snapshot.validate();
    if (model.device_class != snapshot.device_class) {
        throw ValidationError(snapshot.device_id + ".class", "model class does not match device class");
    }
    std::unique_lock lock(mutex_);
    const std::string id = snapshot.device_id;
    if (!devices_.emplace(id, DeviceEntry{std::move(model), std::move(snapshot), Milliwatts{0}}).second) {
        throw ValidationError(id, "device registered twice");
    }
}

void ModelRegistry::bind(const SocketRef& socket, const std::string& device_id) {
    std::unique_lock lock(mutex_);
    if (devices_.find(device_id) == devices_.end()) {
        throw ValidationError(device_id, "cannot bind unknown device");
    }
    if (bindings_.count(socket) != 0) {
        throw ValidationError(socket.str(), "socket already bound to " + bindings_.at(socket));
    }
    if (reverse_.count(device_id) != 0) {
        throw ValidationError(device_id, "device already bound to " + reverse_.at(device_id).str());
    }
    bindings_.emplace(socket, device_id);
    reverse_.emplace(device_id, socket);
}

std::optional<DeviceEntry> ModelRegistry::device(const std::string& device_id) const {
    std::shared_lock lock(mutex_);
    auto it = devices_.find(device_id);
    if (it == devices_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<std::string> ModelRegistry::device_at(const SocketRef& socket) const {
    std::shared_lock lock(mutex_);
    auto it = bindings_.find(socket);
    if (it == bindings_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<SocketRef> ModelRegistry::socket_of(const std::string& device_id) const {
    std::shared_lock lock(mutex_);
    auto it = reverse_.find(device_id);
    if (it == reverse_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<std::string> ModelRegistry::device_ids() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    out.reserve(devices_.size());
    for (const auto& [id, _] : devices_) {
        out.push_back(id);
    }
    return out;
}

std::map<SocketRef, std::string> ModelRegistry::bindings() const {
    std::shared_lock lock(mutex_);
    return bindings_;
}

void ModelRegistry::replace(const std::string& device_id, DeviceEntry entry) {
    std::unique_lock lock(mutex_);
    auto it = devices_.find(device_id);
    if (it == devices_.end()) {
        throw ContractError("replace: unknown device " + device_id);
    }
    it->second = std::move(entry);
}

Milliwatts ModelRegistry::expected_at(const SocketRef& socket) const {
    std::shared_lock lock(mutex_);
    auto b = bindings_.find(socket);
    if (b == bindings_.end()) {
        return Milliwatts{0};
    }
    const DeviceEntry& e = devices_.at(b->second);
    return expected_power(e.model, e.snapshot) + e.unexplained_offset;
}

} // namespace ws::powermodel
