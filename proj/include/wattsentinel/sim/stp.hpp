#pragma once

#include "wattsentinel/powermodel/model.hpp"

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ws::sim {

struct StpBridge {
    std::string id;
    int priority{32768};
};

/// A link counts for the tree only when `active` (both ends up).
struct StpLink {
    std::string a;
    int a_port{0};
    std::string b;
    int b_port{0};
    bool active{true};
};

using PortKey = std::pair<std::string, int>;

struct StpResult {
    /// Elected root per bridge.
    std::map<std::string, std::string> root_of;
    /// Role of every port that sits on an active link.
    std::map<PortKey, powermodel::StpRole> roles;

    bool operator==(const StpResult&) const = default;

    /// Links whose two ends both forward.
    [[nodiscard]] std::size_t forwarding_links(std::span<const StpLink> links) const;
};

/// Elects a root per connected component (lowest priority, then id) and
/// assigns root / designated / blocking roles by hop distance, breaking ties
/// on peer priority, peer id, then port id.
StpResult stp_converge(std::span<const StpBridge> bridges, std::span<const StpLink> links);

} // namespace ws::sim
