#pragma once

#include "wattsentinel/sim/topology.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ws::sim {

enum class ActionKind {
    sleep,
    wake,
    power_off,
    power_on,
    port_down,
    port_up,
    set_speed,
    lpi_enter,
    lpi_exit,
    link_fail,
    set_priority,
};

std::string_view to_string(ActionKind k);
std::optional<ActionKind> parse_action_kind(std::string_view s);
bool needs_port(ActionKind k);

struct ScriptAction {
    double at_s{0.0};
    ActionKind kind{ActionKind::sleep};
    std::string device;
    std::optional<int> port;
    /// Speed for set_speed, priority for set_priority.
    std::optional<int> arg;
    /// 1-based source line, 0 when not from a file.
    std::size_t line{0};

    bool operator==(const ScriptAction&) const = default;
};

/// Scripted fault injections, ordered by time.
struct FaultScript {
    std::vector<ScriptAction> actions;
};

/// Parses `<at_s> <action> <device> [<port>] [<arg>]` lines; `#` starts a
/// comment. Every action is dry-run against the topology so that unknown
/// targets, time regressions and impossible transitions (anything but
/// power_on on a device that is off) fail here. Throws LoadError with the
/// line number.
FaultScript load_script(std::string_view text, const Topology& topology);
FaultScript load_script_file(const std::filesystem::path& path, const Topology& topology);

/// One action without a time, e.g. "port_down sw1 3". Throws LoadError.
ScriptAction parse_action(std::string_view text, double at_s = 0.0);

std::string format_action(const ScriptAction& action);

} // namespace ws::sim
