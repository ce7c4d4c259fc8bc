#include "wattsentinel/sim/script.hpp"

#include "wattsentinel/errors.hpp"
#include "wattsentinel/sim/simulator.hpp"

#include <array>
#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

namespace ws::sim {

namespace {

constexpr std::array<std::pair<ActionKind, std::string_view>, 11> kActions{{
    {ActionKind::sleep, "sleep"},
    {ActionKind::wake, "wake"},
    {ActionKind::power_off, "power_off"},
    {ActionKind::power_on, "power_on"},
    {ActionKind::port_down, "port_down"},
    {ActionKind::port_up, "port_up"},
    {ActionKind::set_speed, "set_speed"},
    {ActionKind::lpi_enter, "lpi_enter"},
    {ActionKind::lpi_exit, "lpi_exit"},
    {ActionKind::link_fail, "link_fail"},
    {ActionKind::set_priority, "set_priority"},
}};

std::vector<std::string> tokens(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream in{std::string(line)};
    std::string t;
    while (in >> t) {
        out.push_back(t);
    }
    return out;
}

int parse_int(const std::string& s, const char* what, std::size_t line) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw LoadError(fmt::format("{} '{}' is not an integer", what, s), line);
    }
    return v;
}

/// tokens after the time: action device [port] [arg]
ScriptAction from_tokens(const std::vector<std::string>& t, std::size_t first, double at_s, std::size_t line) {
    if (t.size() < first + 2) {
        throw LoadError("expected '<action> <device>'", line);
    }
    const auto kind = parse_action_kind(t[first]);
    if (!kind) {
        throw LoadError("unknown action '" + t[first] + "'", line);
    }
    ScriptAction a;
    a.at_s = at_s;
    a.kind = *kind;
    a.device = t[first + 1];
    a.line = line;
    const std::size_t rest = t.size() - first - 2;
    std::size_t want = 0;
    switch (a.kind) {
    case ActionKind::set_speed: want = 2; break;
    case ActionKind::set_priority: want = 1; break;
    default: want = needs_port(a.kind) ? 1 : 0; break;
    }
    if (rest != want) {
        throw LoadError(fmt::format("{} takes {} argument(s) after the device, got {}", t[first], want, rest), line);
    }
    if (a.kind == ActionKind::set_priority) {
        a.arg = parse_int(t[first + 2], "priority", line);
    } else if (want >= 1) {
        a.port = parse_int(t[first + 2], "port", line);
        if (want == 2) {
            a.arg = parse_int(t[first + 3], "speed", line);
        }
    }
    return a;
}

} // namespace

std::string_view to_string(ActionKind k) {
    for (const auto& [kind, name] : kActions) {
        if (kind == k) {
            return name;
        }
    }
    return "?";
}

std::optional<ActionKind> parse_action_kind(std::string_view s) {
    for (const auto& [kind, name] : kActions) {
        if (name == s) {
            return kind;
        }
    }
    return std::nullopt;
}

bool needs_port(ActionKind k) {
    switch (k) {
    case ActionKind::port_down:
    case ActionKind::port_up:
    case ActionKind::set_speed:
    case ActionKind::lpi_enter:
    case ActionKind::lpi_exit:
    case ActionKind::link_fail:
        return true;
    default:
        return false;
    }
}

ScriptAction parse_action(std::string_view text, double at_s) {
    return from_tokens(tokens(text.substr(0, text.find('#'))), 0, at_s, 0);
}

std::string format_action(const ScriptAction& a) {
    std::string s = fmt::format("{} {}", to_string(a.kind), a.device);
    if (a.port) {
        s += fmt::format(" {}", *a.port);
    }
    if (a.arg) {
        s += fmt::format(" {}", *a.arg);
    }
    return s;
}

FaultScript load_script(std::string_view text, const Topology& topology) {
    FaultScript script;
    NetworkState dry = NetworkState::from_topology(topology);
    double last = 0.0;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        line = line.substr(0, line.find('#'));
        const auto t = tokens(line);
        if (t.empty()) {
            if (end == text.size()) {
                break;
            }
            continue;
        }
        double at = 0.0;
        try {
            std::size_t used = 0;
            at = std::stod(t[0], &used);
            if (used != t[0].size()) {
                throw std::invalid_argument("trailing");
            }
        } catch (const std::exception&) {
            throw LoadError("time '" + t[0] + "' is not a number", line_no);
        }
        if (at < 0.0) {
            throw LoadError("negative time", line_no);
        }
        if (at < last) {
            throw LoadError(fmt::format("time {} goes back before {}", t[0], last), line_no);
        }
        last = at;
        ScriptAction a = from_tokens(t, 1, at, line_no);
        try {
            apply_action(dry, a);
        } catch (const ContractError& e) {
            throw LoadError(e.what(), line_no);
        }
        script.actions.push_back(std::move(a));
        if (end == text.size()) {
            break;
        }
    }
    return script;
}

FaultScript load_script_file(const std::filesystem::path& path, const Topology& topology) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open scenario " + path.string(), 0);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return load_script(buf.str(), topology);
}

} // namespace ws::sim
