#include "wattsentinel/service/config.hpp"

#include "wattsentinel/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

namespace ws::service {

using nlohmann::json;

namespace {

std::vector<std::string> split_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find(',', start), text.size());
        std::string item(text.substr(start, end - start));
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) {
            out.push_back(item);
        }
        start = end + 1;
    }
    return out;
}

std::optional<SourceKind> parse_source(std::string_view s) {
    for (auto k : {SourceKind::simulator, SourceKind::trace, SourceKind::hardware}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

void require_file(const std::string& key, const std::string& path) {
    if (!std::filesystem::is_regular_file(path)) {
        throw ValidationError(key, "no such file: " + path);
    }
}

} // namespace

std::string_view to_string(SourceKind k) {
    switch (k) {
    case SourceKind::simulator: return "simulator";
    case SourceKind::trace: return "trace";
    case SourceKind::hardware: return "hardware";
    }
    return "?";
}

json AppConfig::to_json() const {
    return json{
        {"sample_period_ms", sample_period_ms},
        {"theta_w", theta_w},
        {"window_samples", window_samples},
        {"spike_max_duration_s", spike_max_duration_s},
        {"noise_sigma_w", noise_sigma_w},
        {"aggregate_tolerance_w", aggregate_tolerance_w},
        {"critical_ports", critical_ports},
        {"kb_path", kb_path},
        {"topology_path", topology_path},
        {"listen_address", listen_address},
        {"store_path", store_path},
        {"source", to_string(source)},
        {"trace_path", trace_path},
        {"scenario_path", scenario_path},
        {"hardware_endpoint", hardware_endpoint},
        {"seed", seed},
        {"duration_s", duration_s},
        {"calibration_samples", calibration_samples},
        {"live_queue_limit", live_queue_limit},
    };
}

AppConfig AppConfig::from_json(const json& doc) {
    if (!doc.is_object()) {
        throw ValidationError("config", "expected an object");
    }
    json merged = AppConfig{}.to_json();
    for (const auto& [key, value] : doc.items()) {
        auto it = merged.find(key);
        if (it == merged.end()) {
            throw ValidationError(key, "unknown configuration key");
        }
        const bool same_kind = (it->is_number() && value.is_number()) || it->type() == value.type();
        if (!same_kind) {
            throw ValidationError(key, std::string("expected ") + it->type_name());
        }
        *it = value;
    }
    AppConfig c;
    try {
        c.sample_period_ms = merged.at("sample_period_ms").get<std::int64_t>();
        c.theta_w = merged.at("theta_w").get<double>();
        c.window_samples = merged.at("window_samples").get<int>();
        c.spike_max_duration_s = merged.at("spike_max_duration_s").get<double>();
        c.noise_sigma_w = merged.at("noise_sigma_w").get<double>();
        c.aggregate_tolerance_w = merged.at("aggregate_tolerance_w").get<double>();
        c.critical_ports = merged.at("critical_ports").get<std::vector<std::string>>();
        c.kb_path = merged.at("kb_path").get<std::string>();
        c.topology_path = merged.at("topology_path").get<std::string>();
        c.listen_address = merged.at("listen_address").get<std::string>();
        c.store_path = merged.at("store_path").get<std::string>();
        const auto src = merged.at("source").get<std::string>();
        const auto kind = parse_source(src);
        if (!kind) {
            throw ValidationError("source", "expected simulator, trace or hardware, got " + src);
        }
        c.source = *kind;
        c.trace_path = merged.at("trace_path").get<std::string>();
        c.scenario_path = merged.at("scenario_path").get<std::string>();
        c.hardware_endpoint = merged.at("hardware_endpoint").get<std::string>();
        c.seed = merged.at("seed").get<std::uint64_t>();
        c.duration_s = merged.at("duration_s").get<double>();
        c.calibration_samples = merged.at("calibration_samples").get<int>();
        c.live_queue_limit = merged.at("live_queue_limit").get<std::size_t>();
    } catch (const json::exception& e) {
        throw ValidationError("config", e.what());
    }
    return c;
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open config " + path.string(), 0);
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw LoadError(path.string() + ": " + e.what(), 0);
    }
    return from_json(doc);
}

void AppConfig::set(std::string_view key, std::string_view value) {
    json doc = to_json();
    auto it = doc.find(std::string(key));
    if (it == doc.end()) {
        throw ValidationError(std::string(key), "unknown configuration key");
    }
    const std::string text(value);
    if (it->is_array()) {
        *it = split_list(text);
    } else if (it->is_string()) {
        *it = text;
    } else {
        json parsed = json::parse(text, nullptr, false);
        if (parsed.is_discarded() || !parsed.is_number()) {
            throw ValidationError(std::string(key), "expected a number, got '" + text + "'");
        }
        if (it->is_number_integer() && !parsed.is_number_integer()) {
            throw ValidationError(std::string(key), "expected an integer, got '" + text + "'");
        }
        if (it->is_number_unsigned() && parsed.is_number_integer() && parsed.get<std::int64_t>() < 0) {
            throw ValidationError(std::string(key), "must not be negative");
        }
        *it = parsed;
    }
    *this = from_json(doc);
}

void AppConfig::apply_env(const std::function<const char*(const char*)>& lookup) {
    const json keys = to_json();
    for (const auto& [key, _] : keys.items()) {
        std::string name = "WATTSENTINEL_" + key;
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::toupper(c); });
        if (const char* v = lookup(name.c_str()); v != nullptr) {
            set(key, v);
        }
    }
}

void AppConfig::validate() const {
    pipeline_config().validate();
    if (!(noise_sigma_w >= 0.0)) {
        throw ValidationError("noise_sigma_w", "must not be negative");
    }
    if (aggregate_tolerance_w < 0.0) {
        throw ValidationError("aggregate_tolerance_w", "must not be negative");
    }
    if (duration_s < 0.0) {
        throw ValidationError("duration_s", "must not be negative");
    }
    if (live_queue_limit == 0) {
        throw ValidationError("live_queue_limit", "must be positive");
    }
    (void)listen_port();
    require_file("topology_path", topology_path);
    if (!kb_path.empty()) {
        require_file("kb_path", kb_path);
    }
    if (!scenario_path.empty()) {
        require_file("scenario_path", scenario_path);
    }
    if (source == SourceKind::trace) {
        require_file("trace_path", trace_path);
    }
    if (source == SourceKind::hardware && hardware_endpoint.empty()) {
        throw ValidationError("hardware_endpoint", "required for the hardware source");
    }
    if (!store_path.empty()) {
        const auto parent = std::filesystem::absolute(store_path).parent_path();
        if (!std::filesystem::is_directory(parent)) {
            throw ValidationError("store_path", "directory does not exist: " + parent.string());
        }
    }
}

fdi::PipelineConfig AppConfig::pipeline_config() const {
    fdi::PipelineConfig p;
    p.theta_w = theta_w;
    p.window_samples = window_samples;
    p.spike_max_duration_s = spike_max_duration_s;
    p.period_ms = sample_period_ms;
    p.calibration_samples = calibration_samples;
    p.policy.critical_ports = {critical_ports.begin(), critical_ports.end()};
    return p;
}

sim::SimConfig AppConfig::sim_config() const {
    sim::SimConfig s;
    s.tick_s = static_cast<double>(sample_period_ms) / 1000.0;
    s.noise_sigma_w = noise_sigma_w;
    s.seed = seed;
    s.duration_s = duration_s;
    return s;
}

std::string AppConfig::listen_host() const {
    const auto colon = listen_address.rfind(':');
    return colon == std::string::npos ? listen_address : listen_address.substr(0, colon);
}

int AppConfig::listen_port() const {
    const auto colon = listen_address.rfind(':');
    int port = -1;
    if (colon != std::string::npos) {
        const char* first = listen_address.data() + colon + 1;
        const char* last = listen_address.data() + listen_address.size();
        auto [ptr, ec] = std::from_chars(first, last, port);
        if (ec != std::errc{} || ptr != last) {
            port = -1;
        }
    }
    if (port < 0 || port > 65535) {
        throw ValidationError("listen_address", "expected host:port, got '" + listen_address + "'");
    }
    return port;
}

} // namespace ws::service
