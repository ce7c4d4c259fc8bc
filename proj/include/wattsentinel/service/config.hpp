#pragma once

#include "wattsentinel/fdi/pipeline.hpp"
#include "wattsentinel/sim/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

namespace ws::service {

enum class SourceKind { simulator, trace, hardware };

/// Service configuration. Every key has a default; a JSON file, then
/// WATTSENTINEL_<KEY> environment variables, then command-line flags
/// override it in that order.
struct AppConfig {
    std::int64_t sample_period_ms{1000};
    double theta_w{0.1};
    int window_samples{10};
    double spike_max_duration_s{5.0};
    double noise_sigma_w{0.02};
    /// 0 for simulated sources; real PDUs round each socket independently.
    double aggregate_tolerance_w{0.0};
    /// "device" or "device:port"
    std::vector<std::string> critical_ports;
    /// Empty uses the built-in signatures.
    std::string kb_path;
    std::string topology_path{"scenarios/topology.json"};
    std::string listen_address{"127.0.0.1:8080"};
    /// Empty keeps history in memory only.
    std::string store_path;
    SourceKind source{SourceKind::simulator};
    std::string trace_path;
    std::string scenario_path;
    std::string hardware_endpoint;
    std::uint64_t seed{1};
    /// Simulated run length; 0 runs until shutdown.
    double duration_s{0.0};
    int calibration_samples{60};
    /// Messages buffered per live-stream client before it is dropped.
    std::size_t live_queue_limit{512};

    static AppConfig from_json(const nlohmann::json& doc);
    /// Throws LoadError when the file is unreadable or not JSON.
    static AppConfig load(const std::filesystem::path& path);
    [[nodiscard]] nlohmann::json to_json() const;

    /// Overrides one key from its text form (lists are comma separated).
    /// Throws ValidationError for unknown keys or unparsable values.
    void set(std::string_view key, std::string_view value);
    /// Applies WATTSENTINEL_<KEY> overrides found through `lookup`.
    void apply_env(const std::function<const char*(const char*)>& lookup);

    /// Thresholds positive, listen address well formed, referenced files present.
    void validate() const;

    [[nodiscard]] fdi::PipelineConfig pipeline_config() const;
    [[nodiscard]] sim::SimConfig sim_config() const;
    [[nodiscard]] std::string listen_host() const;
    [[nodiscard]] int listen_port() const;
};

std::string_view to_string(SourceKind k);

} // namespace ws::service
