#pragma once

#include "wattsentinel/service/config.hpp"
#include "wattsentinel/sim/topology.hpp"
#include "wattsentinel/store/history_store.hpp"
#include "wattsentinel/telemetry/probe.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ws::service {

/// Result of running the pipeline over a finished probe sequence.
struct OfflineRun {
    std::string report_csv;
    /// Detections per report class.
    std::map<std::string, int> detections;
    /// Isolations per verdict.
    std::map<std::string, int> verdicts;
    int corrections{0};
    std::vector<std::string> warnings;
};

/// Runs the detection pipeline over `probes` in order, with histories kept
/// in `store`, and exports the full report.
OfflineRun run_offline(const std::vector<telemetry::ProbeResponse>& probes, const sim::Topology& topology,
                       const AppConfig& config, store::HistoryStore& store);

/// Defaults, then the file (when given), then WATTSENTINEL_* variables.
AppConfig load_config(const std::optional<std::string>& path);

/// Human summary: detections by class, verdict counts, corrections.
void print_summary(std::ostream& out, const OfflineRun& run);

/// Parses the command line and runs a subcommand. Returns the exit status:
/// 0 success, 1 runtime failure, 2 invalid input (config, topology,
/// scenario, trace or arguments).
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

} // namespace ws::service
