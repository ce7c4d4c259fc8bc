#pragma once

#include "wattsentinel/fdi/pipeline.hpp"
#include "wattsentinel/sim/script.hpp"
#include "wattsentinel/sim/simulator.hpp"
#include "wattsentinel/sim/topology.hpp"

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace ws::test {

inline std::filesystem::path scenario_dir() { return WS_SCENARIO_DIR; }

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("wattsentinel_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline sim::Topology default_topology() { return sim::Topology::load(scenario_dir() / "topology.json"); }

struct RunResult {
    std::vector<fdi::DetectionEvent> detections;
    std::vector<fdi::IsolationResult> isolations;
    std::vector<fdi::CorrectionRecord> corrections;
    std::vector<fdi::Warning> warnings;
    std::vector<telemetry::ProbeResponse> probes;
    sim::SimConfig sim;
};

/// Simulates `script_text` on the default topology and runs the pipeline
/// over the probes.
inline RunResult run_script(const std::string& script_text, double duration_s, std::uint64_t seed = 1,
                            fdi::PipelineConfig pc = {}, double sigma = 0.02) {
    const auto topo = default_topology();
    const auto script = sim::load_script(script_text, topo);
    RunResult r;
    r.sim.duration_s = duration_s;
    r.sim.seed = seed;
    r.sim.noise_sigma_w = sigma;
    r.probes = sim::simulate_all(topo, script, r.sim);
    auto registry = topo.registry();
    auto kb = fdi::KnowledgeBase::defaults();
    fdi::Pipeline pipeline(registry, kb, nullptr, pc);
    for (const auto& p : r.probes) {
        for (auto& o : pipeline.process(p)) {
            std::visit(
                [&](auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, fdi::DetectionEvent>) {
                        r.detections.push_back(v);
                    } else if constexpr (std::is_same_v<T, fdi::IsolationResult>) {
                        r.isolations.push_back(v);
                    } else if constexpr (std::is_same_v<T, fdi::CorrectionRecord>) {
                        r.corrections.push_back(v);
                    } else {
                        r.warnings.push_back(v);
                    }
                },
                o);
        }
    }
    return r;
}

inline TimestampMs at(const sim::SimConfig& c, double seconds) {
    return c.start_ms + static_cast<TimestampMs>(seconds * 1000.0);
}

} // namespace ws::test
