#include "wattsentinel/service/commands.hpp"

#include "wattsentinel/errors.hpp"
#include "wattsentinel/fdi/pipeline.hpp"
#include "wattsentinel/fdi/report.hpp"
#include "wattsentinel/service/api_server.hpp"
#include "wattsentinel/service/runtime.hpp"
#include "wattsentinel/sim/script.hpp"
#include "wattsentinel/sim/simulator.hpp"
#include "wattsentinel/telemetry/source.hpp"
#include "wattsentinel/telemetry/wire.hpp"

#include <CLI11.hpp>
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <limits>
#include <ostream>
#include <thread>

namespace ws::service {

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f || !(f << content) || !f.flush()) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

template <typename F>
int guarded(std::ostream& err, F f) {
    try {
        return f();
    } catch (const LoadError& e) {
        err << "error: " << e.what() << '\n';
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
    } catch (const ContractError& e) {
        err << "error: " << e.what() << '\n';
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

} // namespace

AppConfig load_config(const std::optional<std::string>& path) {
    AppConfig c = path ? AppConfig::load(*path) : AppConfig{};
    c.apply_env([](const char* name) { return std::getenv(name); });
    return c;
}

OfflineRun run_offline(const std::vector<telemetry::ProbeResponse>& probes, const sim::Topology& topology,
                       const AppConfig& config, store::HistoryStore& store) {
    auto registry = topology.registry();
    auto kb = config.kb_path.empty() ? fdi::KnowledgeBase::defaults() : fdi::KnowledgeBase::load(config.kb_path);
    fdi::Pipeline pipeline(registry, kb, &store, config.pipeline_config(), lifecycle_accounts(topology));
    OfflineRun run;
    std::map<std::uint64_t, std::string> classes;
    for (const auto& probe : probes) {
        for (const auto& o : pipeline.process(probe)) {
            if (const auto* ev = std::get_if<fdi::DetectionEvent>(&o)) {
                ++run.detections[fdi::report_class(*ev)];
            } else if (const auto* r = std::get_if<fdi::IsolationResult>(&o)) {
                ++run.verdicts[std::string(fdi::to_string(r->verdict))];
            } else if (std::holds_alternative<fdi::CorrectionRecord>(o)) {
                ++run.corrections;
            } else {
                run.warnings.push_back(std::get<fdi::Warning>(o).message);
            }
        }
    }
    run.report_csv = store.export_report(std::numeric_limits<TimestampMs>::min(),
                                         std::numeric_limits<TimestampMs>::max());
    return run;
}

void print_summary(std::ostream& out, const OfflineRun& run) {
    int total = 0;
    for (const auto& [_, n] : run.detections) {
        total += n;
    }
    out << fmt::format("events: {}\n", total);
    for (const auto& [cls, n] : run.detections) {
        out << fmt::format("  {:<16} {}\n", cls, n);
    }
    for (const auto& [verdict, n] : run.verdicts) {
        out << fmt::format("verdict {:<20} {}\n", verdict, n);
    }
    out << fmt::format("corrections: {}\n", run.corrections);
    for (const auto& w : run.warnings) {
        out << "warning: " << w << '\n';
    }
}

namespace {

struct Common {
    std::optional<std::string> config;
    std::vector<std::string> sets;
};

AppConfig resolve(const Common& c) {
    AppConfig cfg = load_config(c.config);
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ValidationError("--set", "expected key=value, got '" + kv + "'");
        }
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON configuration file");
    cmd->add_option("--set", c.sets, "Override a configuration key (key=value)");
}

int simulate(const Common& common, const std::string& topology_path, const std::optional<std::string>& scenario,
             double duration, std::uint64_t seed, const std::string& out_dir, std::ostream& out) {
    AppConfig cfg = resolve(common);
    cfg.topology_path = topology_path;
    cfg.duration_s = duration;
    cfg.seed = seed;
    cfg.validate();
    const auto topology = sim::Topology::load(topology_path);
    topology.validate();
    sim::FaultScript script;
    if (scenario) {
        script = sim::load_script_file(*scenario, topology);
    }
    const auto probes = sim::simulate_all(topology, script, cfg.sim_config());

    std::filesystem::create_directories(out_dir);
    const auto tol = Milliwatts::from_watts(cfg.aggregate_tolerance_w);
    std::string trace;
    for (const auto& p : probes) {
        trace += telemetry::encode_probe(p, tol);
        trace += '\n';
    }
    write_file(std::filesystem::path(out_dir) / "trace.ptrace", trace);

    store::HistoryStore store;
    const auto run = run_offline(probes, topology, cfg, store);
    write_file(std::filesystem::path(out_dir) / "report.csv", run.report_csv);
    print_summary(out, run);
    return 0;
}

int replay(const Common& common, const std::string& trace_path, const std::string& topology_path,
           const std::optional<std::string>& out_path, std::ostream& out, std::ostream& err) {
    AppConfig cfg = resolve(common);
    cfg.topology_path = topology_path;
    cfg.validate();
    const auto topology = sim::Topology::load(topology_path);
    topology.validate();
    telemetry::TraceSource source(trace_path,
                                  telemetry::ParseOptions{Milliwatts::from_watts(cfg.aggregate_tolerance_w)});
    if (const auto& t = source.truncation()) {
        err << fmt::format("warning: trace truncated at line {}, byte {}: {}\n", t->line, t->offset, t->message);
    }
    store::HistoryStore store;
    const auto run = run_offline(source.records(), topology, cfg, store);
    if (out_path) {
        write_file(*out_path, run.report_csv);
        print_summary(out, run);
    } else {
        out << run.report_csv;
        print_summary(err, run);
    }
    return 0;
}

int monitor(const Common& common, const std::optional<std::string>& listen, std::ostream& out) {
    AppConfig cfg = resolve(common);
    if (listen) {
        cfg.listen_address = *listen;
    }
    Runtime runtime(cfg);
    ApiServer api(runtime);
    const int port = api.bind(cfg.listen_host(), cfg.listen_port());
    g_stop = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    runtime.start();
    api.start();
    out << fmt::format("monitoring {} PDUs from the {} source, API on {}:{}\n", runtime.topology().pdus.size(),
                       to_string(cfg.source), cfg.listen_host(), port)
        << std::flush;
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    runtime.stop();
    api.stop();
    out << "stopped; history flushed\n";
    return 0;
}

int report(const Common& common, const std::optional<std::string>& store_path, std::optional<TimestampMs> from,
           std::optional<TimestampMs> to, std::ostream& out) {
    AppConfig cfg = resolve(common);
    const std::string path = store_path ? *store_path : cfg.store_path;
    if (path.empty()) {
        throw ValidationError("store_path", "report needs a history journal (--store or store_path)");
    }
    if (!std::filesystem::is_regular_file(path)) {
        throw ValidationError("store_path", "no such file: " + path);
    }
    store::HistoryStore store(store::StoreOptions{path, 0});
    out << store.export_report(from.value_or(std::numeric_limits<TimestampMs>::min()),
                               to.value_or(std::numeric_limits<TimestampMs>::max()));
    return 0;
}

} // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Power-telemetry fault detection and isolation for network devices", "wattsentinel"};
    app.require_subcommand(1);

    Common common;

    auto* sim_cmd = app.add_subcommand("simulate", "Simulate a scenario, then detect and report");
    add_common(sim_cmd, common);
    std::string topology = "scenarios/topology.json";
    std::optional<std::string> scenario;
    double duration = 600.0;
    std::uint64_t seed = 1;
    std::string out_dir;
    sim_cmd->add_option("--topology", topology, "Topology JSON")->capture_default_str();
    sim_cmd->add_option("--scenario", scenario, "Scenario script");
    sim_cmd->add_option("--duration", duration, "Simulated seconds")->capture_default_str()->check(CLI::NonNegativeNumber);
    sim_cmd->add_option("--seed", seed, "Noise seed")->capture_default_str();
    sim_cmd->add_option("--out", out_dir, "Output directory for trace.ptrace and report.csv")->required();

    auto* replay_cmd = app.add_subcommand("replay", "Detect over a recorded .ptrace");
    add_common(replay_cmd, common);
    std::string trace;
    std::optional<std::string> replay_out;
    replay_cmd->add_option("--trace", trace, "Trace file")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--topology", topology, "Topology JSON")->capture_default_str();
    replay_cmd->add_option("--out", replay_out, "Write the CSV report here instead of standard output");

    auto* monitor_cmd = app.add_subcommand("monitor", "Poll, detect and serve the HTTP API until interrupted");
    add_common(monitor_cmd, common);
    std::optional<std::string> listen;
    monitor_cmd->add_option("--listen", listen, "host:port, overrides listen_address");

    auto* report_cmd = app.add_subcommand("report", "Export the CSV report from a history journal");
    add_common(report_cmd, common);
    std::optional<std::string> store_path;
    std::optional<TimestampMs> from;
    std::optional<TimestampMs> to;
    report_cmd->add_option("--store", store_path, "History journal, overrides store_path");
    report_cmd->add_option("--from", from, "Start, ms since the epoch");
    report_cmd->add_option("--to", to, "End, ms since the epoch");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    return guarded(err, [&] {
        if (*sim_cmd) {
            return simulate(common, topology, scenario, duration, seed, out_dir, out);
        }
        if (*replay_cmd) {
            return replay(common, trace, topology, replay_out, out, err);
        }
        if (*monitor_cmd) {
            return monitor(common, listen, out);
        }
        return report(common, store_path, from, to, out);
    });
}

} // namespace ws::service
