#include "../support.hpp"

#include "wattsentinel/errors.hpp"
#include "wattsentinel/service/api_server.hpp"
#include "wattsentinel/service/commands.hpp"
#include "wattsentinel/service/config.hpp"
#include "wattsentinel/service/runtime.hpp"
#include "wattsentinel/telemetry/wire.hpp"

#include <cstdlib>
#include <doctest.h>
#include <fstream>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

using namespace ws;
using namespace ws::service;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Cli {
    int rc{0};
    std::string out;
    std::string err;
};

Cli cli(std::vector<std::string> args) {
    args.insert(args.begin(), "wattsentinel");
    std::vector<char*> argv;
    for (auto& a : args) {
        argv.push_back(a.data());
    }
    std::ostringstream out;
    std::ostringstream err;
    Cli r;
    r.rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

AppConfig live_config() {
    AppConfig c;
    c.topology_path = (test::scenario_dir() / "topology.json").string();
    c.sample_period_ms = 200;
    c.calibration_samples = 10;
    c.listen_address = "127.0.0.1:0";
    return c;
}

template <class Pred>
bool wait_for(Pred pred, std::chrono::seconds limit) {
    const auto until = std::chrono::steady_clock::now() + limit;
    while (std::chrono::steady_clock::now() < until) {
        if (pred()) {
            return true;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    return false;
}

} // namespace

TEST_SUITE("service") {

TEST_CASE("config precedence: defaults, file, environment, flags") {
    const auto dir = test::scratch_dir("config");
    const auto path = dir / "config.json";
    std::ofstream(path) << R"({"theta_w": 0.2, "window_samples": 12, "seed": 3})";

    AppConfig c = AppConfig::load(path);
    CHECK(c.theta_w == 0.2);
    CHECK(c.window_samples == 12);
    CHECK(c.sample_period_ms == 1000);

    std::map<std::string, std::string> env{{"WATTSENTINEL_WINDOW_SAMPLES", "14"},
                                           {"WATTSENTINEL_CRITICAL_PORTS", "sw1:4,sw2"}};
    c.apply_env([&](const char* name) -> const char* {
        auto it = env.find(name);
        return it == env.end() ? nullptr : it->second.c_str();
    });
    CHECK(c.theta_w == 0.2);
    CHECK(c.window_samples == 14);
    CHECK(c.critical_ports == std::vector<std::string>{"sw1:4", "sw2"});

    c.set("window_samples", "16");
    CHECK(c.window_samples == 16);
    CHECK(c.seed == 3);
    CHECK(c.pipeline_config().policy.critical_ports.contains("sw2"));
}

TEST_CASE("load_config reads the process environment") {
    ::setenv("WATTSENTINEL_THETA_W", "0.3", 1);
    const auto c = load_config(std::nullopt);
    ::unsetenv("WATTSENTINEL_THETA_W");
    CHECK(c.theta_w == 0.3);
}

TEST_CASE("bad configuration is rejected") {
    CHECK_THROWS_AS(AppConfig::from_json(json{{"thetaw", 1}}), ValidationError);
    CHECK_THROWS_AS(AppConfig::from_json(json{{"theta_w", "high"}}), ValidationError);
    AppConfig c;
    CHECK_THROWS_AS(c.set("nope", "1"), ValidationError);
    CHECK_THROWS_AS(c.set("window_samples", "2.5"), ValidationError);
    CHECK_THROWS_AS(c.set("seed", "-1"), ValidationError);
    CHECK_THROWS_AS(AppConfig::load("/nonexistent/config.json"), LoadError);

    AppConfig v = live_config();
    CHECK_NOTHROW(v.validate());
    v.listen_address = "localhost";
    CHECK_THROWS_AS(v.validate(), ValidationError);
    v = live_config();
    v.topology_path = "/nonexistent/topology.json";
    CHECK_THROWS_AS(v.validate(), ValidationError);
    v = live_config();
    v.theta_w = 0.0;
    CHECK_THROWS_AS(v.validate(), ValidationError);
    v = live_config();
    v.source = SourceKind::trace;
    CHECK_THROWS_AS(v.validate(), ValidationError);
}

TEST_CASE("simulate then replay gives the same report") {
    const auto dir = test::scratch_dir("cli");
    const auto topo = (test::scenario_dir() / "topology.json").string();
    const auto scn = (test::scenario_dir() / "lpi.scn").string();
    const auto sim = cli({"simulate", "--topology", topo, "--scenario", scn, "--duration", "400", "--seed", "2",
                          "--out", dir.string()});
    REQUIRE(sim.rc == 0);
    CHECK(sim.out.find("EEE_LPI_Exit") != std::string::npos);
    const auto report = slurp(dir / "report.csv");
    CHECK(report.find("correction") != std::string::npos);

    const auto replay = cli({"replay", "--trace", (dir / "trace.ptrace").string(), "--topology", topo});
    REQUIRE(replay.rc == 0);
    CHECK(replay.out == report);
}

TEST_CASE("invalid input exits with 2") {
    const auto dir = test::scratch_dir("cli_bad");
    const auto topo = (test::scenario_dir() / "topology.json").string();
    const auto scn = dir / "bad.scn";
    std::ofstream(scn) << "10 sleep host1\n20 explode host1\n";
    const auto r = cli({"simulate", "--topology", topo, "--scenario", scn.string(), "--duration", "60", "--out",
                        dir.string()});
    CHECK(r.rc == 2);
    CHECK(r.err.find("line 2") != std::string::npos);

    CHECK(cli({"simulate", "--topology", topo, "--duration", "60"}).rc == 2);
    CHECK(cli({"replay", "--trace", "/nonexistent.ptrace", "--topology", topo}).rc == 2);
    CHECK(cli({"bogus"}).rc == 2);
    CHECK(cli({"simulate", "--topology", topo, "--out", dir.string(), "--set", "theta_w=0"}).rc == 2);
}

TEST_CASE("live hub drops a client that falls behind") {
    LiveHub hub;
    auto slow = hub.subscribe(2);
    auto fast = hub.subscribe(10);
    for (int i = 0; i < 3; ++i) {
        hub.publish(LiveMessage{"probe", std::to_string(i)});
    }
    CHECK(slow->closed());
    CHECK(slow->overflowed());
    CHECK_FALSE(fast->closed());
    CHECK(hub.subscribers() == 1);
    for (int i = 0; i < 3; ++i) {
        auto m = fast->pop(std::chrono::milliseconds(10));
        REQUIRE(m);
        CHECK(m->data == std::to_string(i));
    }
    CHECK_FALSE(fast->pop(std::chrono::milliseconds(10)));
    hub.close_all();
    CHECK(fast->closed());
}

TEST_CASE("the HTTP API serves state, events and injected faults") {
    Runtime rt(live_config());
    ApiServer api(rt);
    const int port = api.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    rt.start();
    api.start();
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(5, 0);

    auto health = client.Get("/api/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    const auto h = json::parse(health->body);
    CHECK(h["status"] == "ok");
    CHECK(h["simulated"] == true);

    REQUIRE(wait_for([&] { return rt.latest("pdu1").has_value(); }, std::chrono::seconds(5)));
    const auto pdus = json::parse(client.Get("/api/pdus")->body);
    REQUIRE(pdus.size() == 2);
    CHECK(pdus[0]["id"] == "pdu1");

    auto sockets = client.Get("/api/pdus/pdu1/sockets");
    REQUIRE(sockets->status == 200);
    const auto s = json::parse(sockets->body);
    CHECK(s["sockets"].size() == 8);
    CHECK(s["sockets"][0]["device"] == "sw1");
    CHECK(s["sockets"][0]["state_source"] == "inferred");
    CHECK(s["sockets"][0]["power_w"].get<double>() > 40.0);
    CHECK(client.Get("/api/pdus/pdu9/sockets")->status == 404);
    CHECK(client.Get("/api/nothing")->status == 404);
    CHECK(json::parse(client.Get("/api/nothing")->body)["error"]["code"] == "not_found");
    CHECK(client.Get("/api/events?from=abc")->status == 400);
    CHECK(client.Get("/api/devices/ghost/history")->status == 404);

    CHECK(client.Post("/api/sim/fault", "explode sw1", "text/plain")->status == 400);
    CHECK(client.Post("/api/sim/fault", "port_down sw1 99", "text/plain")->status == 422);
    CHECK(client.Post("/api/sim/fault", "{\"nope\": 1}", "application/json")->status == 400);

    // Start listening before the fault so the detection reaches the stream.
    std::string stream;
    std::atomic<bool> got_detection{false};
    std::thread listener([&] {
        httplib::Client sse("127.0.0.1", port);
        sse.set_read_timeout(30, 0);
        sse.Get("/api/live", [&](const char* data, std::size_t n) {
            stream.append(data, n);
            if (stream.find("event: detection") != std::string::npos) {
                got_detection = true;
                return false;
            }
            return true;
        });
    });
    REQUIRE(wait_for([&] { return rt.hub().subscribers() == 1; }, std::chrono::seconds(5)));
    // Let calibration finish first.
    std::this_thread::sleep_for(std::chrono::milliseconds(2500));

    auto queued = client.Post("/api/sim/fault", R"({"action": "port_down sw1 4"})", "application/json");
    REQUIRE(queued->status == 202);
    CHECK(json::parse(queued->body)["queued"] == "port_down sw1 4");

    const bool isolated = wait_for(
        [&] {
            auto ev = client.Get("/api/events");
            return ev && !json::parse(ev->body)["isolations"].empty();
        },
        std::chrono::seconds(30));
    CHECK(isolated);
    listener.join();
    CHECK(got_detection);
    CHECK(stream.find("event: probe") != std::string::npos);

    const auto events = json::parse(client.Get("/api/events")->body);
    REQUIRE(events["detections"].size() == 1);
    CHECK(events["detections"][0]["chosen"] == "PortDown");
    CHECK(events["isolations"][0]["verdict"] == "benign_state_change");

    const auto hist = json::parse(client.Get("/api/devices/sw1/history")->body);
    CHECK(hist["detections"].size() == 1);
    CHECK_FALSE(hist["power"].empty());

    const auto csv = client.Get("/api/report.csv");
    CHECK(csv->get_header_value("Content-Type").find("text/csv") != std::string::npos);
    CHECK(csv->body.find("PortDown") != std::string::npos);

    api.stop();
    rt.stop();
}

TEST_CASE("fault injection needs the simulator") {
    const auto dir = test::scratch_dir("api_trace");
    const auto topo = test::default_topology();
    sim::SimConfig sc;
    sc.duration_s = 5;
    {
        std::ofstream out(dir / "t.ptrace");
        for (const auto& p : sim::simulate_all(topo, {}, sc)) {
            out << telemetry::encode_probe(p) << "\n";
        }
    }
    AppConfig c = live_config();
    c.source = SourceKind::trace;
    c.trace_path = (dir / "t.ptrace").string();
    Runtime rt(c);
    CHECK_FALSE(rt.simulated());
    CHECK_THROWS_AS(rt.inject("port_down sw1 4"), NotSimulated);
    ApiServer api(rt);
    const int port = api.bind("127.0.0.1", 0);
    api.start();
    httplib::Client client("127.0.0.1", port);
    const auto r = client.Post("/api/sim/fault", "port_down sw1 4", "text/plain");
    REQUIRE(r);
    CHECK(r->status == 409);
    CHECK(json::parse(r->body)["error"]["code"] == "not_simulated");
    api.stop();
}

TEST_CASE("binding a taken port fails") {
    Runtime rt(live_config());
    ApiServer a(rt);
    const int port = a.bind("127.0.0.1", 0);
    ApiServer b(rt);
    CHECK_THROWS_AS(b.bind("127.0.0.1", port), std::runtime_error);
}

TEST_CASE("time bounds parse as integers") {
    CHECK(parse_time_bound("1704067200000", "from") == 1'704'067'200'000);
    CHECK_THROWS_AS(parse_time_bound("soon", "from"), ValidationError);
    CHECK_THROWS_AS(parse_time_bound("12x", "to"), ValidationError);
}

}
