#include "../support.hpp"

#include "wattsentinel/errors.hpp"
#include "wattsentinel/sim/sim_source.hpp"
#include "wattsentinel/sim/stp.hpp"
#include "wattsentinel/telemetry/probe.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>

using namespace ws;
using namespace ws::sim;

namespace {

struct UnionFind {
    std::map<std::string, std::string> parent;
    std::string find(const std::string& x) {
        auto it = parent.find(x);
        if (it == parent.end() || it->second == x) {
            parent[x] = x;
            return x;
        }
        return it->second = find(it->second);
    }
    void join(const std::string& a, const std::string& b) { parent[find(a)] = find(b); }
};

Milliwatts socket_power(const std::vector<telemetry::ProbeResponse>& probes, const std::string& pdu, int socket,
                        TimestampMs ts) {
    for (const auto& p : probes) {
        if (p.pdu_id == pdu && p.timestamp_ms == ts) {
            return telemetry::active_power(*p.socket(socket));
        }
    }
    FAIL("no probe");
    return Milliwatts{0};
}

SimConfig exact(double duration) {
    SimConfig c;
    c.duration_s = duration;
    c.noise_sigma_w = 0.0;
    c.baseline_offset_fraction = 0.0;
    return c;
}

} // namespace

TEST_SUITE("sim") {

TEST_CASE("STP yields a spanning tree per component on random graphs") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 8);
        std::vector<StpBridge> bridges;
        for (int i = 0; i < n; ++i) {
            bridges.push_back(StpBridge{"b" + std::to_string(i), 4096 * static_cast<int>(rng() % 4)});
        }
        std::vector<StpLink> links;
        std::map<std::string, int> next_port;
        const int m = static_cast<int>(rng() % (2 * n + 1));
        for (int k = 0; k < m; ++k) {
            const auto a = bridges[rng() % n].id;
            const auto b = bridges[rng() % n].id;
            if (a == b) {
                continue;
            }
            links.push_back(StpLink{a, ++next_port[a], b, ++next_port[b], rng() % 5 != 0});
        }
        const auto r = stp_converge(bridges, links);

        UnionFind all;
        UnionFind fwd;
        for (const auto& b : bridges) {
            all.find(b.id);
            fwd.find(b.id);
        }
        for (const auto& l : links) {
            if (l.active) {
                all.join(l.a, l.b);
            }
        }
        std::set<std::string> components;
        for (const auto& b : bridges) {
            components.insert(all.find(b.id));
        }
        CHECK(r.forwarding_links(links) == bridges.size() - components.size());
        for (const auto& l : links) {
            auto ra = r.roles.find({l.a, l.a_port});
            auto rb = r.roles.find({l.b, l.b_port});
            CHECK((ra != r.roles.end()) == l.active);
            if (l.active && ra->second != powermodel::StpRole::blocking &&
                rb->second != powermodel::StpRole::blocking) {
                fwd.join(l.a, l.b);
            }
        }
        // Forwarding links connect each component, so with n - c edges it is a tree.
        for (const auto& b : bridges) {
            for (const auto& c : bridges) {
                CHECK((all.find(b.id) == all.find(c.id)) == (fwd.find(b.id) == fwd.find(c.id)));
            }
        }
        // The root is the lowest (priority, id) in the component.
        for (const auto& b : bridges) {
            std::pair<int, std::string> best{b.priority, b.id};
            for (const auto& c : bridges) {
                if (all.find(b.id) == all.find(c.id)) {
                    best = std::min(best, std::pair<int, std::string>{c.priority, c.id});
                }
            }
            CHECK(r.root_of.at(b.id) == best.second);
        }
    }
}

TEST_CASE("sockets carry the additive model power") {
    const auto topo = test::default_topology();
    const auto probes = simulate_all(topo, {}, exact(3));
    const auto c = exact(3);
    // sw1: 45 + 4 x 0.65 + 4 x 0.35; sw2, sw3: 45 + 8 x 0.35.
    CHECK(socket_power(probes, "pdu1", 1, c.start_ms) == Milliwatts{49'000});
    CHECK(socket_power(probes, "pdu1", 2, c.start_ms) == Milliwatts{47'800});
    CHECK(socket_power(probes, "pdu1", 3, c.start_ms) == Milliwatts{47'800});
    CHECK(socket_power(probes, "pdu2", 1, c.start_ms) == Milliwatts{60'000});
    CHECK(socket_power(probes, "pdu2", 3, c.start_ms) == Milliwatts{8'000});
    CHECK(socket_power(probes, "pdu1", 4, c.start_ms) == Milliwatts{0});
    for (const auto& p : probes) {
        std::int64_t sum = 0;
        for (const auto& s : p.sockets) {
            sum += telemetry::active_power(s).value;
        }
        CHECK(telemetry::active_power(p.total).value == sum);
    }
}

TEST_CASE("scripted actions move the power by the modeled amount") {
    const auto topo = test::default_topology();
    const auto c = exact(20);
    const auto script = load_script("5 port_down sw1 4\n6 set_speed sw1 3 100\n7 lpi_enter sw1 6\n8 sleep host1\n"
                                    "9 power_off host2\n",
                                    topo);
    const auto probes = simulate_all(topo, script, c);
    CHECK(socket_power(probes, "pdu1", 1, test::at(c, 5)) == Milliwatts{48'650});
    CHECK(socket_power(probes, "pdu1", 1, test::at(c, 6)) == Milliwatts{48'350});
    CHECK(socket_power(probes, "pdu1", 1, test::at(c, 7)) == Milliwatts{48'000});
    CHECK(socket_power(probes, "pdu2", 1, test::at(c, 8)) == Milliwatts{3'000});
    CHECK(socket_power(probes, "pdu2", 2, test::at(c, 9)) == Milliwatts{500});
}

TEST_CASE("a wake starts with a burst") {
    const auto topo = test::default_topology();
    const auto c = exact(20);
    const auto probes = simulate_all(topo, load_script("2 sleep host1\n5 wake host1\n", topo), c);
    for (int t = 5; t < 10; ++t) {
        CHECK(socket_power(probes, "pdu2", 1, test::at(c, t)) == Milliwatts{96'000});
    }
    CHECK(socket_power(probes, "pdu2", 1, test::at(c, 10)) == Milliwatts{60'000});
}

TEST_CASE("a link failure spikes the re-evaluating switches for 2 to 4 seconds") {
    const auto topo = test::default_topology();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto c = exact(30);
        c.seed = seed;
        const auto probes = simulate_all(topo, load_script("10 link_fail sw1 1\n", topo), c);
        for (int socket : {1, 2}) {
            const auto settled = socket_power(probes, "pdu1", socket, test::at(c, 29));
            int high = 0;
            for (int t = 10; t < 29; ++t) {
                high += (socket_power(probes, "pdu1", socket, test::at(c, t)) - settled).value > 500;
            }
            CHECK(high >= 2);
            CHECK(high <= 4);
        }
    }
}

TEST_CASE("runs are reproducible from the seed") {
    const auto topo = test::default_topology();
    SimConfig c;
    c.duration_s = 60;
    c.seed = 7;
    const auto a = simulate_all(topo, {}, c);
    CHECK(a == simulate_all(topo, {}, c));
    c.seed = 8;
    CHECK_FALSE(a == simulate_all(topo, {}, c));
    CHECK(a.size() == 120);
}

TEST_CASE("noise has the configured spread") {
    const auto topo = test::default_topology();
    SimConfig c;
    c.duration_s = 4000;
    c.noise_sigma_w = 0.02;
    const auto probes = simulate_all(topo, {}, c);
    std::vector<double> v;
    for (const auto& p : probes) {
        if (p.pdu_id == "pdu2") {
            v.push_back(telemetry::active_power(*p.socket(1)).watts());
        }
    }
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    CHECK(sd == doctest::Approx(0.02).epsilon(0.1));
    // Baseline offset within 5% of 60 W.
    CHECK(std::abs(mean - 60.0) <= 3.0 + 1e-9);
}

TEST_CASE("script errors carry the line number") {
    const auto topo = test::default_topology();
    auto line_of = [&](const std::string& text) -> std::size_t {
        try {
            load_script(text, topo);
        } catch (const LoadError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("1 sleep host1\n2 port_down sw9 1\n") == 2);
    CHECK(line_of("# comment\n\n5 fly host1\n") == 3);
    CHECK(line_of("10 sleep host1\n5 wake host1\n") == 2);
    CHECK(line_of("x sleep host1\n") == 1);
    CHECK(line_of("1 port_down sw1\n") == 1);
    CHECK(line_of("1 port_down sw1 99\n") == 1);
    CHECK(line_of("1 power_off host1\n2 sleep host1\n") == 2);
    CHECK(line_of("-1 sleep host1\n") == 1);
    CHECK(line_of("1 set_speed sw1 1 42\n") == 1);
    CHECK(line_of("1 power_off host1\n2 power_on host1  # back\n") == 0);
    CHECK(load_script("1 sleep host1\n1 sleep host2\n", topo).actions.size() == 2);
}

TEST_CASE("actions round trip through their text form") {
    const auto a = parse_action("set_speed sw1 3 100", 12.5);
    CHECK(a.kind == ActionKind::set_speed);
    CHECK(a.port == 3);
    CHECK(a.arg == 100);
    CHECK(parse_action(format_action(a), 12.5) == a);
    CHECK_THROWS_AS(parse_action("sleep"), LoadError);
}

TEST_CASE("inapplicable actions are contract errors") {
    auto net = NetworkState::from_topology(test::default_topology());
    CHECK_THROWS_AS(apply_action(net, parse_action("port_down sw1 42")), ContractError);
    CHECK_THROWS_AS(apply_action(net, parse_action("sleep nobody")), ContractError);
    apply_action(net, parse_action("power_off host1"));
    CHECK_THROWS_AS(apply_action(net, parse_action("wake host1")), ContractError);
}

TEST_CASE("topology validation") {
    auto doc = nlohmann::json::parse(R"({"pdus": [{"id": "p", "sockets": 2}],
        "devices": [{"id": "a", "class": "switch", "pdu": "p", "socket": 1, "ports": 2},
                    {"id": "b", "class": "switch", "pdu": "p", "socket": 2, "ports": 2}],
        "links": [{"a": "a", "a_port": 1, "b": "b", "b_port": 1}]})");
    CHECK_NOTHROW(Topology::from_json(doc));
    auto dangling = doc;
    dangling["links"][0]["b"] = "zz";
    CHECK_THROWS_AS(Topology::from_json(dangling), ValidationError);
    auto double_bound = doc;
    double_bound["devices"][1]["socket"] = 1;
    CHECK_THROWS_AS(Topology::from_json(double_bound), ValidationError);
    auto reused = doc;
    reused["links"].push_back({{"a", "a"}, {"a_port", 1}, {"b", "b"}, {"b_port", 2}});
    CHECK_THROWS_AS(Topology::from_json(reused), ValidationError);
    CHECK_THROWS_AS(Topology::load("/nonexistent/topology.json"), LoadError);
}

TEST_CASE("the simulated source serves ticks and takes injections") {
    const auto topo = test::default_topology();
    auto c = exact(30);
    SimSource src(topo, {}, c);
    CHECK(src.simulated());
    CHECK(src.pdu_ids() == std::vector<std::string>{"pdu1", "pdu2"});
    auto first = std::get<telemetry::ProbeResponse>(src.read("pdu1", 0, c.start_ms));
    CHECK(first.timestamp_ms == c.start_ms);
    src.inject(parse_action("port_down sw1 4"));
    auto later = std::get<telemetry::ProbeResponse>(src.read("pdu1", 2, c.start_ms + 2000));
    CHECK(telemetry::active_power(*later.socket(1)) == Milliwatts{48'650});
    CHECK_THROWS_AS(src.inject(parse_action("port_down sw1 99")), ContractError);
    CHECK(std::holds_alternative<telemetry::EndOfStream>(src.read("pdu2", 30, c.start_ms + 30'000)));
}

}
