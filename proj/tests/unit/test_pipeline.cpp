#include "../support.hpp"

#include "wattsentinel/errors.hpp"

#include <doctest.h>

using namespace ws;
using namespace ws::fdi;

namespace {

std::vector<DetectionEvent> of_class(const std::vector<DetectionEvent>& evs, ChangeClass c) {
    std::vector<DetectionEvent> out;
    for (const auto& e : evs) {
        if (e.chosen == c) {
            out.push_back(e);
        }
    }
    return out;
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("a port going down is detected, isolated and verified") {
    const auto r = test::run_script("300 port_down sw1 4\n", 420);
    REQUIRE(r.detections.size() == 1);
    const auto& ev = r.detections[0];
    CHECK(ev.chosen == ChangeClass::PortDown);
    CHECK(ev.device_id == "sw1");
    CHECK(*ev.candidates.front().change.port == 4);
    CHECK(ev.feature.onset_ms == test::at(r.sim, 300));
    CHECK(ev.detected_at_ms - ev.feature.onset_ms <= 15'000);
    REQUIRE(r.isolations.size() == 1);
    CHECK(r.isolations[0].verdict == Verdict::benign_state_change);
    CHECK(r.isolations[0].event_id == ev.event_id);
    CHECK(r.warnings.empty());
}

TEST_CASE("the critical-port policy turns the same change into a misconfiguration") {
    PipelineConfig pc;
    pc.policy.critical_ports = {"sw1:4"};
    const auto r = test::run_script("300 port_down sw1 4\n", 420, 1, pc);
    REQUIRE(r.isolations.size() == 1);
    CHECK(r.isolations[0].verdict == Verdict::misconfiguration);
}

TEST_CASE("runs are deterministic for a seed") {
    const auto a = test::run_script("300 link_fail sw1 1\n", 400, 5);
    const auto b = test::run_script("300 link_fail sw1 1\n", 400, 5);
    CHECK(a.detections == b.detections);
    CHECK(a.isolations == b.isolations);
}

TEST_CASE("sleep and wake on a host are benign") {
    const auto r = test::run_script("200 sleep host1\n400 wake host1\n", 500);
    CHECK(of_class(r.detections, ChangeClass::Sleep).size() == 1);
    const auto wakes = of_class(r.detections, ChangeClass::Wake);
    REQUIRE(wakes.size() == 1);
    CHECK(wakes[0].feature.kind == ShapeKind::burst_then_step);
    REQUIRE(r.isolations.size() == 2);
    for (const auto& i : r.isolations) {
        CHECK(i.verdict == Verdict::benign_state_change);
    }
}

TEST_CASE("nothing is reported for noise alone") {
    const auto r = test::run_script("", 900, 9);
    CHECK(r.detections.empty());
    CHECK(r.warnings.empty());
}

TEST_CASE("calibration covers the first probes of each PDU") {
    const auto topo = test::default_topology();
    sim::SimConfig sc;
    sc.duration_s = 70;
    const auto probes = sim::simulate_all(topo, {}, sc);
    auto reg = topo.registry();
    auto kb = KnowledgeBase::defaults();
    PipelineConfig pc;
    pc.calibration_samples = 60;
    Pipeline p(reg, kb, nullptr, pc);
    int seen = 0;
    for (const auto& probe : probes) {
        if (probe.pdu_id != "pdu2") {
            continue;
        }
        CHECK(p.calibrated("pdu2") == (seen >= 60));
        p.process(probe);
        ++seen;
    }
    CHECK(p.calibrated("pdu2"));
    // The 5% baseline offsets are measured away.
    const auto sock = *reg.socket_of("host1");
    const auto* last = probes.back().pdu_id == "pdu2" ? &probes.back() : &probes[probes.size() - 2];
    const auto measured = telemetry::active_power(*last->socket(sock.socket_id));
    CHECK(std::abs((measured - reg.expected_at(sock)).watts()) < 0.1);
}

TEST_CASE("a powered socket with no bound device is reported once") {
    auto topo = test::default_topology();
    sim::SimConfig sc;
    sc.duration_s = 120;
    const auto probes = sim::simulate_all(topo, {}, sc);
    auto partial = topo;
    std::erase_if(partial.devices, [](const sim::DeviceSpec& d) { return d.id == "host2"; });
    auto reg = partial.registry();
    auto kb = KnowledgeBase::defaults();
    Pipeline p(reg, kb, nullptr, {});
    std::vector<DetectionEvent> found;
    for (const auto& probe : probes) {
        for (auto& o : p.process(probe)) {
            if (auto* ev = std::get_if<DetectionEvent>(&o)) {
                found.push_back(*ev);
            }
        }
    }
    REQUIRE(found.size() == 1);
    CHECK(found[0].unbound_socket());
    CHECK(found[0].chosen == ChangeClass::Unknown);
    CHECK(found[0].socket == SocketRef{"pdu2", 2});
    CHECK(found[0].note.find("unbound socket") != std::string::npos);
}

TEST_CASE("probes out of order are dropped with a warning") {
    const auto r = test::run_script("", 5);
    auto reg = test::default_topology().registry();
    auto kb = KnowledgeBase::defaults();
    Pipeline p(reg, kb, nullptr, {});
    p.process(r.probes[2]);
    const auto out = p.process(r.probes[0]);
    REQUIRE(out.size() == 1);
    CHECK(std::holds_alternative<Warning>(out[0]));
}

TEST_CASE("a gap drops the pending analysis") {
    const auto topo = test::default_topology();
    const auto script = sim::load_script("300 port_down sw1 4\n", topo);
    sim::SimConfig sc;
    sc.duration_s = 360;
    const auto probes = sim::simulate_all(topo, script, sc);
    auto reg = topo.registry();
    auto kb = KnowledgeBase::defaults();
    Pipeline p(reg, kb, nullptr, {});
    std::vector<PipelineOutput> out;
    for (const auto& probe : probes) {
        if (probe.pdu_id == "pdu1" && probe.timestamp_ms == test::at(sc, 303)) {
            p.gap("pdu1", probe.timestamp_ms);
            continue;
        }
        auto o = p.process(probe);
        out.insert(out.end(), o.begin(), o.end());
    }
    int detections = 0;
    int warnings = 0;
    for (const auto& o : out) {
        detections += std::holds_alternative<DetectionEvent>(o);
        warnings += std::holds_alternative<Warning>(o);
    }
    CHECK(detections == 0);
    // The level still moved, so the expectation follows it.
    CHECK(warnings == 1);
    CHECK(reg.device("sw1")->unexplained_offset.value < -250);
}

TEST_CASE("a failing store degrades to memory with one warning") {
    if (!std::filesystem::exists("/dev/full")) {
        return;
    }
    store::HistoryStore st(store::StoreOptions{std::filesystem::path("/dev/full"), 0});
    const auto topo = test::default_topology();
    const auto script = sim::load_script("300 port_down sw1 4\n", topo);
    sim::SimConfig sc;
    sc.duration_s = 400;
    auto reg = topo.registry();
    auto kb = KnowledgeBase::defaults();
    Pipeline p(reg, kb, &st, {});
    int warnings = 0;
    int detections = 0;
    for (const auto& probe : sim::simulate_all(topo, script, sc)) {
        for (auto& o : p.process(probe)) {
            warnings += std::holds_alternative<Warning>(o);
            detections += std::holds_alternative<DetectionEvent>(o);
        }
    }
    CHECK(p.degraded());
    CHECK(warnings == 1);
    CHECK(detections == 1);
    CHECK(st.size() == 0);
}

TEST_CASE("records land in the store") {
    store::HistoryStore st;
    const auto topo = test::default_topology();
    const auto script = sim::load_script("300 port_down sw1 4\n", topo);
    sim::SimConfig sc;
    sc.duration_s = 400;
    auto reg = topo.registry();
    auto kb = KnowledgeBase::defaults();
    Pipeline p(reg, kb, &st, {});
    for (const auto& probe : sim::simulate_all(topo, script, sc)) {
        p.process(probe);
    }
    const TimestampMs from = sc.start_ms;
    const TimestampMs to = test::at(sc, 400);
    CHECK(st.query_kind(store::RecordKind::detection, from, to).size() == 1);
    CHECK(st.query_kind(store::RecordKind::isolation, from, to).size() == 1);
    CHECK(st.query_window(store::RecordKind::power_total, "pdu1", from, to).size() == 400);
    CHECK(st.query_window(store::RecordKind::power_socket, "pdu1/1", from, to).size() == 400);
    CHECK_FALSE(st.query_window(store::RecordKind::state_snapshot, "sw1", from, to).empty());
}

TEST_CASE("construction checks") {
    auto reg = test::default_topology().registry();
    KnowledgeBase empty;
    CHECK_THROWS_AS(Pipeline(reg, empty, nullptr, {}), ContractError);
    auto kb = KnowledgeBase::defaults();
    PipelineConfig bad;
    bad.window_samples = 0;
    CHECK_THROWS_AS(Pipeline(reg, kb, nullptr, bad), ValidationError);
}

}
