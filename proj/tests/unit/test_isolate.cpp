#include "wattsentinel/errors.hpp"
#include "wattsentinel/fdi/detect.hpp"
#include "wattsentinel/fdi/isolate.hpp"

#include <doctest.h>

using namespace ws;
using namespace ws::fdi;
using powermodel::DeviceMode;
using powermodel::DevicePowerModel;
using powermodel::DeviceStateSnapshot;
using powermodel::ModelRegistry;
using powermodel::PortState;

namespace {

PortState port(int id, int speed, bool up) {
    PortState p;
    p.port_id = id;
    p.speed_mbps = speed;
    p.admin_up = true;
    p.oper_up = up;
    return p;
}

ModelRegistry registry() {
    ModelRegistry r;
    r.add_device(DevicePowerModel::defaults(DeviceClass::switch_),
                 DeviceStateSnapshot{"sw1", DeviceClass::switch_, DeviceMode::operational,
                                     {port(1, 1000, true), port(2, 100, true), port(3, 100, false)}, 0});
    r.add_device(DevicePowerModel::defaults(DeviceClass::host),
                 DeviceStateSnapshot{"host1", DeviceClass::host, DeviceMode::operational, {}, 0});
    r.bind(SocketRef{"pdu1", 1}, "sw1");
    r.bind(SocketRef{"pdu1", 2}, "host1");
    return r;
}

DetectionEvent event_for(const ModelRegistry& reg, const std::string& device, double amp) {
    ChangeFeature f;
    f.kind = ShapeKind::step;
    f.onset_ms = 50'000;
    f.amplitude_w = amp;
    auto ev = detect(device, *reg.device(device), f, KnowledgeBase::defaults(), {}, 60'000);
    ev.event_id = 1;
    ev.socket = *reg.socket_of(device);
    return ev;
}

std::vector<Residual> residuals(double watts, int n) {
    std::vector<Residual> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(Residual{"pdu1", 1, 60'000 + i * 1000, Milliwatts::from_watts(45.0 + watts), Milliwatts{45'000}});
    }
    return out;
}

} // namespace

TEST_SUITE("isolate") {

TEST_CASE("an Unknown event or an unregistered device is a contract error") {
    auto reg = registry();
    auto unknown = event_for(reg, "sw1", -5.0);
    REQUIRE(unknown.chosen == ChangeClass::Unknown);
    CHECK_THROWS_AS(begin_isolation(unknown, reg, 0.2), ContractError);

    auto ev = event_for(reg, "sw1", -0.35);
    ev.device_id = "ghost";
    CHECK_THROWS_AS(begin_isolation(ev, reg, 0.2), ContractError);
}

TEST_CASE("the plan applies the chosen change") {
    auto reg = registry();
    const auto ev = event_for(reg, "sw1", -0.35);
    const auto plan = begin_isolation(ev, reg, 0.2);
    CHECK(plan.contract_error.empty());
    CHECK(plan.before == *reg.device("sw1"));
    CHECK_FALSE(plan.after.snapshot.port(2)->oper_up);
    CHECK(plan.after.snapshot.as_of_ms == 50'000);
    CHECK_FALSE(plan.model_updated);
    CHECK(powermodel::expected_power(plan.after.model, plan.after.snapshot) == Milliwatts{45'000 + 650});
}

TEST_CASE("a settled residual is benign") {
    auto reg = registry();
    const auto plan = begin_isolation(event_for(reg, "sw1", -0.35), reg, 0.2);
    const auto r = conclude_isolation(plan, residuals(0.03, 15), {}, Milliwatts{100}, 99);
    CHECK(r.verdict == Verdict::benign_state_change);
    CHECK(r.mean_abs_residual_w == doctest::Approx(0.03));
    CHECK(r.change_class == ChangeClass::PortDown);
    CHECK(r.resolved_at_ms == 99);
    CHECK(r.narrative.find("PortDown on sw1 port 2") != std::string::npos);
}

TEST_CASE("a residual that stays out of band is a fault") {
    auto reg = registry();
    const auto plan = begin_isolation(event_for(reg, "sw1", -0.35), reg, 0.2);
    CHECK(conclude_isolation(plan, residuals(0.5, 15), {}, Milliwatts{100}, 0).verdict == Verdict::fault);
    CHECK(conclude_isolation(plan, residuals(0.1, 15), {}, Milliwatts{100}, 0).verdict == Verdict::fault);
    CHECK(conclude_isolation(plan, {}, {}, Milliwatts{100}, 0).verdict == Verdict::fault);
}

TEST_CASE("a degrading change on a critical device or port is a misconfiguration") {
    auto reg = registry();
    const auto plan = begin_isolation(event_for(reg, "sw1", -0.35), reg, 0.2);
    IsolationPolicy on_port{{"sw1:2"}};
    IsolationPolicy on_device{{"sw1"}};
    IsolationPolicy elsewhere{{"sw1:1", "host1"}};
    CHECK(conclude_isolation(plan, residuals(0.0, 15), on_port, Milliwatts{100}, 0).verdict ==
          Verdict::misconfiguration);
    CHECK(conclude_isolation(plan, residuals(0.0, 15), on_device, Milliwatts{100}, 0).verdict ==
          Verdict::misconfiguration);
    CHECK(conclude_isolation(plan, residuals(0.0, 15), elsewhere, Milliwatts{100}, 0).verdict ==
          Verdict::benign_state_change);
    // Not converging wins over policy.
    CHECK(conclude_isolation(plan, residuals(1.0, 15), on_port, Milliwatts{100}, 0).verdict == Verdict::fault);
}

TEST_CASE("restoring changes never violate the policy") {
    IsolationPolicy p{{"sw1", "sw1:3"}};
    CHECK_FALSE(p.violated_by("sw1", StateChange{ChangeClass::PortUp, 3, std::nullopt, std::nullopt}));
    CHECK_FALSE(p.violated_by("sw1", StateChange{ChangeClass::Wake, std::nullopt, std::nullopt, std::nullopt}));
    CHECK(p.violated_by("sw1", StateChange{ChangeClass::Sleep, std::nullopt, std::nullopt, std::nullopt}));
    CHECK_FALSE(p.violated_by("sw2", StateChange{ChangeClass::PortDown, 3, std::nullopt, std::nullopt}));
}

TEST_CASE("a change that cannot be applied yields a fault") {
    auto reg = registry();
    auto ev = event_for(reg, "sw1", -0.35);
    ev.candidates.front().change.port = 3;  // already down
    const auto plan = begin_isolation(ev, reg, 0.2);
    CHECK_FALSE(plan.contract_error.empty());
    const auto r = conclude_isolation(plan, residuals(0.0, 15), {}, Milliwatts{100}, 0);
    CHECK(r.verdict == Verdict::fault);
    CHECK_FALSE(r.model_updated);
}

TEST_CASE("isolate installs the model and records the outcome in the KB") {
    auto reg = registry();
    KnowledgeBase kb = KnowledgeBase::defaults();
    const auto v0 = kb.version();
    const auto ev = event_for(reg, "sw1", -0.35);
    const auto r = isolate(ev, reg, kb, residuals(0.01, 15), {}, Milliwatts{100}, 0.2, 0);
    CHECK(r.verdict == Verdict::benign_state_change);
    CHECK_FALSE(reg.device("sw1")->snapshot.port(2)->oper_up);
    const auto h = kb.history("sw1");
    REQUIRE(h.size() == 1);
    CHECK(h[0].event_id == 1);
    CHECK(h[0].verdict == Verdict::benign_state_change);
    CHECK(h[0].change.port == 2);
    CHECK(kb.version() > v0);

    // A second call for the same event only updates the verdict.
    isolate(ev, reg, kb, residuals(0.5, 15), {}, Milliwatts{100}, 0.2, 0);
    CHECK(kb.history("sw1").size() == 1);
    CHECK(kb.history("sw1")[0].verdict == Verdict::fault);
}

TEST_CASE("a sleep folds the standing offset into the destination level") {
    auto reg = registry();
    auto entry = *reg.device("host1");
    entry.unexplained_offset = Milliwatts{2'000};
    reg.replace("host1", entry);
    ChangeFeature f;
    f.kind = ShapeKind::step;
    f.amplitude_w = -59.0;
    auto ev = detect("host1", entry, f, KnowledgeBase::defaults(), {}, 0);
    REQUIRE(ev.chosen == ChangeClass::Sleep);
    ev.event_id = 2;
    const auto plan = begin_isolation(ev, reg, 0.2);
    CHECK(plan.after.unexplained_offset == Milliwatts{0});
    // 62 W before, 59 W drop: 3 W asleep.
    CHECK(powermodel::expected_power(plan.after.model, plan.after.snapshot) == Milliwatts{3'000});
}

}
