#include "wattsentinel/fdi/isolate.hpp"

#include "wattsentinel/errors.hpp"

#include <cmath>
#include <fmt/format.h>

namespace ws::fdi {

namespace {

using powermodel::DeviceEntry;
using powermodel::DeviceMode;

bool degrading(ChangeClass c) {
    switch (c) {
    case ChangeClass::PortDown:
    case ChangeClass::LinkRateDown:
    case ChangeClass::EEE_LPI_Enter:
    case ChangeClass::Sleep:
    case ChangeClass::DeviceOff:
        return true;
    default:
        return false;
    }
}

bool replaces_level(ChangeClass c) {
    return c == ChangeClass::Sleep || c == ChangeClass::Wake || c == ChangeClass::DeviceOff ||
           c == ChangeClass::DeviceOn;
}

/// Moves a standing offset into the level parameter of the current mode, so
/// a re-measured destination level is not skewed by it. Leaves the entry
/// alone if that would break the model invariants.
DeviceEntry fold_offset(DeviceEntry d) {
    if (d.unexplained_offset.value == 0) {
        return d;
    }
    auto m = d.model;
    switch (d.snapshot.mode) {
    case DeviceMode::operational: m.base += d.unexplained_offset; break;
    case DeviceMode::sleep: m.sleep += d.unexplained_offset; break;
    case DeviceMode::off: m.off += d.unexplained_offset; break;
    }
    try {
        m.validate();
    } catch (const ValidationError&) {
        return d;
    }
    d.model = m;
    d.unexplained_offset = Milliwatts{0};
    return d;
}

const Candidate& chosen_candidate(const DetectionEvent& ev) {
    for (const auto& c : ev.candidates) {
        if (c.change_class == ev.chosen) {
            return c;
        }
    }
    throw ContractError("event " + std::to_string(ev.event_id) + " has no candidate for its chosen class");
}

std::string describe(const DetectionEvent& ev, const StateChange& change) {
    std::string s = fmt::format("{} on {}", powermodel::to_string(ev.chosen), ev.device_id);
    if (change.port) {
        s += fmt::format(" port {}", *change.port);
    }
    if (change.to_speed) {
        s += fmt::format(" to {} Mb/s", *change.to_speed);
    }
    return s;
}

} // namespace

bool IsolationPolicy::violated_by(const std::string& device_id, const StateChange& change) const {
    if (!degrading(change.change_class)) {
        return false;
    }
    if (critical_ports.contains(device_id)) {
        return true;
    }
    return change.port && critical_ports.contains(device_id + ":" + std::to_string(*change.port));
}

IsolationPlan begin_isolation(const DetectionEvent& event, const powermodel::ModelRegistry& registry,
                              double adopt_fraction) {
    if (event.chosen == ChangeClass::Unknown) {
        throw ContractError("begin_isolation: event " + std::to_string(event.event_id) + " is Unknown");
    }
    auto entry = registry.device(event.device_id);
    if (!entry) {
        throw ContractError("begin_isolation: unknown device " + event.device_id);
    }
    IsolationPlan plan;
    plan.event = event;
    plan.before = *entry;
    plan.after = *entry;
    const StateChange& change = chosen_candidate(event).change;
    try {
        DeviceEntry base = replaces_level(change.change_class) ? fold_offset(*entry) : *entry;
        auto r = powermodel::recompute_parameters(base.model, base.snapshot, change, adopt_fraction);
        plan.after = DeviceEntry{r.model, r.snapshot, base.unexplained_offset};
        plan.after.snapshot.as_of_ms = event.feature.onset_ms;
        plan.model_updated = r.model_updated;
        plan.note = r.note;
    } catch (const ContractError& e) {
        plan.contract_error = e.what();
    }
    return plan;
}

IsolationResult conclude_isolation(const IsolationPlan& plan, std::span<const Residual> verification,
                                   const IsolationPolicy& policy, Milliwatts theta, TimestampMs now_ms) {
    const DetectionEvent& ev = plan.event;
    IsolationResult out;
    out.event_id = ev.event_id;
    out.device_id = ev.device_id;
    out.socket = ev.socket;
    out.change_class = ev.chosen;
    out.model_updated = plan.model_updated;
    out.resolved_at_ms = now_ms;

    const StateChange& change = chosen_candidate(ev).change;
    const std::string what = describe(ev, change);

    if (!plan.contract_error.empty()) {
        out.verdict = Verdict::fault;
        out.model_updated = false;
        out.narrative = what + ": state change could not be applied (" + plan.contract_error + ")";
        return out;
    }

    double sum = 0.0;
    for (const auto& r : verification) {
        sum += std::abs(r.value().watts());
    }
    const double mean = verification.empty() ? INFINITY : sum / static_cast<double>(verification.size());
    out.mean_abs_residual_w = verification.empty() ? 0.0 : std::round(mean * 1000.0) / 1000.0;

    std::string narrative = fmt::format("{}, observed {:.3f} W", what, ev.feature.amplitude_w);
    if (!plan.note.empty()) {
        narrative += "; " + plan.note;
    }
    if (!(mean < theta.watts())) {
        out.verdict = Verdict::fault;
        narrative += fmt::format("; residual did not converge (mean {:.3f} W over {} samples)", out.mean_abs_residual_w,
                                 verification.size());
    } else if (policy.violated_by(ev.device_id, change)) {
        out.verdict = Verdict::misconfiguration;
        narrative += "; violates critical-port policy";
    } else {
        out.verdict = Verdict::benign_state_change;
        narrative += fmt::format("; residual settled (mean {:.3f} W)", out.mean_abs_residual_w);
    }
    out.narrative = std::move(narrative);
    return out;
}

IsolationResult isolate(const DetectionEvent& event, powermodel::ModelRegistry& registry, KnowledgeBase& kb,
                        std::span<const Residual> verification, const IsolationPolicy& policy, Milliwatts theta,
                        double adopt_fraction, TimestampMs now_ms) {
    auto plan = begin_isolation(event, registry, adopt_fraction);
    if (plan.contract_error.empty()) {
        registry.replace(event.device_id, plan.after);
    }
    auto result = conclude_isolation(plan, verification, policy, theta, now_ms);
    if (!kb.set_verdict(event.device_id, event.event_id, result.verdict)) {
        std::vector<ChangeClass> classes;
        for (const auto& c : event.candidates) {
            classes.push_back(c.change_class);
        }
        kb.record(event.device_id, KbHistoryEntry{event.event_id, event.chosen, chosen_candidate(event).change,
                                                  classes, event.feature.amplitude_w, event.feature.onset_ms,
                                                  result.verdict, false});
    }
    return result;
}

} // namespace ws::fdi
