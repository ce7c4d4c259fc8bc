#include "wattsentinel/fdi/detect.hpp"

#include "wattsentinel/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ws::fdi {

namespace {

using powermodel::DeviceEntry;
using powermodel::DeviceMode;
using powermodel::PortState;

struct Option {
    StateChange change;
    std::optional<double> predicted_w;
    double recency{1.0};
    std::optional<std::uint64_t> reverts;
};

struct LpiWatch {
    std::uint64_t event_id{0};
    int port{0};
    double amplitude_w{0.0};
};

bool is_mode_class(ChangeClass c) {
    return c == ChangeClass::Sleep || c == ChangeClass::Wake || c == ChangeClass::DeviceOff ||
           c == ChangeClass::DeviceOn;
}

/// Modeled delta, or nullopt when the change does not apply to the snapshot.
std::optional<double> predicted(const DeviceEntry& d, const StateChange& change) {
    try {
        Milliwatts delta = powermodel::modeled_delta(d.model, d.snapshot, change);
        if (is_mode_class(change.change_class)) {
            delta -= d.unexplained_offset;
        }
        return delta.watts();
    } catch (const ContractError&) {
        return std::nullopt;
    }
}

/// An earlier PortDown that could have been LPI and whose port is still
/// considered down; reverting it now would make the earlier event LPI.
std::optional<LpiWatch> open_lpi_watch(const std::string& device_id, const DeviceEntry& d, const ChangeFeature& f,
                                       const KnowledgeBase& kb, const DetectConfig& cfg) {
    if (f.kind != ShapeKind::step || f.amplitude_w <= 0.0) {
        return std::nullopt;
    }
    const auto history = kb.history(device_id);
    const auto horizon_ms = static_cast<TimestampMs>(cfg.lpi_revert_horizon_s * 1000.0);
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
        if (it->at_ms < f.onset_ms - horizon_ms) {
            break;
        }
        if (it->corrected || it->change_class != ChangeClass::PortDown || !it->change.port) {
            continue;
        }
        if (std::find(it->candidate_classes.begin(), it->candidate_classes.end(), ChangeClass::EEE_LPI_Enter) ==
            it->candidate_classes.end()) {
            continue;
        }
        const PortState* p = d.snapshot.port(*it->change.port);
        if (p == nullptr || p->oper_up) {
            continue;
        }
        if (std::abs(f.amplitude_w + it->amplitude_w) > cfg.amplitude_tolerance_w) {
            continue;
        }
        return LpiWatch{it->event_id, *it->change.port, it->amplitude_w};
    }
    return std::nullopt;
}

void add_if_applies(std::vector<Option>& out, const DeviceEntry& d, StateChange change, double recency = 1.0) {
    if (auto p = predicted(d, change)) {
        out.push_back(Option{std::move(change), p, recency, std::nullopt});
    }
}

std::vector<Option> options(ChangeClass cls, const DeviceEntry& d, const std::optional<LpiWatch>& watch) {
    std::vector<Option> out;
    const auto& snap = d.snapshot;
    switch (cls) {
    case ChangeClass::PortDown:
    case ChangeClass::EEE_LPI_Enter:
        for (const auto& p : snap.ports) {
            if (p.oper_up && !(cls == ChangeClass::EEE_LPI_Enter && p.lpi_active)) {
                add_if_applies(out, d, StateChange{cls, p.port_id, std::nullopt, std::nullopt});
            }
        }
        break;
    case ChangeClass::PortUp:
        for (const auto& p : snap.ports) {
            if (!p.oper_up) {
                add_if_applies(out, d, StateChange{cls, p.port_id, std::nullopt, std::nullopt}, watch ? 0.5 : 1.0);
            }
        }
        break;
    case ChangeClass::LinkRateDown:
    case ChangeClass::LinkRateUp:
    case ChangeClass::LinkRateNoop:
        for (const auto& p : snap.ports) {
            if (!p.oper_up) {
                continue;
            }
            // Nearest speed first, so equal predictions settle on the smallest renegotiation.
            std::vector<int> speeds(powermodel::kPortSpeeds.begin(), powermodel::kPortSpeeds.end());
            std::stable_sort(speeds.begin(), speeds.end(), [&](int a, int b) {
                return std::abs(std::log10(a) - std::log10(p.speed_mbps)) <
                       std::abs(std::log10(b) - std::log10(p.speed_mbps));
            });
            for (int speed : speeds) {
                if (speed == p.speed_mbps) {
                    continue;
                }
                const bool down = speed < p.speed_mbps;
                const ChangeClass move = down ? ChangeClass::LinkRateDown : ChangeClass::LinkRateUp;
                const bool flat = d.model.port_increment(speed) == d.model.port_increment(p.speed_mbps);
                if (cls == ChangeClass::LinkRateNoop ? !flat : (flat || move != cls)) {
                    continue;
                }
                // The noop option is evaluated as the real move it stands for.
                auto p_w = predicted(d, StateChange{move, p.port_id, speed, std::nullopt});
                if (p_w) {
                    out.push_back(Option{StateChange{cls, p.port_id, speed, std::nullopt}, p_w, 1.0, std::nullopt});
                }
            }
        }
        break;
    case ChangeClass::EEE_LPI_Exit:
        for (const auto& p : snap.ports) {
            if (p.lpi_active) {
                add_if_applies(out, d, StateChange{cls, p.port_id, std::nullopt, std::nullopt});
            }
        }
        if (watch) {
            out.push_back(Option{StateChange{cls, watch->port, std::nullopt, std::nullopt}, -watch->amplitude_w, 1.0,
                                 watch->event_id});
        }
        break;
    case ChangeClass::STPReevaluation:
        if (snap.mode == DeviceMode::operational && snap.device_class == DeviceClass::switch_) {
            out.push_back(Option{StateChange{cls, std::nullopt, std::nullopt, std::nullopt}, d.model.stp_spike.watts(),
                                 1.0, std::nullopt});
        }
        break;
    case ChangeClass::Sleep:
    case ChangeClass::Wake:
    case ChangeClass::DeviceOff:
    case ChangeClass::DeviceOn:
        add_if_applies(out, d, StateChange{cls, std::nullopt, std::nullopt, std::nullopt});
        break;
    case ChangeClass::Unknown:
        break;
    }
    return out;
}

double option_score(const SignatureEntry& sig, const Option& o, const ChangeFeature& f, const DetectConfig& cfg) {
    double amp = 0.0;
    if (sig.amplitude_range_w) {
        amp = band_score(f.amplitude_w, *sig.amplitude_range_w, cfg.amplitude_tolerance_w);
    }
    if (sig.model_derived && o.predicted_w) {
        amp = std::max(amp, model_score(f.amplitude_w, *o.predicted_w, cfg));
    }
    double dur = 1.0;
    if (sig.duration_range_s) {
        dur = sig.duration_range_s->contains(f.duration_s) ? 1.0 : 0.0;
    }
    return amp * dur * sig.prior_weight * o.recency;
}

} // namespace

void DetectConfig::validate() const {
    if (min_score <= 0.0 || min_score > 1.0) {
        throw ValidationError("min_score", "must be in (0, 1]");
    }
    if (tie_gap < 0.0) {
        throw ValidationError("tie_gap", "must not be negative");
    }
    if (amplitude_tolerance_w <= 0.0) {
        throw ValidationError("amplitude_tolerance_w", "must be positive");
    }
    if (model_relative_tolerance <= 0.0) {
        throw ValidationError("model_relative_tolerance", "must be positive");
    }
    if (lpi_revert_horizon_s <= 0.0) {
        throw ValidationError("lpi_revert_horizon_s", "must be positive");
    }
}

double band_score(double amplitude, const ValueRange& band, double tolerance) {
    const double half = (band.hi - band.lo) / 2.0;
    const double mid = band.lo + half;
    if (band.contains(amplitude)) {
        return half > 0.0 ? 1.0 - 0.5 * std::abs(amplitude - mid) / half : 1.0;
    }
    const double dist = amplitude < band.lo ? band.lo - amplitude : amplitude - band.hi;
    return 0.5 * std::max(0.0, 1.0 - dist / tolerance);
}

double model_score(double amplitude, double predicted, const DetectConfig& config) {
    const double scale = std::max(config.amplitude_tolerance_w, config.model_relative_tolerance * std::abs(predicted));
    return std::max(0.0, 1.0 - std::abs(amplitude - predicted) / scale);
}

DetectionEvent detect(const std::string& device_id, const DeviceEntry& device, const ChangeFeature& feature,
                      const KnowledgeBase& kb, const DetectConfig& config, TimestampMs now_ms) {
    const auto signatures = kb.signatures();
    if (signatures.empty()) {
        throw ContractError("detect: knowledge base has no signatures");
    }
    const auto watch = open_lpi_watch(device_id, device, feature, kb, config);

    DetectionEvent ev;
    ev.device_id = device_id;
    ev.feature = feature;
    ev.detected_at_ms = now_ms;

    for (const auto& sig : signatures) {
        if (sig.shape != feature.kind || !sig.applies_to(device.snapshot.device_class)) {
            continue;
        }
        std::optional<Candidate> best;
        double best_miss = 0.0;
        for (const auto& o : options(sig.change_class, device, watch)) {
            const double score = option_score(sig, o, feature, config);
            const double miss = o.predicted_w ? std::abs(feature.amplitude_w - *o.predicted_w) : 0.0;
            // Equal scores go to the closer model prediction, then to a
            // revert, then to the lowest port id (first seen).
            const bool better = !best || score > best->score ||
                                (score == best->score &&
                                 (miss < best_miss || (miss == best_miss && o.reverts && !best->reverts_event)));
            if (better) {
                StateChange change = o.change;
                change.observed = Milliwatts::from_watts(feature.amplitude_w);
                best = Candidate{sig.change_class, score, change, o.reverts};
                best_miss = miss;
            }
        }
        if (best && best->score > 0.0) {
            ev.candidates.push_back(std::move(*best));
        }
    }

    std::stable_sort(ev.candidates.begin(), ev.candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });

    if (ev.candidates.empty() || ev.candidates.front().score < config.min_score) {
        Candidate unknown{ChangeClass::Unknown, config.min_score,
                          StateChange{ChangeClass::Unknown, std::nullopt, std::nullopt,
                                      Milliwatts::from_watts(feature.amplitude_w)},
                          std::nullopt};
        ev.candidates.insert(ev.candidates.begin(), unknown);
        ev.chosen = ChangeClass::Unknown;
        ev.note = "no signature reached the minimum score";
        return ev;
    }
    ev.chosen = ev.candidates.front().change_class;
    ev.ambiguous = ev.candidates.size() > 1 && ev.candidates[0].score - ev.candidates[1].score < config.tie_gap;
    return ev;
}

} // namespace ws::fdi
