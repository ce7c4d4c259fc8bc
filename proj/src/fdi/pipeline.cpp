#include "wattsentinel/fdi/pipeline.hpp"

#include "wattsentinel/errors.hpp"
#include "wattsentinel/fdi/residual.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace ws::fdi {

namespace {

using powermodel::DeviceEntry;
using powermodel::DeviceMode;

const Candidate& chosen_of(const DetectionEvent& ev) { return ev.candidates.front(); }

bool lpi_suspect(const DetectionEvent& ev) {
    return ev.chosen == ChangeClass::PortDown &&
           std::any_of(ev.candidates.begin(), ev.candidates.end(),
                       [](const Candidate& c) { return c.change_class == ChangeClass::EEE_LPI_Enter; });
}

} // namespace

void PipelineConfig::validate() const {
    segment_config().validate();
    detect_config().validate();
    if (verify_samples < 1) {
        throw ValidationError("verify_samples", "must be at least 1");
    }
    if (calibration_samples < 0) {
        throw ValidationError("calibration_samples", "must not be negative");
    }
    if (adopt_fraction < 0.0) {
        throw ValidationError("adopt_fraction", "must not be negative");
    }
    if (period_ms < telemetry::kMinPollPeriodMs) {
        throw ValidationError("period_ms", "must be at least 100");
    }
}

SegmentConfig PipelineConfig::segment_config() const {
    return SegmentConfig{theta_w, window_samples, spike_max_duration_s, return_band_w, burst_factor, period_ms};
}

DetectConfig PipelineConfig::detect_config() const {
    return DetectConfig{min_score, tie_gap, amplitude_tolerance_w, model_relative_tolerance, lpi_revert_horizon_s};
}

Pipeline::Pipeline(powermodel::ModelRegistry& registry, KnowledgeBase& kb, store::HistoryStore* store,
                   PipelineConfig config, std::map<std::string, powermodel::LifecycleAccount> accounts)
    : registry_(registry),
      kb_(kb),
      store_(store),
      config_(std::move(config)),
      segment_config_(config_.segment_config()),
      detect_config_(config_.detect_config()),
      accounts_(std::move(accounts)) {
    config_.validate();
    if (kb_.empty()) {
        throw ContractError("pipeline: knowledge base has no signatures");
    }
    for (const auto& id : registry_.device_ids()) {
        accounts_.try_emplace(id);
    }
}

bool Pipeline::calibrated(const std::string& pdu_id) const {
    auto it = pdus_.find(pdu_id);
    return config_.calibration_samples == 0 ||
           (it != pdus_.end() && it->second.calibration_seen >= config_.calibration_samples);
}

void Pipeline::save(const store::HistoryRecord& record, Out& out) {
    if (store_ == nullptr || degraded_) {
        return;
    }
    try {
        store_->append(record);
    } catch (const StoreError& e) {
        degraded_ = true;
        out.emplace_back(Warning{record.timestamp_ms, std::string("history store unavailable, continuing in memory: ") +
                                                          e.what()});
    } catch (const ValidationError& e) {
        out.emplace_back(Warning{record.timestamp_ms, std::string("history record rejected: ") + e.what()});
    }
}

void Pipeline::emit(const DetectionEvent& ev, Out& out) {
    save(store::detection_record(ev), out);
    out.emplace_back(ev);
}

void Pipeline::emit(const IsolationResult& r, Out& out) {
    kb_.set_verdict(r.device_id, r.event_id, r.verdict);
    save(store::isolation_record(r), out);
    if (auto d = registry_.device(r.device_id)) {
        save(store::snapshot_record(d->snapshot, r.resolved_at_ms), out);
    }
    out.emplace_back(r);
}

void Pipeline::shift_offset(const std::string& device_id, Milliwatts delta) {
    if (auto d = registry_.device(device_id)) {
        d->unexplained_offset += delta;
        registry_.replace(device_id, *d);
    }
}

void Pipeline::reset_histories(PduState& pdu) {
    for (auto& [id, s] : pdu.sockets) {
        s.history.clear();
        s.last_usage.reset();
        if (s.phase == Phase::analyzing) {
            s.phase = Phase::idle;
            s.post_samples = 0;
        }
    }
}

std::vector<PipelineOutput> Pipeline::gap(const std::string& pdu_id, TimestampMs timestamp_ms) {
    PduState& pdu = pdus_[pdu_id];
    reset_histories(pdu);
    if (!pdu.last_ts || *pdu.last_ts < timestamp_ms) {
        pdu.last_ts = timestamp_ms;
    }
    return {};
}

std::vector<PipelineOutput> Pipeline::handle(const telemetry::PollEvent& event) {
    return std::visit(
        [&](const auto& item) -> Out {
            using T = std::decay_t<decltype(item)>;
            if constexpr (std::is_same_v<T, telemetry::ProbeResponse>) {
                return process(item);
            } else if constexpr (std::is_same_v<T, telemetry::GapMarker>) {
                return gap(event.pdu_id, item.timestamp_ms);
            } else if constexpr (std::is_same_v<T, telemetry::SourceFailure>) {
                auto out = gap(event.pdu_id, item.timestamp_ms);
                out.emplace_back(Warning{item.timestamp_ms, event.pdu_id + ": " + item.message});
                return out;
            } else {
                return {};
            }
        },
        event.item);
}

void Pipeline::report_unbound(const SocketRef& socket, Milliwatts power, TimestampMs ts, const std::string& note,
                              Out& out) {
    DetectionEvent ev;
    ev.event_id = next_event_id_++;
    ev.socket = socket;
    ev.feature = ChangeFeature{ShapeKind::step, ts, power.watts(), 0.0, 0.0, power.watts()};
    ev.candidates.push_back(Candidate{ChangeClass::Unknown, config_.min_score,
                                      StateChange{ChangeClass::Unknown, std::nullopt, std::nullopt, power},
                                      std::nullopt});
    ev.chosen = ChangeClass::Unknown;
    ev.detected_at_ms = ts;
    ev.note = note;
    emit(ev, out);
}

void Pipeline::finish_calibration(const std::string& pdu_id, PduState& pdu, TimestampMs ts, Out& out) {
    const auto n = static_cast<std::int64_t>(pdu.calibration_seen);
    for (const auto& [socket_id, sum] : pdu.calibration_sum) {
        const SocketRef ref{pdu_id, socket_id};
        const auto mean = Milliwatts{static_cast<std::int64_t>(std::llround(static_cast<double>(sum) / n))};
        const auto device_id = registry_.device_at(ref);
        if (!device_id) {
            if (mean > config_.theta()) {
                const auto cls = powermodel::classify_socket(mean, config_.class_ranges);
                const std::string note =
                    fmt::format("unbound socket drawing {} W; {}", format_watts(mean),
                                cls ? "baseline suggests " + std::string(powermodel::to_string(*cls))
                                    : std::string("no device class matches the baseline"));
                report_unbound(ref, mean, ts, note, out);
                pdu.sockets[socket_id].unknown_reported = true;
            }
            continue;
        }
        DeviceEntry d = *registry_.device(*device_id);
        auto m = d.model;
        switch (d.snapshot.mode) {
        case DeviceMode::operational: {
            Milliwatts ports{0};
            for (const auto& p : d.snapshot.ports) {
                ports += powermodel::port_contribution(m, p);
            }
            m.base = mean - ports;
            break;
        }
        case DeviceMode::sleep: m.sleep = mean; break;
        case DeviceMode::off: m.off = mean; break;
        }
        m.calibrated_at_ms = ts;
        try {
            m.validate();
            d.model = m;
            d.unexplained_offset = Milliwatts{0};
        } catch (const ValidationError&) {
            d.unexplained_offset = mean - powermodel::expected_power(d.model, d.snapshot);
        }
        registry_.replace(*device_id, d);
        save(store::snapshot_record(d.snapshot, ts), out);
    }
}

std::vector<PipelineOutput> Pipeline::process(const telemetry::ProbeResponse& probe) {
    Out out;
    PduState& pdu = pdus_[probe.pdu_id];
    const TimestampMs ts = probe.timestamp_ms;
    if (pdu.last_ts && ts <= *pdu.last_ts) {
        out.emplace_back(Warning{ts, fmt::format("{}: probe at {} is not after {}, dropped", probe.pdu_id, ts,
                                                 *pdu.last_ts)});
        return out;
    }
    if (pdu.last_ts && ts - *pdu.last_ts > config_.period_ms + config_.period_ms / 2) {
        reset_histories(pdu);
    }
    pdu.last_ts = ts;

    save(store::total_record(probe.pdu_id, ts, telemetry::active_power(probe.total)), out);
    for (const auto& s : probe.sockets) {
        save(store::socket_record(SocketRef{probe.pdu_id, s.socket_id}, ts, telemetry::active_power(s)), out);
    }

    const auto residuals = socket_residuals(probe, registry_);
    const bool total_flagged = abs(total_residual(probe, registry_).value()) > config_.theta();
    const auto w = static_cast<std::size_t>(config_.window_samples);
    const std::size_t analysis_len = w + static_cast<std::size_t>(segment_config_.spike_max_samples());

    const bool calibrating = pdu.calibration_seen < config_.calibration_samples;
    if (calibrating) {
        ++pdu.calibration_seen;
    }

    for (const auto& r : residuals) {
        const SocketRef ref{probe.pdu_id, *r.socket_id};
        SocketState& state = pdu.sockets[ref.socket_id];
        const auto device_id = registry_.device_at(ref);

        if (device_id) {
            const powermodel::UsagePoint now{ts, r.measured};
            if (state.last_usage) {
                const std::array<powermodel::UsagePoint, 2> pair{*state.last_usage, now};
                accounts_[*device_id] = powermodel::accumulate_usage(accounts_[*device_id], pair);
            }
            state.last_usage = now;
        }

        state.history.push_back(PowerSample{ts, r.measured});

        if (calibrating) {
            pdu.calibration_sum[ref.socket_id] += r.measured.value;
            if (state.history.size() > w) {
                state.history.pop_front();
            }
            continue;
        }

        if (!device_id) {
            if (!state.unknown_reported && r.measured > config_.theta()) {
                state.unknown_reported = true;
                report_unbound(ref, r.measured, ts,
                               fmt::format("unbound socket drawing {} W", format_watts(r.measured)), out);
            }
            if (state.history.size() > w) {
                state.history.pop_front();
            }
            continue;
        }

        switch (state.phase) {
        case Phase::idle:
            while (state.history.size() > w + 1) {
                state.history.pop_front();
            }
            if (total_flagged && abs(r.value()) > config_.theta() && state.history.size() == w + 1) {
                state.phase = Phase::analyzing;
                state.post_samples = 1;
            }
            break;
        case Phase::analyzing:
            ++state.post_samples;
            if (state.post_samples >= analysis_len) {
                analyze(ref, *device_id, state, ts, out);
            }
            break;
        case Phase::verifying:
            while (state.history.size() > w) {
                state.history.pop_front();
            }
            state.verification.push_back(r);
            if (state.verification.size() >= static_cast<std::size_t>(config_.verify_samples)) {
                conclude(ref, state, ts, out);
            }
            break;
        }
    }

    if (calibrating && pdu.calibration_seen == config_.calibration_samples) {
        finish_calibration(probe.pdu_id, pdu, ts, out);
    }
    return out;
}

void Pipeline::apply_correction(const DetectionEvent& ev, const Candidate& chosen, Out& out) {
    const std::uint64_t original = *chosen.reverts_event;
    auto it = revertible_.find(original);
    if (it == revertible_.end()) {
        return;
    }
    const Revertible& rev = it->second;
    const auto current = registry_.device(ev.device_id);
    if (!current) {
        return;
    }
    StateChange lpi = rev.change;
    lpi.change_class = ChangeClass::EEE_LPI_Enter;
    lpi.to_speed.reset();
    try {
        auto r = powermodel::recompute_parameters(rev.before.model, rev.before.snapshot, lpi, config_.adopt_fraction);
        registry_.replace(ev.device_id, DeviceEntry{r.model, r.snapshot, current->unexplained_offset});
    } catch (const ContractError& e) {
        out.emplace_back(Warning{ev.feature.onset_ms, std::string("LPI correction not applied: ") + e.what()});
        return;
    }
    const double amplitude = rev.change.observed ? rev.change.observed->watts() : 0.0;
    CorrectionRecord c{original,
                       ev.device_id,
                       ev.socket,
                       ChangeClass::PortDown,
                       ChangeClass::EEE_LPI_Enter,
                       amplitude,
                       ev.feature.onset_ms,
                       fmt::format("event {} reclassified: port {} power returned after {:.0f} s, so the port was in "
                                   "low power idle rather than down",
                                   original, rev.change.port.value_or(0),
                                   static_cast<double>(ev.feature.onset_ms - rev.at_ms) / 1000.0)};
    kb_.mark_corrected(ev.device_id, original, ChangeClass::EEE_LPI_Enter);
    revertible_.erase(it);
    save(store::correction_record(c), out);
    out.emplace_back(c);
}

void Pipeline::analyze(const SocketRef& socket, const std::string& device_id, SocketState& state, TimestampMs ts,
                       Out& out) {
    const std::vector<PowerSample> series(state.history.begin(), state.history.end());
    const auto w = static_cast<std::size_t>(config_.window_samples);
    state.phase = Phase::idle;
    state.post_samples = 0;

    auto feature = segment(series, segment_config_);
    if (!feature) {
        // Nothing shaped like a change, but the residual may still sit
        // outside the band (e.g. after a gap hid the transition).
        double sum = 0.0;
        const auto expected = registry_.expected_at(socket);
        for (std::size_t i = series.size() - w; i < series.size(); ++i) {
            sum += (series[i].power - expected).watts();
        }
        const double mean = sum / static_cast<double>(w);
        if (std::abs(mean) > config_.theta_w) {
            shift_offset(device_id, Milliwatts::from_watts(mean));
            out.emplace_back(Warning{ts, fmt::format("{}: level moved by {:.3f} W without a recognizable change",
                                                     device_id, mean)});
        }
        while (state.history.size() > w) {
            state.history.pop_front();
        }
        return;
    }

    auto entry = registry_.device(device_id);
    std::vector<ChangeFeature> features{*feature};
    if (feature->kind == ShapeKind::step) {
        if (auto spike = superimposed_spike(series, *feature, segment_config_)) {
            features.push_back(*spike);
        }
    } else if (feature->kind == ShapeKind::burst_then_step) {
        const auto probe_ev = detect(device_id, *entry, *feature, kb_, detect_config_, ts);
        if (probe_ev.chosen == ChangeClass::Unknown) {
            auto [step, spike] = split_burst(series, *feature);
            features = {step, spike};
        }
    }

    for (const auto& f : features) {
        entry = registry_.device(device_id);
        DetectionEvent ev = detect(device_id, *entry, f, kb_, detect_config_, ts);
        if (ev.chosen == ChangeClass::LinkRateNoop) {
            continue;
        }
        ev.event_id = next_event_id_++;
        ev.socket = socket;
        emit(ev, out);

        std::vector<ChangeClass> classes;
        for (const auto& c : ev.candidates) {
            classes.push_back(c.change_class);
        }
        kb_.record(device_id, KbHistoryEntry{ev.event_id, ev.chosen, chosen_of(ev).change, classes, f.amplitude_w,
                                             f.onset_ms, std::nullopt, false});

        if (ev.chosen == ChangeClass::Unknown) {
            if (f.kind != ShapeKind::spike) {
                shift_offset(device_id, Milliwatts::from_watts(f.amplitude_w));
            }
            IsolationResult r{ev.event_id,
                              device_id,
                              socket,
                              ChangeClass::Unknown,
                              Verdict::fault,
                              false,
                              0.0,
                              fmt::format("{} {:.3f} W on {} matches no known state change", to_string(f.kind),
                                          f.amplitude_w, device_id),
                              ts};
            emit(r, out);
            continue;
        }

        if (chosen_of(ev).reverts_event) {
            apply_correction(ev, chosen_of(ev), out);
        }
        auto plan = begin_isolation(ev, registry_, config_.adopt_fraction);
        if (plan.contract_error.empty()) {
            registry_.replace(device_id, plan.after);
        }
        if (lpi_suspect(ev)) {
            revertible_[ev.event_id] = Revertible{plan.before, chosen_of(ev).change, f.onset_ms};
        }
        state.plans.push_back(std::move(plan));
    }

    const auto horizon = static_cast<TimestampMs>(config_.lpi_revert_horizon_s * 1000.0);
    std::erase_if(revertible_, [&](const auto& kv) { return kv.second.at_ms < ts - 2 * horizon; });

    if (!state.plans.empty()) {
        state.phase = Phase::verifying;
        state.verification.clear();
    }
    while (state.history.size() > w) {
        state.history.pop_front();
    }
}

void Pipeline::conclude(const SocketRef& socket, SocketState& state, TimestampMs ts, Out& out) {
    double signed_sum = 0.0;
    for (const auto& r : state.verification) {
        signed_sum += r.value().watts();
    }
    const double signed_mean = signed_sum / static_cast<double>(state.verification.size());
    bool shifted = false;
    for (const auto& plan : state.plans) {
        auto r = conclude_isolation(plan, state.verification, config_.policy, config_.theta(), ts);
        if (r.verdict == Verdict::fault && !shifted) {
            // Continue detecting from the level actually observed.
            shift_offset(plan.event.device_id, Milliwatts::from_watts(signed_mean));
            shifted = true;
        }
        emit(r, out);
    }
    (void)socket;
    state.plans.clear();
    state.verification.clear();
    state.phase = Phase::idle;
}

} // namespace ws::fdi
