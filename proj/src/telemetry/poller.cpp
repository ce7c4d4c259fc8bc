#include "wattsentinel/telemetry/poller.hpp"

#include "wattsentinel/errors.hpp"

#include <chrono>
#include <condition_variable>
#include <limits>
#include <mutex>

namespace ws::telemetry {

Poller::Poller(PowerSource& source, PollConfig config, PollSink sink, PollClock clock, TimestampMs start_ms)
    : source_(source), config_(std::move(config)), sink_(std::move(sink)), clock_(clock), start_ms_(start_ms) {
    config_.validate();
    if (config_.pdu_ids.empty()) {
        config_.pdu_ids = source_.pdu_ids();
    }
}

Poller::~Poller() { stop(); }

void Poller::run(std::uint64_t ticks) {
    start(ticks);
    // Join before clearing: a destroyed jthread requests stop first.
    for (auto& t : threads_) {
        t.join();
    }
    threads_.clear();
}

void Poller::start(std::uint64_t ticks) {
    stop();
    for (const auto& id : config_.pdu_ids) {
        threads_.emplace_back([this, id, ticks](std::stop_token st) { loop(id, ticks, st); });
    }
}

void Poller::stop() {
    for (auto& t : threads_) {
        t.request_stop();
    }
    threads_.clear();
}

void Poller::loop(const std::string& pdu_id, std::uint64_t ticks, std::stop_token stop) {
    using clock = std::chrono::steady_clock;
    const auto wall_start = clock::now();
    TimestampMs last_ts = std::numeric_limits<TimestampMs>::min();

    for (std::uint64_t tick = 0; (ticks == 0 || tick < ticks) && !stop.stop_requested(); ++tick) {
        const TimestampMs scheduled = start_ms_ + static_cast<TimestampMs>(tick) * config_.period_ms;
        if (clock_ == PollClock::realtime) {
            const auto due = wall_start + std::chrono::milliseconds(static_cast<TimestampMs>(tick) * config_.period_ms);
            std::mutex m;
            std::condition_variable_any cv;
            std::unique_lock lk(m);
            cv.wait_until(lk, stop, due, [] { return false; });
            if (stop.stop_requested()) {
                break;
            }
        }

        PollEvent ev{pdu_id, tick, StreamEnd{}};
        try {
            ReadResult r = source_.read(pdu_id, tick, scheduled);
            if (std::holds_alternative<EndOfStream>(r)) {
                sink_(ev);
                return;
            }
            if (auto* probe = std::get_if<ProbeResponse>(&r); probe != nullptr && probe->timestamp_ms > last_ts) {
                last_ts = probe->timestamp_ms;
                ev.item = std::move(*probe);
            } else {
                // Stalls and non-advancing timestamps both become gaps.
                last_ts = std::max(last_ts + 1, scheduled);
                ev.item = GapMarker{last_ts};
            }
        } catch (const SourceError& e) {
            last_ts = std::max(last_ts + 1, scheduled);
            ev.item = SourceFailure{last_ts, e.what()};
        }
        sink_(ev);
    }
    if (ticks != 0 && !stop.stop_requested()) {
        sink_(PollEvent{pdu_id, ticks, StreamEnd{}});
    }
}

std::map<std::string, std::vector<PollItem>> poll(PowerSource& source, const PollConfig& config, std::uint64_t ticks,
                                                  TimestampMs start_ms) {
    std::map<std::string, std::vector<PollItem>> streams;
    std::mutex m;
    auto sink = [&](const PollEvent& ev) {
        std::lock_guard lock(m);
        streams[ev.pdu_id].push_back(ev.item);
    };
    Poller poller(source, config, sink, PollClock::virtual_time, start_ms);
    poller.run(ticks);
    return streams;
}

} // namespace ws::telemetry
