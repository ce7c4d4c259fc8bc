#pragma once

#include "wattsentinel/telemetry/source.hpp"

#include <atomic>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace ws::telemetry {

/// A missed poll. Consumers must treat it as a discontinuity.
struct GapMarker {
    TimestampMs timestamp_ms{0};
};

/// The source raised an error for this PDU; polling continues.
struct SourceFailure {
    TimestampMs timestamp_ms{0};
    std::string message;
};

struct StreamEnd {};

using PollItem = std::variant<ProbeResponse, GapMarker, SourceFailure, StreamEnd>;

struct PollEvent {
    std::string pdu_id;
    std::uint64_t tick{0};
    PollItem item;
};

using PollSink = std::function<void(const PollEvent&)>;

enum class PollClock {
    realtime, ///< sleep until each scheduled poll
    virtual_time, ///< poll back to back; schedule timestamps are still assigned
};

/// One polling loop per PDU. Each loop emits to `sink` in tick order; the
/// sink is called concurrently from different PDU loops.
class Poller {
public:
    Poller(PowerSource& source, PollConfig config, PollSink sink, PollClock clock, TimestampMs start_ms);
    ~Poller();

    Poller(const Poller&) = delete;
    Poller& operator=(const Poller&) = delete;

    /// Polls `ticks` times per PDU (0 = until the stream ends or stop()).
    /// Blocks until every loop has finished.
    void run(std::uint64_t ticks);

    /// Starts the loops in the background.
    void start(std::uint64_t ticks = 0);
    void stop();

private:
    void loop(const std::string& pdu_id, std::uint64_t ticks, std::stop_token stop);

    PowerSource& source_;
    PollConfig config_;
    PollSink sink_;
    PollClock clock_;
    TimestampMs start_ms_;
    std::vector<std::jthread> threads_;
};

/// Convenience: polls `ticks` times on a virtual clock and returns each
/// PDU's stream in order.
std::map<std::string, std::vector<PollItem>> poll(PowerSource& source, const PollConfig& config, std::uint64_t ticks,
                                                  TimestampMs start_ms = 0);

} // namespace ws::telemetry
