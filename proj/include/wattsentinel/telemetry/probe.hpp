#pragma once

#include "wattsentinel/units.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ws::telemetry {

/// One electrical reading. `socket_id` is 0 for the PDU aggregate.
struct SocketSample {
    int socket_id{0};
    std::int64_t current_milliamps{0};
    Milli voltage{230'000};
    Milli power_factor{950};

    bool operator==(const SocketSample&) const = default;
};

struct ProbeResponse {
    std::string pdu_id;
    TimestampMs timestamp_ms{0};
    std::vector<SocketSample> sockets;
    SocketSample total;

    bool operator==(const ProbeResponse&) const = default;

    [[nodiscard]] const SocketSample* socket(int socket_id) const;
};

struct PollConfig {
    std::int64_t period_ms{1000};
    std::vector<std::string> pdu_ids;

    /// Throws ValidationError when period_ms < 100.
    void validate() const;
};

constexpr std::int64_t kMinPollPeriodMs = 100;

/// W = I(A) x V(V) x PF, rounded half away from zero to the milliwatt.
/// Exact: evaluated on integer thousandths, never through floating point.
Milliwatts active_power(const SocketSample& sample);

/// Sum of the per-socket active powers.
Milliwatts socket_sum(const ProbeResponse& probe);

/// Checks the sample invariants; `field` prefixes the error (e.g. "sockets[1]").
void validate_sample(const SocketSample& sample, std::string_view field, bool aggregate);

/// Checks every ProbeResponse invariant except cross-record timestamp order.
void validate_probe(const ProbeResponse& probe, Milliwatts aggregate_tolerance);

/// Chooses (mA, V, pf) near the nominal voltage and power factor so that
/// active_power() of the result equals `target` exactly. Integer milliamps
/// alone are too coarse (1 mA at 230 V is ~0.22 W), so voltage and power
/// factor absorb the remainder.
SocketSample synthesize_sample(int socket_id, Milliwatts target, Milli nominal_voltage = Milli{230'000},
                               Milli nominal_power_factor = Milli{950});

} // namespace ws::telemetry
