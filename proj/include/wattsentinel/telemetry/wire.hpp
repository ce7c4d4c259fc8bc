#pragma once

#include "wattsentinel/telemetry/probe.hpp"

#include <string>
#include <string_view>

namespace ws::telemetry {

// One record per line:
// {"pdu":"<id>","ts_ms":<int>,"sockets":[{"id":<int>,"mA":<int>,"V":<dec>,"pf":<dec>}...],"total":{"mA":<int>,"V":<dec>,"pf":<dec>}}
// Decimals carry at most three fractional digits.

struct ParseOptions {
    Milliwatts aggregate_tolerance{0};
};

/// Throws ParseError (with byte offset) on malformed input and
/// ValidationError (naming the field) on invariant violations.
ProbeResponse parse_probe(std::string_view line, const ParseOptions& options = {});

/// Encodes without a trailing newline. Throws ValidationError if `probe`
/// breaks an invariant, including an aggregate mismatch beyond `aggregate_tolerance`.
std::string encode_probe(const ProbeResponse& probe, Milliwatts aggregate_tolerance = Milliwatts{0});

} // namespace ws::telemetry
