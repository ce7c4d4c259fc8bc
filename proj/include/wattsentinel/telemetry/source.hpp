#pragma once

#include "wattsentinel/telemetry/probe.hpp"
#include "wattsentinel/telemetry/wire.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ws::telemetry {

struct Stall {};
struct EndOfStream {};

using ReadResult = std::variant<ProbeResponse, Stall, EndOfStream>;

/// Anything that can answer a probe for one PDU: the simulator, a recorded
/// trace, or a hardware client.
class PowerSource {
public:
    virtual ~PowerSource() = default;

    [[nodiscard]] virtual std::vector<std::string> pdu_ids() const = 0;

    /// Reading for poll `tick` of `pdu_id`, scheduled at `scheduled_ms`.
    /// Throws SourceError when the device cannot be reached. Must be safe to
    /// call concurrently for different PDUs.
    virtual ReadResult read(const std::string& pdu_id, std::uint64_t tick, TimestampMs scheduled_ms) = 0;

    /// True when the source accepts live fault injection.
    [[nodiscard]] virtual bool simulated() const { return false; }
};

/// Replays a `.ptrace` file. Each PDU's records are served in file order,
/// independent of the poll schedule.
class TraceSource final : public PowerSource {
public:
    /// Parses every line up front. A malformed line ends the trace; the
    /// error is kept in `truncation()` rather than thrown.
    explicit TraceSource(const std::filesystem::path& path, ParseOptions options = {});
    TraceSource(std::istream& in, ParseOptions options = {});

    [[nodiscard]] std::vector<std::string> pdu_ids() const override;
    ReadResult read(const std::string& pdu_id, std::uint64_t tick, TimestampMs scheduled_ms) override;

    /// All parsed records in file order.
    [[nodiscard]] const std::vector<ProbeResponse>& records() const { return records_; }

    struct Truncation {
        std::size_t line{0};
        std::size_t offset{0};
        std::string message;
        bool last_line{false};
    };
    [[nodiscard]] const std::optional<Truncation>& truncation() const { return truncation_; }

private:
    void load(std::istream& in, const ParseOptions& options);

    std::vector<ProbeResponse> records_;
    std::vector<std::string> pdu_order_;
    std::map<std::string, std::deque<std::size_t>> pending_;
    std::optional<Truncation> truncation_;
    std::mutex mutex_;
};

/// Named extension point for a real SNMP client. Every read fails.
class HardwareSource final : public PowerSource {
public:
    HardwareSource(std::string endpoint, std::vector<std::string> pdu_ids);

    [[nodiscard]] std::vector<std::string> pdu_ids() const override { return pdu_ids_; }
    ReadResult read(const std::string& pdu_id, std::uint64_t tick, TimestampMs scheduled_ms) override;

private:
    std::string endpoint_;
    std::vector<std::string> pdu_ids_;
};

} // namespace ws::telemetry
