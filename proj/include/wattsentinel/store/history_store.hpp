#pragma once

#include "wattsentinel/fdi/types.hpp"
#include "wattsentinel/powermodel/model.hpp"

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ws::store {

enum class RecordKind { power_total, power_socket, state_snapshot, detection, isolation, correction };

std::string_view to_string(RecordKind k);
std::optional<RecordKind> parse_kind(std::string_view s);

struct PowerReading {
    Milliwatts power;

    bool operator==(const PowerReading&) const = default;
};

using Payload = std::variant<PowerReading, powermodel::DeviceStateSnapshot, fdi::DetectionEvent, fdi::IsolationResult,
                             fdi::CorrectionRecord>;

/// Keys: pdu id for power_total, "pdu/socket" for power_socket, device id
/// for the rest (the socket string for events on unbound sockets).
struct HistoryRecord {
    RecordKind kind{RecordKind::power_total};
    std::string key;
    TimestampMs timestamp_ms{0};
    Payload payload;

    bool operator==(const HistoryRecord&) const = default;

    /// Throws ValidationError when the payload type does not fit the kind.
    void validate() const;
    /// Event id for event kinds, 0 otherwise. Two events from one analysis
    /// may share a timestamp, so the id takes part in the identity.
    [[nodiscard]] std::uint64_t discriminator() const;
};

std::string socket_key(const powermodel::SocketRef& socket);
std::string event_key(const fdi::DetectionEvent& ev);

HistoryRecord total_record(const std::string& pdu_id, TimestampMs ts, Milliwatts power);
HistoryRecord socket_record(const powermodel::SocketRef& socket, TimestampMs ts, Milliwatts power);
HistoryRecord snapshot_record(const powermodel::DeviceStateSnapshot& snapshot, TimestampMs ts);
HistoryRecord detection_record(const fdi::DetectionEvent& ev);
HistoryRecord isolation_record(const fdi::IsolationResult& r);
HistoryRecord correction_record(const fdi::CorrectionRecord& c);

struct StoreOptions {
    /// Append-only JSON-lines journal. Existing records are loaded on open.
    std::optional<std::filesystem::path> journal;
    /// Keep at most this many records per (kind, key); 0 = unbounded.
    std::size_t per_key_cap{0};
};

/// Append-only history with an in-memory index and an optional journal.
/// Many readers, one writer at a time.
class HistoryStore {
public:
    explicit HistoryStore(StoreOptions options = {});

    HistoryStore(const HistoryStore&) = delete;
    HistoryStore& operator=(const HistoryStore&) = delete;

    /// Idempotent for exact duplicates. Throws ValidationError for a bad
    /// payload or a different record under the same identity, StoreError
    /// when the journal cannot be written (the record is then not indexed).
    void append(const HistoryRecord& record);

    /// Records of one key in [from, to], timestamp ascending.
    [[nodiscard]] std::vector<HistoryRecord> query_window(RecordKind kind, const std::string& key, TimestampMs from_ms,
                                                          TimestampMs to_ms) const;
    /// All keys of a kind in [from, to], ordered by (timestamp, key, id).
    [[nodiscard]] std::vector<HistoryRecord> query_kind(RecordKind kind, TimestampMs from_ms, TimestampMs to_ms) const;
    [[nodiscard]] std::vector<std::string> keys(RecordKind kind) const;
    [[nodiscard]] std::size_t size() const;
    /// Latest timestamp of any record, e.g. to resume a journal after a restart.
    [[nodiscard]] std::optional<TimestampMs> last_timestamp() const;

    /// CSV report of the detections and corrections in [from, to].
    [[nodiscard]] std::string export_report(TimestampMs from_ms, TimestampMs to_ms) const;

    void flush();

private:
    using Identity = std::pair<TimestampMs, std::uint64_t>;
    using Series = std::map<Identity, HistoryRecord>;

    bool insert(const HistoryRecord& record);

    StoreOptions options_;
    mutable std::shared_mutex mutex_;
    std::map<std::pair<RecordKind, std::string>, Series> index_;
    std::size_t count_{0};
    std::ofstream journal_;
};

} // namespace ws::store
