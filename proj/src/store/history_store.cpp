#include "wattsentinel/store/history_store.hpp"

#include "wattsentinel/errors.hpp"
#include "wattsentinel/fdi/report.hpp"
#include "wattsentinel/store/serialization.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <mutex>
#include <tuple>

namespace ws::store {

namespace {

constexpr std::array<std::pair<RecordKind, std::string_view>, 6> kKinds{{
    {RecordKind::power_total, "power_total"},
    {RecordKind::power_socket, "power_socket"},
    {RecordKind::state_snapshot, "state_snapshot"},
    {RecordKind::detection, "detection"},
    {RecordKind::isolation, "isolation"},
    {RecordKind::correction, "correction"},
}};

std::size_t expected_index(RecordKind k) {
    switch (k) {
    case RecordKind::power_total:
    case RecordKind::power_socket: return 0;
    case RecordKind::state_snapshot: return 1;
    case RecordKind::detection: return 2;
    case RecordKind::isolation: return 3;
    case RecordKind::correction: return 4;
    }
    return 0;
}

} // namespace

std::string_view to_string(RecordKind k) {
    for (const auto& [kind, name] : kKinds) {
        if (kind == k) {
            return name;
        }
    }
    return "?";
}

std::optional<RecordKind> parse_kind(std::string_view s) {
    for (const auto& [kind, name] : kKinds) {
        if (name == s) {
            return kind;
        }
    }
    return std::nullopt;
}

void HistoryRecord::validate() const {
    if (payload.index() != expected_index(kind)) {
        throw ValidationError("payload", "payload type does not match kind " + std::string(to_string(kind)));
    }
    if (key.empty()) {
        throw ValidationError("key", "must not be empty");
    }
}

std::uint64_t HistoryRecord::discriminator() const {
    return std::visit(
        [](const auto& p) -> std::uint64_t {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, fdi::DetectionEvent> || std::is_same_v<T, fdi::IsolationResult>) {
                return p.event_id;
            } else if constexpr (std::is_same_v<T, fdi::CorrectionRecord>) {
                return p.corrects_event_id;
            } else {
                return 0;
            }
        },
        payload);
}

std::string socket_key(const powermodel::SocketRef& socket) { return socket.str(); }

std::string event_key(const fdi::DetectionEvent& ev) {
    return ev.unbound_socket() ? ev.socket.str() : ev.device_id;
}

HistoryRecord total_record(const std::string& pdu_id, TimestampMs ts, Milliwatts power) {
    return HistoryRecord{RecordKind::power_total, pdu_id, ts, PowerReading{power}};
}

HistoryRecord socket_record(const powermodel::SocketRef& socket, TimestampMs ts, Milliwatts power) {
    return HistoryRecord{RecordKind::power_socket, socket_key(socket), ts, PowerReading{power}};
}

HistoryRecord snapshot_record(const powermodel::DeviceStateSnapshot& snapshot, TimestampMs ts) {
    return HistoryRecord{RecordKind::state_snapshot, snapshot.device_id, ts, snapshot};
}

HistoryRecord detection_record(const fdi::DetectionEvent& ev) {
    return HistoryRecord{RecordKind::detection, event_key(ev), ev.feature.onset_ms, ev};
}

HistoryRecord isolation_record(const fdi::IsolationResult& r) {
    return HistoryRecord{RecordKind::isolation, r.device_id, r.resolved_at_ms, r};
}

HistoryRecord correction_record(const fdi::CorrectionRecord& c) {
    return HistoryRecord{RecordKind::correction, c.device_id, c.at_ms, c};
}

HistoryStore::HistoryStore(StoreOptions options) : options_(std::move(options)) {
    if (!options_.journal) {
        return;
    }
    const auto& path = *options_.journal;
    // Only regular files hold records; a device node is written to but not read.
    if (std::filesystem::is_regular_file(path)) {
        std::ifstream in(path);
        if (!in) {
            throw StoreError("cannot read journal " + path.string());
        }
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.empty()) {
                continue;
            }
            try {
                auto rec = record_from_json(nlohmann::json::parse(line));
                rec.validate();
                insert(rec);
            } catch (const std::exception& e) {
                // A torn final write is expected after a crash; anything
                // earlier means the journal is damaged.
                if (in.peek() == std::char_traits<char>::eof()) {
                    break;
                }
                throw StoreError("journal " + path.string() + " line " + std::to_string(n) + ": " + e.what());
            }
        }
    }
    journal_.open(path, std::ios::app);
    if (!journal_) {
        throw StoreError("cannot open journal " + path.string() + " for writing");
    }
}

bool HistoryStore::insert(const HistoryRecord& record) {
    Series& series = index_[{record.kind, record.key}];
    const Identity id{record.timestamp_ms, record.discriminator()};
    if (auto it = series.find(id); it != series.end()) {
        if (it->second == record) {
            return false;
        }
        throw ValidationError("timestamp_ms", "a different " + std::string(to_string(record.kind)) + " record for " +
                                                  record.key + " at " + std::to_string(record.timestamp_ms) +
                                                  " already exists");
    }
    series.emplace(id, record);
    ++count_;
    if (options_.per_key_cap > 0 && series.size() > options_.per_key_cap) {
        series.erase(series.begin());
        --count_;
    }
    return true;
}

void HistoryStore::append(const HistoryRecord& record) {
    record.validate();
    std::unique_lock lock(mutex_);
    Series& series = index_[{record.kind, record.key}];
    const Identity id{record.timestamp_ms, record.discriminator()};
    if (auto it = series.find(id); it != series.end()) {
        if (it->second == record) {
            return;
        }
        insert(record);  // throws the conflict
    }
    if (journal_.is_open()) {
        journal_ << to_json(record).dump() << '\n';
        journal_.flush();
        if (!journal_) {
            journal_.clear();
            throw StoreError("journal write failed for " + options_.journal->string());
        }
    }
    insert(record);
}

std::vector<HistoryRecord> HistoryStore::query_window(RecordKind kind, const std::string& key, TimestampMs from_ms,
                                                      TimestampMs to_ms) const {
    std::shared_lock lock(mutex_);
    std::vector<HistoryRecord> out;
    auto it = index_.find({kind, key});
    if (it == index_.end() || from_ms > to_ms) {
        return out;
    }
    const auto& series = it->second;
    for (auto r = series.lower_bound({from_ms, 0}); r != series.end() && r->first.first <= to_ms; ++r) {
        out.push_back(r->second);
    }
    return out;
}

std::vector<HistoryRecord> HistoryStore::query_kind(RecordKind kind, TimestampMs from_ms, TimestampMs to_ms) const {
    std::shared_lock lock(mutex_);
    std::vector<HistoryRecord> out;
    if (from_ms > to_ms) {
        return out;
    }
    for (auto it = index_.lower_bound({kind, std::string()}); it != index_.end() && it->first.first == kind; ++it) {
        const auto& series = it->second;
        for (auto r = series.lower_bound({from_ms, 0}); r != series.end() && r->first.first <= to_ms; ++r) {
            out.push_back(r->second);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const HistoryRecord& a, const HistoryRecord& b) {
        return std::make_tuple(a.timestamp_ms, std::cref(a.key), a.discriminator()) <
               std::make_tuple(b.timestamp_ms, std::cref(b.key), b.discriminator());
    });
    return out;
}

std::vector<std::string> HistoryStore::keys(RecordKind kind) const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (auto it = index_.lower_bound({kind, std::string()}); it != index_.end() && it->first.first == kind; ++it) {
        out.push_back(it->first.second);
    }
    return out;
}

std::size_t HistoryStore::size() const {
    std::shared_lock lock(mutex_);
    return count_;
}

std::optional<TimestampMs> HistoryStore::last_timestamp() const {
    std::shared_lock lock(mutex_);
    std::optional<TimestampMs> last;
    for (const auto& [_, series] : index_) {
        if (!series.empty() && (!last || series.rbegin()->first.first > *last)) {
            last = series.rbegin()->first.first;
        }
    }
    return last;
}

std::string HistoryStore::export_report(TimestampMs from_ms, TimestampMs to_ms) const {
    std::vector<fdi::DetectionEvent> detections;
    std::vector<fdi::IsolationResult> isolations;
    std::vector<fdi::CorrectionRecord> corrections;
    for (const auto& r : query_kind(RecordKind::detection, from_ms, to_ms)) {
        detections.push_back(std::get<fdi::DetectionEvent>(r.payload));
    }
    for (const auto& r : query_kind(RecordKind::correction, from_ms, to_ms)) {
        corrections.push_back(std::get<fdi::CorrectionRecord>(r.payload));
    }
    constexpr auto kAll = std::numeric_limits<TimestampMs>::max();
    for (const auto& r : query_kind(RecordKind::isolation, std::numeric_limits<TimestampMs>::min(), kAll)) {
        isolations.push_back(std::get<fdi::IsolationResult>(r.payload));
    }
    return fdi::report_csv(detections, isolations, corrections);
}

void HistoryStore::flush() {
    std::unique_lock lock(mutex_);
    if (journal_.is_open()) {
        journal_.flush();
    }
}

} // namespace ws::store
