#pragma once

#include "wattsentinel/fdi/types.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <nlohmann/json_fwd.hpp>
#include <vector>

namespace ws::fdi {

struct ValueRange {
    double lo{0.0};
    double hi{0.0};

    bool operator==(const ValueRange&) const = default;
    [[nodiscard]] bool contains(double v) const { return v >= lo && v <= hi; }
};

/// A benchmarked power-change pattern.
struct SignatureEntry {
    ChangeClass change_class{ChangeClass::Unknown};
    ShapeKind shape{ShapeKind::step};
    /// Static band from benchmarking; empty for classes whose amplitude
    /// comes only from the device model (mode transitions).
    std::optional<ValueRange> amplitude_range_w;
    /// Also score against the amplitude the device model predicts.
    bool model_derived{false};
    std::optional<ValueRange> duration_range_s;
    std::vector<DeviceClass> applicable_classes;
    double prior_weight{1.0};

    bool operator==(const SignatureEntry&) const = default;

    void validate() const;
    [[nodiscard]] bool applies_to(DeviceClass c) const;
};

/// What the KB remembers about one resolved event.
struct KbHistoryEntry {
    std::uint64_t event_id{0};
    ChangeClass change_class{ChangeClass::Unknown};
    StateChange change;
    std::vector<ChangeClass> candidate_classes;
    double amplitude_w{0.0};
    TimestampMs at_ms{0};
    std::optional<Verdict> verdict;
    bool corrected{false};

    bool operator==(const KbHistoryEntry&) const = default;
};

/// Signature catalogue plus per-device event history. Every mutation bumps
/// the version. Readers get copies.
class KnowledgeBase {
public:
    KnowledgeBase() = default;
    explicit KnowledgeBase(std::vector<SignatureEntry> signatures);
    KnowledgeBase(const KnowledgeBase& other);
    KnowledgeBase& operator=(const KnowledgeBase& other);

    /// Built-in signatures with the measured per-class levels.
    static KnowledgeBase defaults();
    /// Reads a JSON signature list. Throws ValidationError / LoadError.
    static KnowledgeBase load(const std::filesystem::path& path);
    static KnowledgeBase from_json(const nlohmann::json& doc);
    [[nodiscard]] nlohmann::json to_json() const;

    [[nodiscard]] std::vector<SignatureEntry> signatures() const;
    [[nodiscard]] std::vector<KbHistoryEntry> history(const std::string& device_id) const;
    [[nodiscard]] std::uint64_t version() const;
    [[nodiscard]] bool empty() const;

    void record(const std::string& device_id, KbHistoryEntry entry);
    /// Marks an earlier event as corrected to `to`. Returns false if unknown.
    bool mark_corrected(const std::string& device_id, std::uint64_t event_id, ChangeClass to);
    /// Records the isolation verdict of an earlier event. Returns false if unknown.
    bool set_verdict(const std::string& device_id, std::uint64_t event_id, Verdict verdict);
    void replace_signature(const SignatureEntry& entry);

private:
    mutable std::mutex mutex_;
    std::vector<SignatureEntry> signatures_;
    std::map<std::string, std::vector<KbHistoryEntry>> history_;
    std::uint64_t version_{0};
};

} // namespace ws::fdi
