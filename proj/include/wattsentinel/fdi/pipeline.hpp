#pragma once

#include "wattsentinel/fdi/detect.hpp"
#include "wattsentinel/fdi/isolate.hpp"
#include "wattsentinel/fdi/knowledge_base.hpp"
#include "wattsentinel/fdi/segment.hpp"
#include "wattsentinel/fdi/types.hpp"
#include "wattsentinel/powermodel/lifecycle.hpp"
#include "wattsentinel/powermodel/registry.hpp"
#include "wattsentinel/store/history_store.hpp"
#include "wattsentinel/telemetry/poller.hpp"

#include <deque>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace ws::fdi {

struct PipelineConfig {
    double theta_w{0.1};
    int window_samples{10};
    double spike_max_duration_s{5.0};
    double return_band_w{0.05};
    int verify_samples{15};
    double min_score{0.25};
    double burst_factor{1.5};
    double tie_gap{0.05};
    double lpi_revert_horizon_s{60.0};
    /// Probes per PDU used to re-measure every device's current level before
    /// detection starts; 0 trusts the configured models as they are.
    int calibration_samples{60};
    double adopt_fraction{0.2};
    double amplitude_tolerance_w{0.06};
    double model_relative_tolerance{0.1};
    std::int64_t period_ms{1000};
    IsolationPolicy policy;
    std::vector<powermodel::ClassRange> class_ranges{powermodel::default_class_ranges()};

    void validate() const;
    [[nodiscard]] SegmentConfig segment_config() const;
    [[nodiscard]] DetectConfig detect_config() const;
    [[nodiscard]] Milliwatts theta() const { return Milliwatts::from_watts(theta_w); }
};

using PipelineOutput = std::variant<DetectionEvent, IsolationResult, CorrectionRecord, Warning>;

/// Detection and isolation over probe streams. Keeps one state machine per socket:
/// idle until its residual leaves the band, then it collects a window,
/// segments and detects, installs the recomputed model, and verifies the
/// residual before issuing a verdict. Not thread safe; callers feeding
/// several PDUs from several threads serialize calls.
class Pipeline {
public:
    Pipeline(powermodel::ModelRegistry& registry, KnowledgeBase& kb, store::HistoryStore* store,
             PipelineConfig config, std::map<std::string, powermodel::LifecycleAccount> accounts = {});

    std::vector<PipelineOutput> process(const telemetry::ProbeResponse& probe);
    /// Discontinuity on one PDU: histories restart, pending analyses drop.
    std::vector<PipelineOutput> gap(const std::string& pdu_id, TimestampMs timestamp_ms);
    std::vector<PipelineOutput> handle(const telemetry::PollEvent& event);

    [[nodiscard]] const std::map<std::string, powermodel::LifecycleAccount>& accounts() const { return accounts_; }
    [[nodiscard]] bool degraded() const { return degraded_; }
    [[nodiscard]] bool calibrated(const std::string& pdu_id) const;
    [[nodiscard]] const PipelineConfig& config() const { return config_; }

private:
    enum class Phase { idle, analyzing, verifying };

    struct SocketState {
        Phase phase{Phase::idle};
        std::deque<PowerSample> history;
        std::size_t post_samples{0};
        std::vector<IsolationPlan> plans;
        std::vector<Residual> verification;
        bool unknown_reported{false};
        std::optional<powermodel::UsagePoint> last_usage;
    };

    struct PduState {
        int calibration_seen{0};
        std::map<int, std::int64_t> calibration_sum;
        std::optional<TimestampMs> last_ts;
        std::map<int, SocketState> sockets;
    };

    struct Revertible {
        powermodel::DeviceEntry before;
        StateChange change;
        TimestampMs at_ms{0};
    };

    using Out = std::vector<PipelineOutput>;

    void reset_histories(PduState& pdu);
    void finish_calibration(const std::string& pdu_id, PduState& pdu, TimestampMs ts, Out& out);
    void report_unbound(const SocketRef& socket, Milliwatts power, TimestampMs ts, const std::string& note, Out& out);
    void analyze(const SocketRef& socket, const std::string& device_id, SocketState& state, TimestampMs ts, Out& out);
    void conclude(const SocketRef& socket, SocketState& state, TimestampMs ts, Out& out);
    void apply_correction(const DetectionEvent& ev, const Candidate& chosen, Out& out);
    void shift_offset(const std::string& device_id, Milliwatts delta);
    void emit(const DetectionEvent& ev, Out& out);
    void emit(const IsolationResult& r, Out& out);
    void save(const store::HistoryRecord& record, Out& out);

    powermodel::ModelRegistry& registry_;
    KnowledgeBase& kb_;
    store::HistoryStore* store_;
    PipelineConfig config_;
    SegmentConfig segment_config_;
    DetectConfig detect_config_;
    std::map<std::string, powermodel::LifecycleAccount> accounts_;
    std::map<std::string, PduState> pdus_;
    std::map<std::uint64_t, Revertible> revertible_;
    std::uint64_t next_event_id_{1};
    bool degraded_{false};
};

} // namespace ws::fdi
