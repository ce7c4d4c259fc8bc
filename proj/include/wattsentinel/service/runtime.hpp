#pragma once

#include "wattsentinel/fdi/knowledge_base.hpp"
#include "wattsentinel/fdi/pipeline.hpp"
#include "wattsentinel/powermodel/registry.hpp"
#include "wattsentinel/service/config.hpp"
#include "wattsentinel/sim/sim_source.hpp"
#include "wattsentinel/sim/topology.hpp"
#include "wattsentinel/store/history_store.hpp"
#include "wattsentinel/telemetry/poller.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace ws::service {

/// One server-push message: event name plus JSON data.
struct LiveMessage {
    std::string event;
    std::string data;
};

/// Bounded queue for one live-stream client. A client that falls
/// `limit` messages behind is closed instead of slowing the publisher.
class Subscription {
public:
    explicit Subscription(std::size_t limit) : limit_(limit) {}

    /// Waits up to `timeout`. Empty on timeout or once closed and drained.
    std::optional<LiveMessage> pop(std::chrono::milliseconds timeout);
    [[nodiscard]] bool closed() const;
    [[nodiscard]] bool overflowed() const;
    void close();

private:
    friend class LiveHub;
    /// Never blocks. Returns false when the client is (now) closed.
    bool offer(const LiveMessage& m);

    std::size_t limit_;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<LiveMessage> queue_;
    bool closed_{false};
    bool overflowed_{false};
};

class LiveHub {
public:
    std::shared_ptr<Subscription> subscribe(std::size_t limit);
    void publish(const LiveMessage& m);
    void close_all();
    [[nodiscard]] std::size_t subscribers() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::shared_ptr<Subscription>> subs_;
};

/// Thrown by inject() when the running source is not the simulator.
class NotSimulated : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a monitoring service runs: source, poller, pipeline, store and
/// the live hub. Poll loops feed the pipeline under one lock; API handlers
/// read through the accessors, which take the same lock briefly or go to the
/// store directly.
class Runtime {
public:
    /// Builds the source named by the config. Throws on invalid config,
    /// unreadable files or a journal that cannot be opened.
    explicit Runtime(AppConfig config);
    /// Uses an explicit source (tests, replay).
    Runtime(AppConfig config, std::unique_ptr<telemetry::PowerSource> source);
    ~Runtime();

    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    /// Starts real-time polling in the background.
    void start();
    /// Stops the source loops, then flushes the store and closes live clients.
    void stop();

    /// Feeds one poll event through the pipeline and the live hub.
    void handle(const telemetry::PollEvent& event);

    [[nodiscard]] const AppConfig& config() const { return config_; }
    [[nodiscard]] const sim::Topology& topology() const { return topology_; }
    [[nodiscard]] store::HistoryStore& store() { return *store_; }
    [[nodiscard]] LiveHub& hub() { return hub_; }
    [[nodiscard]] bool simulated() const { return source_->simulated(); }
    [[nodiscard]] bool degraded() const;
    [[nodiscard]] bool running() const;

    /// Queues a scenario action on the simulator. Throws NotSimulated, or
    /// LoadError / ContractError for a bad or inapplicable action.
    void inject(const std::string& action_text);

    [[nodiscard]] std::optional<telemetry::ProbeResponse> latest(const std::string& pdu_id) const;
    [[nodiscard]] std::optional<powermodel::DeviceEntry> device(const std::string& device_id) const;
    [[nodiscard]] std::optional<std::string> device_at(const powermodel::SocketRef& socket) const;
    [[nodiscard]] std::optional<powermodel::SocketRef> socket_of(const std::string& device_id) const;

private:
    void open_store();
    void init(std::unique_ptr<telemetry::PowerSource> source);
    void publish(const std::vector<fdi::PipelineOutput>& outputs);

    AppConfig config_;
    sim::Topology topology_;
    std::unique_ptr<telemetry::PowerSource> source_;
    sim::SimSource* sim_source_{nullptr};
    std::unique_ptr<store::HistoryStore> store_;
    powermodel::ModelRegistry registry_;
    fdi::KnowledgeBase kb_;
    std::unique_ptr<fdi::Pipeline> pipeline_;
    std::unique_ptr<telemetry::Poller> poller_;
    LiveHub hub_;
    mutable std::mutex mutex_;
    std::map<std::string, telemetry::ProbeResponse> latest_;
    bool running_{false};
};

/// Lifecycle accounts seeded from the topology's configured E_m and E_d.
std::map<std::string, powermodel::LifecycleAccount> lifecycle_accounts(const sim::Topology& topology);

/// Source described by the config; the simulator is created by the caller
/// when it needs the concrete type.
std::unique_ptr<telemetry::PowerSource> make_source(const AppConfig& config, const sim::Topology& topology,
                                                    TimestampMs start_ms);

} // namespace ws::service
