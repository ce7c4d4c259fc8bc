#include "wattsentinel/service/runtime.hpp"

#include "wattsentinel/errors.hpp"
#include "wattsentinel/store/serialization.hpp"

#include <algorithm>

namespace ws::service {

using nlohmann::json;

std::optional<LiveMessage> Subscription::pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) {
        return std::nullopt;
    }
    LiveMessage m = std::move(queue_.front());
    queue_.pop_front();
    return m;
}

bool Subscription::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

bool Subscription::overflowed() const {
    std::lock_guard lock(mutex_);
    return overflowed_;
}

void Subscription::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool Subscription::offer(const LiveMessage& m) {
    bool open = true;
    {
        std::lock_guard lock(mutex_);
        if (closed_) {
            return false;
        }
        if (queue_.size() >= limit_) {
            // Slow reader: drop it rather than buffer without bound.
            closed_ = true;
            overflowed_ = true;
            queue_.clear();
            open = false;
        } else {
            queue_.push_back(m);
        }
    }
    cv_.notify_all();
    return open;
}

std::shared_ptr<Subscription> LiveHub::subscribe(std::size_t limit) {
    auto sub = std::make_shared<Subscription>(limit);
    std::lock_guard lock(mutex_);
    subs_.push_back(sub);
    return sub;
}

void LiveHub::publish(const LiveMessage& m) {
    std::lock_guard lock(mutex_);
    subs_.erase(std::remove_if(subs_.begin(), subs_.end(),
                               [&](const std::shared_ptr<Subscription>& s) { return !s->offer(m); }),
                subs_.end());
}

void LiveHub::close_all() {
    std::lock_guard lock(mutex_);
    for (auto& s : subs_) {
        s->close();
    }
    subs_.clear();
}

std::size_t LiveHub::subscribers() const {
    std::lock_guard lock(mutex_);
    return subs_.size();
}

std::map<std::string, powermodel::LifecycleAccount> lifecycle_accounts(const sim::Topology& topology) {
    std::map<std::string, powermodel::LifecycleAccount> out;
    for (const auto& d : topology.devices) {
        out[d.id] = powermodel::LifecycleAccount{d.e_m_joules, d.e_d_joules, 0};
    }
    return out;
}

std::unique_ptr<telemetry::PowerSource> make_source(const AppConfig& config, const sim::Topology& topology,
                                                    TimestampMs start_ms) {
    switch (config.source) {
    case SourceKind::simulator: {
        sim::FaultScript script;
        if (!config.scenario_path.empty()) {
            script = sim::load_script_file(config.scenario_path, topology);
        }
        auto sc = config.sim_config();
        sc.start_ms = start_ms;
        return std::make_unique<sim::SimSource>(topology, std::move(script), sc);
    }
    case SourceKind::trace:
        return std::make_unique<telemetry::TraceSource>(
            config.trace_path,
            telemetry::ParseOptions{Milliwatts::from_watts(config.aggregate_tolerance_w)});
    case SourceKind::hardware:
        return std::make_unique<telemetry::HardwareSource>(config.hardware_endpoint, topology.pdu_ids());
    }
    throw ContractError("make_source: unknown source kind");
}

namespace {

TimestampMs aligned_now(std::int64_t period_ms) {
    const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
    return now - now % period_ms;
}

json probe_summary(const telemetry::ProbeResponse& probe) {
    json sockets = json::array();
    for (const auto& s : probe.sockets) {
        sockets.push_back({{"id", s.socket_id}, {"power_w", telemetry::active_power(s).watts()}});
    }
    return json{{"pdu", probe.pdu_id},
                {"ts_ms", probe.timestamp_ms},
                {"total_w", telemetry::active_power(probe.total).watts()},
                {"sockets", sockets}};
}

} // namespace

Runtime::Runtime(AppConfig config) : config_(std::move(config)) {
    config_.validate();
    topology_ = sim::Topology::load(config_.topology_path);
    topology_.validate();
    open_store();
    TimestampMs start = aligned_now(config_.sample_period_ms);
    if (auto last = store_->last_timestamp(); last && *last >= start) {
        // A restart inside the journal's last period must not reuse its timestamps.
        start = *last + config_.sample_period_ms;
    }
    init(make_source(config_, topology_, start));
}

Runtime::Runtime(AppConfig config, std::unique_ptr<telemetry::PowerSource> source) : config_(std::move(config)) {
    config_.validate();
    topology_ = sim::Topology::load(config_.topology_path);
    topology_.validate();
    open_store();
    init(std::move(source));
}

void Runtime::open_store() {
    store::StoreOptions opts;
    if (!config_.store_path.empty()) {
        opts.journal = config_.store_path;
    }
    store_ = std::make_unique<store::HistoryStore>(opts);
}

void Runtime::init(std::unique_ptr<telemetry::PowerSource> source) {
    source_ = std::move(source);
    sim_source_ = dynamic_cast<sim::SimSource*>(source_.get());
    registry_ = topology_.registry();
    kb_ = config_.kb_path.empty() ? fdi::KnowledgeBase::defaults() : fdi::KnowledgeBase::load(config_.kb_path);
    pipeline_ = std::make_unique<fdi::Pipeline>(registry_, kb_, store_.get(), config_.pipeline_config(),
                                                lifecycle_accounts(topology_));
}

Runtime::~Runtime() { stop(); }

void Runtime::start() {
    std::lock_guard lock(mutex_);
    if (running_) {
        return;
    }
    telemetry::PollConfig pc{config_.sample_period_ms, source_->pdu_ids()};
    if (pc.pdu_ids.empty()) {
        pc.pdu_ids = topology_.pdu_ids();
    }
    poller_ = std::make_unique<telemetry::Poller>(
        *source_, pc, [this](const telemetry::PollEvent& ev) { handle(ev); }, telemetry::PollClock::realtime,
        std::max(aligned_now(config_.sample_period_ms), store_->last_timestamp().value_or(0) + config_.sample_period_ms));
    poller_->start();
    running_ = true;
}

void Runtime::stop() {
    std::unique_ptr<telemetry::Poller> poller;
    {
        std::lock_guard lock(mutex_);
        poller = std::move(poller_);
        running_ = false;
    }
    if (poller) {
        poller->stop();
        poller.reset();
    }
    if (store_) {
        store_->flush();
    }
    hub_.close_all();
}

bool Runtime::running() const {
    std::lock_guard lock(mutex_);
    return running_;
}

bool Runtime::degraded() const {
    std::lock_guard lock(mutex_);
    return pipeline_->degraded();
}

void Runtime::handle(const telemetry::PollEvent& event) {
    std::vector<fdi::PipelineOutput> outputs;
    std::optional<json> summary;
    {
        std::lock_guard lock(mutex_);
        try {
            outputs = pipeline_->handle(event);
        } catch (const std::exception& e) {
            // A poll thread must survive one bad record.
            outputs.emplace_back(fdi::Warning{0, event.pdu_id + ": " + e.what()});
        }
        if (const auto* probe = std::get_if<telemetry::ProbeResponse>(&event.item)) {
            latest_[probe->pdu_id] = *probe;
            summary = probe_summary(*probe);
        }
    }
    if (summary) {
        hub_.publish(LiveMessage{"probe", summary->dump()});
    }
    if (const auto* gap = std::get_if<telemetry::GapMarker>(&event.item)) {
        hub_.publish(LiveMessage{"gap", json{{"pdu", event.pdu_id}, {"ts_ms", gap->timestamp_ms}}.dump()});
    }
    publish(outputs);
}

void Runtime::publish(const std::vector<fdi::PipelineOutput>& outputs) {
    for (const auto& o : outputs) {
        std::visit(
            [&](const auto& v) {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, fdi::DetectionEvent>) {
                    hub_.publish(LiveMessage{"detection", store::to_json(v).dump()});
                } else if constexpr (std::is_same_v<T, fdi::IsolationResult>) {
                    hub_.publish(LiveMessage{"isolation", store::to_json(v).dump()});
                } else if constexpr (std::is_same_v<T, fdi::CorrectionRecord>) {
                    hub_.publish(LiveMessage{"correction", store::to_json(v).dump()});
                } else {
                    hub_.publish(LiveMessage{
                        "warning", json{{"ts_ms", v.timestamp_ms}, {"message", v.message}}.dump()});
                }
            },
            o);
    }
}

void Runtime::inject(const std::string& action_text) {
    if (sim_source_ == nullptr) {
        throw NotSimulated(std::string("fault injection needs the simulator; the running source is ") +
                           std::string(to_string(config_.source)));
    }
    auto action = sim::parse_action(action_text);
    sim_source_->inject(std::move(action));
}

std::optional<telemetry::ProbeResponse> Runtime::latest(const std::string& pdu_id) const {
    std::lock_guard lock(mutex_);
    auto it = latest_.find(pdu_id);
    return it == latest_.end() ? std::nullopt : std::optional(it->second);
}

std::optional<powermodel::DeviceEntry> Runtime::device(const std::string& device_id) const {
    return registry_.device(device_id);
}

std::optional<std::string> Runtime::device_at(const powermodel::SocketRef& socket) const {
    return registry_.device_at(socket);
}

std::optional<powermodel::SocketRef> Runtime::socket_of(const std::string& device_id) const {
    return registry_.socket_of(device_id);
}

} // namespace ws::service
