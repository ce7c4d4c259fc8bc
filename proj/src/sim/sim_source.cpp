#include "wattsentinel/sim/sim_source.hpp"

#include "wattsentinel/errors.hpp"

namespace ws::sim {

SimSource::SimSource(Topology topology, FaultScript script, SimConfig config)
    : sim_(std::move(topology), std::move(script), config) {
    pdu_ids_ = sim_.topology().pdu_ids();
}

std::vector<std::string> SimSource::pdu_ids() const { return pdu_ids_; }

telemetry::ReadResult SimSource::read(const std::string& pdu_id, std::uint64_t tick, TimestampMs) {
    std::lock_guard lock(mutex_);
    std::size_t index = pdu_ids_.size();
    for (std::size_t i = 0; i < pdu_ids_.size(); ++i) {
        if (pdu_ids_[i] == pdu_id) {
            index = i;
        }
    }
    if (index == pdu_ids_.size()) {
        throw SourceError("no PDU " + pdu_id + " in the simulated topology");
    }
    while (cache_.find(tick) == cache_.end()) {
        if (sim_.finished() || sim_.tick() > tick) {
            return telemetry::EndOfStream{};
        }
        const std::uint64_t t = sim_.tick();
        cache_[t] = sim_.step();
    }
    // Drop ticks every PDU is past; loops run at most a few ticks apart.
    while (!cache_.empty() && cache_.begin()->first + 64 < tick) {
        cache_.erase(cache_.begin());
    }
    return cache_.at(tick)[index];
}

void SimSource::inject(ScriptAction action) {
    std::lock_guard lock(mutex_);
    sim_.inject(std::move(action));
}

std::map<std::string, Milliwatts> SimSource::device_powers() const {
    std::lock_guard lock(mutex_);
    return sim_.last_power();
}

NetworkState SimSource::network() const {
    std::lock_guard lock(mutex_);
    return sim_.network();
}

} // namespace ws::sim
