#include "wattsentinel/telemetry/probe.hpp"

#include "wattsentinel/errors.hpp"

#include <algorithm>
#include <set>

namespace ws::telemetry {

namespace {

constexpr std::int64_t kScale = 1'000'000; // mA * mV * mpf / kScale = mW

std::int64_t round_div(std::int64_t num, std::int64_t den) {
    // Half away from zero; den > 0.
    if (num >= 0) {
        return (num + den / 2) / den;
    }
    return -((-num + den / 2) / den);
}

std::int64_t power_mw(std::int64_t ma, std::int64_t mv, std::int64_t mpf) {
    return round_div(ma * mv * mpf, kScale);
}

} // namespace

const SocketSample* ProbeResponse::socket(int socket_id) const {
    auto it = std::find_if(sockets.begin(), sockets.end(),
                           [socket_id](const SocketSample& s) { return s.socket_id == socket_id; });
    return it == sockets.end() ? nullptr : &*it;
}

void PollConfig::validate() const {
    if (period_ms < kMinPollPeriodMs) {
        throw ValidationError("period_ms", "must be >= " + std::to_string(kMinPollPeriodMs));
    }
}

Milliwatts active_power(const SocketSample& sample) {
    return Milliwatts{power_mw(sample.current_milliamps, sample.voltage.thousandths, sample.power_factor.thousandths)};
}

Milliwatts socket_sum(const ProbeResponse& probe) {
    Milliwatts sum;
    for (const auto& s : probe.sockets) {
        sum += active_power(s);
    }
    return sum;
}

void validate_sample(const SocketSample& sample, std::string_view field, bool aggregate) {
    const std::string prefix(field);
    if (!aggregate && sample.socket_id < 1) {
        throw ValidationError(prefix + ".id", "socket id must be >= 1");
    }
    if (sample.current_milliamps < 0) {
        throw ValidationError(prefix + ".mA", "current must be non-negative");
    }
    if (sample.voltage.thousandths <= 0) {
        throw ValidationError(prefix + ".V", "voltage must be positive");
    }
    if (sample.power_factor.thousandths <= 0 || sample.power_factor.thousandths > 1000) {
        throw ValidationError(prefix + ".pf", "power factor must be in (0, 1]");
    }
}

void validate_probe(const ProbeResponse& probe, Milliwatts aggregate_tolerance) {
    if (probe.pdu_id.empty()) {
        throw ValidationError("pdu", "PDU identifier must not be empty");
    }
    std::set<int> seen;
    for (std::size_t i = 0; i < probe.sockets.size(); ++i) {
        const auto field = "sockets[" + std::to_string(i) + "]";
        validate_sample(probe.sockets[i], field, false);
        if (!seen.insert(probe.sockets[i].socket_id).second) {
            throw ValidationError(field + ".id", "duplicate socket id " + std::to_string(probe.sockets[i].socket_id));
        }
    }
    validate_sample(probe.total, "total", true);
    const Milliwatts mismatch = abs(active_power(probe.total) - socket_sum(probe));
    if (mismatch > aggregate_tolerance) {
        throw ValidationError("total", "aggregate differs from socket sum by " + format_watts(mismatch) + " W");
    }
}

SocketSample synthesize_sample(int socket_id, Milliwatts target, Milli nominal_voltage, Milli nominal_power_factor) {
    SocketSample out;
    out.socket_id = socket_id;
    out.voltage = nominal_voltage;
    out.power_factor = nominal_power_factor;
    if (target.value <= 0) {
        out.current_milliamps = 0;
        return out;
    }

    const std::int64_t p = target.value;
    const std::int64_t v0 = nominal_voltage.thousandths;
    const std::int64_t pf0 = nominal_power_factor.thousandths;
    // mW per mA at nominal V/pf.
    const std::int64_t nominal_per_ma = v0 * pf0;
    std::int64_t ma = std::max<std::int64_t>(1, round_div(p * kScale, nominal_per_ma));

    // pf starts at the value that keeps V nominal; V absorbs the remainder.
    SocketSample best = out;
    std::int64_t best_err = -1;
    for (std::int64_t dma = 0; dma <= 4; ++dma) {
        for (std::int64_t sign : {1, -1}) {
            const std::int64_t cand_ma = ma + sign * dma;
            if (cand_ma < 1 || (dma == 0 && sign < 0)) {
                continue;
            }
            const std::int64_t pf_guess = std::clamp<std::int64_t>(round_div(p * kScale, cand_ma * v0), 100, 1000);
            for (std::int64_t k = 0; k <= 60; ++k) {
                for (std::int64_t pf_sign : {1, -1}) {
                    if (k == 0 && pf_sign < 0) {
                        continue;
                    }
                    const std::int64_t mpf = pf_guess + pf_sign * k;
                    if (mpf < 1 || mpf > 1000) {
                        continue;
                    }
                    const std::int64_t mv_guess = round_div(p * kScale, cand_ma * mpf);
                    for (std::int64_t dv : {0, -1, 1}) {
                        const std::int64_t mv = mv_guess + dv;
                        if (mv <= 0) {
                            continue;
                        }
                        const std::int64_t err = std::abs(power_mw(cand_ma, mv, mpf) - p);
                        if (best_err < 0 || err < best_err) {
                            best_err = err;
                            best.current_milliamps = cand_ma;
                            best.voltage = Milli{mv};
                            best.power_factor = Milli{mpf};
                        }
                        if (err == 0) {
                            return best;
                        }
                    }
                }
            }
        }
    }
    return best;
}

} // namespace ws::telemetry
