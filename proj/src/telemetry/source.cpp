#include "wattsentinel/telemetry/source.hpp"

#include "wattsentinel/errors.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

namespace ws::telemetry {

TraceSource::TraceSource(const std::filesystem::path& path, ParseOptions options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SourceError("cannot open trace " + path.string());
    }
    load(in, options);
}

TraceSource::TraceSource(std::istream& in, ParseOptions options) { load(in, options); }

void TraceSource::load(std::istream& in, const ParseOptions& options) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        try {
            records_.push_back(parse_probe(line, options));
        } catch (const ParseError& e) {
            truncation_ = Truncation{line_no, e.offset(), e.what(), false};
        } catch (const ValidationError& e) {
            truncation_ = Truncation{line_no, 0, e.what(), false};
        }
        if (truncation_) {
            std::string rest;
            bool more = false;
            while (std::getline(in, rest)) {
                if (!rest.empty()) {
                    more = true;
                    break;
                }
            }
            truncation_->last_line = !more;
            break;
        }
        const auto& id = records_.back().pdu_id;
        if (pending_.find(id) == pending_.end()) {
            pdu_order_.push_back(id);
        }
        pending_[id].push_back(records_.size() - 1);
    }
}

std::vector<std::string> TraceSource::pdu_ids() const { return pdu_order_; }

ReadResult TraceSource::read(const std::string& pdu_id, std::uint64_t, TimestampMs) {
    std::lock_guard lock(mutex_);
    auto it = pending_.find(pdu_id);
    if (it == pending_.end() || it->second.empty()) {
        return EndOfStream{};
    }
    const std::size_t idx = it->second.front();
    it->second.pop_front();
    return records_[idx];
}

HardwareSource::HardwareSource(std::string endpoint, std::vector<std::string> pdu_ids)
    : endpoint_(std::move(endpoint)), pdu_ids_(std::move(pdu_ids)) {}

ReadResult HardwareSource::read(const std::string& pdu_id, std::uint64_t, TimestampMs) {
    throw SourceError("hardware client for " + pdu_id + " at " + endpoint_ + " is not available in this build");
}

} // namespace ws::telemetry
