#include "wattsentinel/fdi/knowledge_base.hpp"

#include "wattsentinel/errors.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

namespace ws::fdi {

using nlohmann::json;

namespace {

constexpr std::initializer_list<DeviceClass> kPortDevices{DeviceClass::switch_, DeviceClass::router};
constexpr std::initializer_list<DeviceClass> kAllDevices{DeviceClass::switch_, DeviceClass::router, DeviceClass::host,
                                                         DeviceClass::access_point};

SignatureEntry entry(ChangeClass cls, ShapeKind shape, std::optional<ValueRange> amp, bool model_derived,
                     std::optional<ValueRange> dur, std::initializer_list<DeviceClass> classes, double prior) {
    return SignatureEntry{cls, shape, amp, model_derived, dur, std::vector<DeviceClass>(classes), prior};
}

std::optional<ValueRange> read_range(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) {
        return std::nullopt;
    }
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
        throw ValidationError(key, "expected [lo, hi]");
    }
    return ValueRange{(*it)[0].get<double>(), (*it)[1].get<double>()};
}

} // namespace

std::string_view to_string(ShapeKind k) {
    switch (k) {
    case ShapeKind::step: return "step";
    case ShapeKind::spike: return "spike";
    case ShapeKind::burst_then_step: return "burst_then_step";
    }
    return "?";
}

std::optional<ShapeKind> parse_shape(std::string_view s) {
    for (auto k : {ShapeKind::step, ShapeKind::spike, ShapeKind::burst_then_step}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::fault: return "fault";
    case Verdict::misconfiguration: return "misconfiguration";
    case Verdict::benign_state_change: return "benign_state_change";
    }
    return "?";
}

std::optional<Verdict> parse_verdict(std::string_view s) {
    for (auto v : {Verdict::fault, Verdict::misconfiguration, Verdict::benign_state_change}) {
        if (to_string(v) == s) {
            return v;
        }
    }
    return std::nullopt;
}

void SignatureEntry::validate() const {
    const std::string field = "signature." + std::string(powermodel::to_string(change_class));
    if (change_class == ChangeClass::Unknown) {
        throw ValidationError(field, "Unknown is not a signature class");
    }
    if (amplitude_range_w && amplitude_range_w->lo > amplitude_range_w->hi) {
        throw ValidationError(field + ".amplitude_range_w", "lo > hi");
    }
    if (!amplitude_range_w && !model_derived) {
        throw ValidationError(field, "needs a static amplitude range or a model-derived amplitude");
    }
    if ((shape == ShapeKind::step) == duration_range_s.has_value()) {
        throw ValidationError(field + ".duration_range_s", "required exactly when the shape is not a step");
    }
    if (duration_range_s && duration_range_s->lo > duration_range_s->hi) {
        throw ValidationError(field + ".duration_range_s", "lo > hi");
    }
    if (prior_weight <= 0.0) {
        throw ValidationError(field + ".prior_weight", "must be positive");
    }
    if (applicable_classes.empty()) {
        throw ValidationError(field + ".applicable_classes", "must not be empty");
    }
}

bool SignatureEntry::applies_to(DeviceClass c) const {
    return std::find(applicable_classes.begin(), applicable_classes.end(), c) != applicable_classes.end();
}

KnowledgeBase::KnowledgeBase(std::vector<SignatureEntry> signatures) : signatures_(std::move(signatures)) {
    for (const auto& s : signatures_) {
        s.validate();
    }
}

KnowledgeBase::KnowledgeBase(const KnowledgeBase& other) {
    std::lock_guard lock(other.mutex_);
    signatures_ = other.signatures_;
    history_ = other.history_;
    version_ = other.version_;
}

KnowledgeBase& KnowledgeBase::operator=(const KnowledgeBase& other) {
    if (this != &other) {
        KnowledgeBase copy(other);
        std::lock_guard lock(mutex_);
        signatures_ = std::move(copy.signatures_);
        history_ = std::move(copy.history_);
        version_ = copy.version_;
    }
    return *this;
}

KnowledgeBase KnowledgeBase::defaults() {
    using C = ChangeClass;
    using S = ShapeKind;
    const ValueRange burst_duration{1.0, 10.0};
    return KnowledgeBase({
        entry(C::PortDown, S::step, ValueRange{-0.4, -0.3}, true, std::nullopt, kPortDevices, 1.0),
        entry(C::PortUp, S::step, ValueRange{0.3, 0.4}, true, std::nullopt, kPortDevices, 1.0),
        entry(C::LinkRateDown, S::step, ValueRange{-0.4, -0.2}, true, std::nullopt, kPortDevices, 0.9),
        entry(C::LinkRateUp, S::step, ValueRange{0.2, 0.4}, true, std::nullopt, kPortDevices, 0.9),
        entry(C::LinkRateNoop, S::step, ValueRange{-0.05, 0.05}, false, std::nullopt, kPortDevices, 1.0),
        entry(C::EEE_LPI_Enter, S::step, ValueRange{-0.4, -0.3}, true, std::nullopt, kPortDevices, 0.8),
        entry(C::EEE_LPI_Exit, S::step, ValueRange{0.3, 0.4}, true, std::nullopt, kPortDevices, 0.8),
        entry(C::STPReevaluation, S::spike, ValueRange{0.0, 1.1}, true, ValueRange{1.0, 5.0},
              {DeviceClass::switch_}, 1.0),
        entry(C::Sleep, S::step, std::nullopt, true, std::nullopt, kAllDevices, 1.0),
        entry(C::Wake, S::burst_then_step, std::nullopt, true, burst_duration, kAllDevices, 1.0),
        entry(C::DeviceOff, S::step, std::nullopt, true, std::nullopt, kAllDevices, 1.0),
        entry(C::DeviceOn, S::burst_then_step, std::nullopt, true, burst_duration, kAllDevices, 1.0),
    });
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open knowledge base " + path.string(), 0);
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw LoadError(path.string() + ": " + e.what(), 0);
    }
    return from_json(doc);
}

KnowledgeBase KnowledgeBase::from_json(const json& doc) {
    const json& list = doc.is_object() ? doc.at("signatures") : doc;
    if (!list.is_array()) {
        throw ValidationError("signatures", "expected an array");
    }
    std::vector<SignatureEntry> sigs;
    for (const auto& item : list) {
        SignatureEntry s;
        const auto cls = powermodel::parse_change_class(item.at("class").get<std::string>());
        if (!cls) {
            throw ValidationError("signature.class", "unknown class " + item.at("class").get<std::string>());
        }
        s.change_class = *cls;
        const auto shape = parse_shape(item.at("shape").get<std::string>());
        if (!shape) {
            throw ValidationError("signature.shape", "unknown shape");
        }
        s.shape = *shape;
        s.amplitude_range_w = read_range(item, "amplitude_range_w");
        s.duration_range_s = read_range(item, "duration_range_s");
        s.model_derived = item.value("model_derived", false);
        s.prior_weight = item.value("prior_weight", 1.0);
        for (const auto& c : item.at("applicable_classes")) {
            const auto dc = powermodel::parse_device_class(c.get<std::string>());
            if (!dc) {
                throw ValidationError("signature.applicable_classes", "unknown device class " + c.get<std::string>());
            }
            s.applicable_classes.push_back(*dc);
        }
        sigs.push_back(std::move(s));
    }
    return KnowledgeBase(std::move(sigs));
}

json KnowledgeBase::to_json() const {
    std::lock_guard lock(mutex_);
    json list = json::array();
    for (const auto& s : signatures_) {
        json item{{"class", powermodel::to_string(s.change_class)},
                  {"shape", to_string(s.shape)},
                  {"model_derived", s.model_derived},
                  {"prior_weight", s.prior_weight}};
        item["amplitude_range_w"] =
            s.amplitude_range_w ? json::array({s.amplitude_range_w->lo, s.amplitude_range_w->hi}) : json(nullptr);
        item["duration_range_s"] =
            s.duration_range_s ? json::array({s.duration_range_s->lo, s.duration_range_s->hi}) : json(nullptr);
        json classes = json::array();
        for (auto c : s.applicable_classes) {
            classes.push_back(powermodel::to_string(c));
        }
        item["applicable_classes"] = classes;
        list.push_back(item);
    }
    return json{{"signatures", list}};
}

std::vector<SignatureEntry> KnowledgeBase::signatures() const {
    std::lock_guard lock(mutex_);
    return signatures_;
}

std::vector<KbHistoryEntry> KnowledgeBase::history(const std::string& device_id) const {
    std::lock_guard lock(mutex_);
    auto it = history_.find(device_id);
    return it == history_.end() ? std::vector<KbHistoryEntry>{} : it->second;
}

std::uint64_t KnowledgeBase::version() const {
    std::lock_guard lock(mutex_);
    return version_;
}

bool KnowledgeBase::empty() const {
    std::lock_guard lock(mutex_);
    return signatures_.empty();
}

void KnowledgeBase::record(const std::string& device_id, KbHistoryEntry entry) {
    std::lock_guard lock(mutex_);
    history_[device_id].push_back(std::move(entry));
    ++version_;
}

bool KnowledgeBase::mark_corrected(const std::string& device_id, std::uint64_t event_id, ChangeClass to) {
    std::lock_guard lock(mutex_);
    auto it = history_.find(device_id);
    if (it == history_.end()) {
        return false;
    }
    for (auto& h : it->second) {
        if (h.event_id == event_id) {
            h.corrected = true;
            h.change_class = to;
            ++version_;
            return true;
        }
    }
    return false;
}

bool KnowledgeBase::set_verdict(const std::string& device_id, std::uint64_t event_id, Verdict verdict) {
    std::lock_guard lock(mutex_);
    auto it = history_.find(device_id);
    if (it == history_.end()) {
        return false;
    }
    for (auto& h : it->second) {
        if (h.event_id == event_id) {
            h.verdict = verdict;
            ++version_;
            return true;
        }
    }
    return false;
}

void KnowledgeBase::replace_signature(const SignatureEntry& entry) {
    entry.validate();
    std::lock_guard lock(mutex_);
    auto it = std::find_if(signatures_.begin(), signatures_.end(),
                           [&](const SignatureEntry& s) { return s.change_class == entry.change_class; });
    if (it == signatures_.end()) {
        signatures_.push_back(entry);
    } else {
        *it = entry;
    }
    ++version_;
}

} // namespace ws::fdi
