#pragma once

#include "wattsentinel/fdi/types.hpp"
#include "wattsentinel/powermodel/model.hpp"
#include "wattsentinel/store/history_store.hpp"

#include <nlohmann/json.hpp>

namespace ws::store {

nlohmann::json to_json(const powermodel::DeviceStateSnapshot& s);
nlohmann::json to_json(const fdi::ChangeFeature& f);
nlohmann::json to_json(const fdi::DetectionEvent& ev);
nlohmann::json to_json(const fdi::IsolationResult& r);
nlohmann::json to_json(const fdi::CorrectionRecord& c);
nlohmann::json to_json(const HistoryRecord& r);

powermodel::DeviceStateSnapshot snapshot_from_json(const nlohmann::json& j);
fdi::DetectionEvent detection_from_json(const nlohmann::json& j);
fdi::IsolationResult isolation_from_json(const nlohmann::json& j);
fdi::CorrectionRecord correction_from_json(const nlohmann::json& j);
/// Throws ValidationError on unknown kinds or missing fields.
HistoryRecord record_from_json(const nlohmann::json& j);

} // namespace ws::store
