#pragma once

// JSON views of engine results shared by the HTTP service and the CLI.
// Doubles are emitted in shortest round-trip form, so every value parses
// back to the identical binary64.

#include "steerlens/concepts.hpp"
#include "steerlens/engine.hpp"

#include <json.hpp>

namespace steerlens::json {

using Json = nlohmann::ordered_json;

Json to_json(const Prediction& p);
Json to_json(const SteeringConfig& s);
Json to_json(const ImpactReport& r);
Json to_json(const std::vector<DosePoint>& curve);
Json to_json(const AttributionResult& r, std::size_t limit);

/// Parses [{"component": j, "m": value}, ...]. Component range is not checked
/// here; value range and duplicates are (InvalidSteering).
SteeringConfig steering_from_json(const nlohmann::json& modifications);

/// Per-class probability and logit changes from `before` to `after`.
Json class_deltas(const Prediction& before, const Prediction& after);

} // namespace steerlens::json
