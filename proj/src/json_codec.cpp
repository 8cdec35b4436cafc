#include "steerlens/json_codec.hpp"

#include "steerlens/error.hpp"

namespace steerlens::json {

Json to_json(const Prediction& p) {
    Json j;
    j["predicted"] = p.predicted();
    j["predicted_index"] = p.predicted_index;
    j["score_mode"] = std::string(to_string(p.mode));
    j["logit_scale"] = p.logit_scale;
    j["classes"] = Json::array();
    for (std::size_t c = 0; c < p.labels.size(); ++c) {
        Json entry;
        entry["label"] = p.labels[c];
        entry["logit"] = p.logits[c];
        entry["probability"] = p.probabilities[c];
        j["classes"].push_back(std::move(entry));
    }
    return j;
}

Json to_json(const SteeringConfig& s) {
    Json out = Json::array();
    for (const auto& [component, m] : s.modifications()) {
        Json entry;
        entry["component"] = component;
        entry["m"] = m;
        out.push_back(std::move(entry));
    }
    return out;
}

Json to_json(const ImpactReport& r) {
    Json j;
    j["samples"] = r.samples;
    j["accuracy_before"] = r.accuracy_before;
    j["accuracy_after"] = r.accuracy_after;
    j["mean_abs_prob_shift"] = r.mean_abs_prob_shift;
    j["per_class_deltas"] = Json::array();
    for (const auto& c : r.per_class) {
        Json entry;
        entry["label"] = c.label;
        entry["support"] = c.support;
        entry["accuracy_before"] = c.accuracy_before;
        entry["accuracy_after"] = c.accuracy_after;
        entry["accuracy_delta"] = c.accuracy_after - c.accuracy_before;
        entry["mean_prob_before"] = c.mean_prob_before;
        entry["mean_prob_after"] = c.mean_prob_after;
        entry["mean_prob_delta"] = c.mean_prob_after - c.mean_prob_before;
        j["per_class_deltas"].push_back(std::move(entry));
    }
    return j;
}

Json to_json(const std::vector<DosePoint>& curve) {
    Json out = Json::array();
    for (const auto& point : curve) {
        Json entry;
        entry["m"] = point.m;
        entry["prediction"] = to_json(point.prediction);
        out.push_back(std::move(entry));
    }
    return out;
}

Json to_json(const AttributionResult& r, std::size_t limit) {
    Json j;
    j["target"] = r.target_class;
    j["target_logit"] = r.target_logit;
    j["rows"] = Json::array();
    for (std::size_t i = 0; i < r.ranking.size() && i < limit; ++i) {
        const std::size_t c = r.ranking[i];
        Json row;
        row["rank"] = i + 1;
        row["component"] = c;
        row["activation"] = r.activations[c];
        row["gradient"] = r.gradients[c];
        row["attribution"] = r.relevance[c];
        j["rows"].push_back(std::move(row));
    }
    return j;
}

SteeringConfig steering_from_json(const nlohmann::json& modifications) {
    if (!modifications.is_array()) {
        throw Error(ErrorCode::InvalidRequest, "modifications must be an array");
    }
    std::vector<std::pair<std::size_t, double>> entries;
    for (const auto& entry : modifications) {
        if (!entry.is_object() || !entry.contains("component") || !entry.contains("m")) {
            throw Error(ErrorCode::InvalidRequest,
                        "each modification needs \"component\" and \"m\"");
        }
        const auto& component = entry["component"];
        const auto& m = entry["m"];
        if (!component.is_number_unsigned()) {
            throw Error(ErrorCode::InvalidRequest, "component must be a non-negative integer");
        }
        if (!m.is_number()) {
            throw Error(ErrorCode::InvalidSteering, "m must be a number in [-1, 1]");
        }
        entries.emplace_back(component.get<std::size_t>(), m.get<double>());
    }
    return SteeringConfig::from_list(entries);
}

Json class_deltas(const Prediction& before, const Prediction& after) {
    Json out = Json::array();
    for (std::size_t c = 0; c < before.labels.size(); ++c) {
        Json entry;
        entry["label"] = before.labels[c];
        entry["probability_before"] = before.probabilities[c];
        entry["probability_after"] = after.probabilities[c];
        entry["probability_delta"] = after.probabilities[c] - before.probabilities[c];
        entry["logit_delta"] = after.logits[c] - before.logits[c];
        out.push_back(std::move(entry));
    }
    return out;
}

} // namespace steerlens::json
