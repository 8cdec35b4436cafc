#include "steerlens/api.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <vector>

namespace steerlens {

namespace {

using json::Json;

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= path.size()) {
        const std::size_t end = path.find('/', start);
        const std::string part =
            path.substr(start, end == std::string::npos ? std::string::npos : end - start);
        if (!part.empty()) {
            parts.push_back(part);
        }
        if (end == std::string::npos) {
            break;
        }
        start = end + 1;
    }
    return parts;
}

std::size_t parse_count(const std::string& text, const char* name) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) {
        throw Error(ErrorCode::InvalidRequest,
                    std::string(name) + " must be a non-negative integer, got \"" + text + "\"");
    }
    return value;
}

nlohmann::json parse_body(const std::string& body) {
    if (body.empty()) {
        return nlohmann::json::object();
    }
    try {
        return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidRequest, std::string("malformed JSON body: ") + e.what());
    }
}

std::string required_string(const nlohmann::json& body, const char* key) {
    if (!body.is_object() || !body.contains(key) || !body[key].is_string()) {
        throw Error(ErrorCode::InvalidRequest, std::string("body needs string field \"") + key + "\"");
    }
    return body[key].get<std::string>();
}

std::string content_type_for(const std::filesystem::path& p) {
    static const std::map<std::string, std::string> types = {
        {".png", "image/png"},   {".jpg", "image/jpeg"}, {".jpeg", "image/jpeg"},
        {".gif", "image/gif"},   {".webp", "image/webp"}, {".svg", "image/svg+xml"},
        {".bmp", "image/bmp"},   {".json", "application/json"}, {".txt", "text/plain"}};
    auto it = types.find(p.extension().string());
    return it == types.end() ? "application/octet-stream" : it->second;
}

ApiResponse json_response(const Json& j, int status = 200) {
    return ApiResponse{status, "application/json", j.dump()};
}

} // namespace

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidSteering:
    case ErrorCode::InvalidRequest:
    case ErrorCode::DimMismatch:
    case ErrorCode::NonFiniteValue:
        return 400;
    case ErrorCode::PathTraversal:
        return 403;
    case ErrorCode::UnknownClass:
    case ErrorCode::UnknownComponent:
    case ErrorCode::UnknownSample:
    case ErrorCode::UnknownClassSet:
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownEvalSet:
    case ErrorCode::UnknownLabel:
    case ErrorCode::NotFound:
        return 404;
    case ErrorCode::ZeroNormEmbedding:
    case ErrorCode::ZeroNormMean:
    case ErrorCode::UnlabeledEvalSet:
        return 422;
    default:
        return 500;
    }
}

Api::Api(const Workbench& workbench, SessionStore& sessions) : wb_(workbench), sessions_(sessions) {}

ApiResponse Api::handle(const ApiRequest& req) {
    try {
        const auto parts = split_path(req.path);
        const auto n = parts.size();
        if (n < 2 || parts[0] != "v1") {
            throw Error(ErrorCode::NotFound, "no route for " + req.path);
        }
        const std::string& resource = parts[1];
        const auto query = [&](const char* key) -> std::optional<std::string> {
            auto it = req.query.find(key);
            return it == req.query.end() ? std::nullopt : std::optional(it->second);
        };

        if (req.method == "GET" && n == 2 && resource == "samples") {
            return json_response(list_samples());
        }
        if (req.method == "GET" && n == 2 && resource == "config") {
            return json_response(config());
        }
        if (resource == "assets" && req.method == "GET" && n >= 3) {
            static const std::string prefix = "/v1/assets/";
            const std::string ref = req.path.rfind(prefix, 0) == 0 ? req.path.substr(prefix.size())
                                                                   : req.path;
            auto asset = get_asset(ref);
            return ApiResponse{200, asset.content_type, std::move(asset.bytes)};
        }
        if (resource == "sessions") {
            if (n == 2 && req.method == "POST") {
                return json_response(create_session(parse_body(req.body)), 201);
            }
            if (n == 3 && req.method == "GET") {
                return json_response(get_session(parts[2]));
            }
            if (n == 4) {
                const std::string& id = parts[2];
                const std::string& action = parts[3];
                if (action == "components" && req.method == "GET") {
                    std::optional<std::size_t> limit;
                    if (auto l = query("limit")) {
                        limit = parse_count(*l, "limit");
                    }
                    return json_response(get_components(id, query("target"), limit));
                }
                if (action == "steering" && req.method == "PUT") {
                    return json_response(put_steering(id, parse_body(req.body)));
                }
                if (action == "reset" && req.method == "POST") {
                    return json_response(reset(id));
                }
                if (action == "dose_response" && req.method == "GET") {
                    const auto component = query("component");
                    if (!component) {
                        throw Error(ErrorCode::InvalidRequest, "query parameter \"component\" is required");
                    }
                    const auto steps = query("steps");
                    return json_response(dose_response(
                        id, parse_count(*component, "component"),
                        steps ? parse_count(*steps, "steps") : kDefaultSteps));
                }
                if (action == "impact" && req.method == "POST") {
                    return json_response(impact(id, parse_body(req.body)));
                }
            }
        }
        throw Error(ErrorCode::NotFound, "no route for " + req.method + " " + req.path);
    } catch (const Error& e) {
        Json err;
        err["error"]["code"] = std::string(to_string(e.code()));
        err["error"]["message"] = e.what();
        return json_response(err, http_status(e.code()));
    } catch (const std::exception& e) {
        Json err;
        err["error"]["code"] = "Internal";
        err["error"]["message"] = e.what();
        return json_response(err, 500);
    }
}

Json Api::list_samples() const {
    const auto& corpus = wb_.inspection();
    Json samples = Json::array();
    for (std::size_t i = 0; i < corpus.count(); ++i) {
        Json s;
        s["sample_id"] = corpus.ids()[i];
        s["asset_ref"] = corpus.asset_refs() ? Json((*corpus.asset_refs())[i]) : Json(nullptr);
        s["true_label"] = corpus.labels() ? Json((*corpus.labels())[i]) : Json(nullptr);
        samples.push_back(std::move(s));
    }
    Json out;
    out["samples"] = std::move(samples);
    return out;
}

Json Api::config() const {
    Json out;
    out["dim_in"] = wb_.model().dim_in();
    out["dim_sae"] = wb_.model().dim_sae();
    out["score_mode"] = std::string(to_string(wb_.score().mode));
    out["logit_scale"] = wb_.score().logit_scale;
    out["k"] = wb_.k();
    out["class_sets"] = Json::array();
    for (const auto& [name, cs] : wb_.class_sets()) {
        Json entry;
        entry["name"] = name;
        entry["labels"] = cs.labels();
        out["class_sets"].push_back(std::move(entry));
    }
    out["eval_sets"] = Json::array();
    for (const auto& [name, es] : wb_.eval_sets()) {
        out["eval_sets"].push_back(name);
    }
    return out;
}

std::span<const float> Api::sample_of(const Session& s) const {
    return wb_.inspection().row(s.sample_index);
}

Prediction Api::current_prediction(const Session& s) const {
    return predict(wb_.model(), sample_of(s), wb_.class_set(s.class_set), s.steering, wb_.score());
}

Json Api::session_json(const Session& s) const {
    const auto& corpus = wb_.inspection();
    Json j;
    j["session_id"] = s.id;
    j["sample_id"] = s.sample_id;
    j["asset_ref"] = corpus.asset_refs() ? Json((*corpus.asset_refs())[s.sample_index]) : Json(nullptr);
    j["true_label"] = corpus.labels() ? Json((*corpus.labels())[s.sample_index]) : Json(nullptr);
    j["class_set"] = s.class_set;
    j["target_class"] = s.target_class;
    j["steering"] = json::to_json(s.steering);
    j["history"] = Json::array();
    for (const auto& h : s.history) {
        Json e;
        e["seq"] = h.seq;
        e["timestamp"] = h.timestamp;
        e["action"] = h.action;
        e["steering"] = json::to_json(h.steering);
        e["predicted"] = h.predicted;
        e["target_class"] = h.target_class;
        e["target_probability"] = h.target_probability;
        j["history"].push_back(std::move(e));
    }
    return j;
}

Json Api::create_session(const nlohmann::json& body) {
    const auto sample_id = required_string(body, "sample_id");
    const auto class_set_name = required_string(body, "class_set");
    const auto idx = wb_.inspection().index_of(sample_id);
    if (!idx) {
        throw Error(ErrorCode::UnknownSample, "unknown sample \"" + sample_id + "\"");
    }
    const auto& classes = wb_.class_set(class_set_name);
    const auto prediction = predict(wb_.model(), wb_.inspection().row(*idx), classes,
                                    SteeringConfig{}, wb_.score());
    // Track the true class when it is part of the class set, else the initial prediction.
    std::string target = prediction.predicted();
    if (const auto& labels = wb_.inspection().labels()) {
        if (classes.index_of((*labels)[*idx])) {
            target = (*labels)[*idx];
        }
    }
    auto session = sessions_.create(sample_id, *idx, class_set_name, target);
    std::lock_guard lock(session->mutex);
    Json out;
    out["session"] = session_json(*session);
    out["prediction"] = json::to_json(prediction);
    return out;
}

Json Api::get_session(const std::string& id) const {
    auto session = sessions_.get(id);
    std::lock_guard lock(session->mutex);
    Json out;
    out["session"] = session_json(*session);
    out["prediction"] = json::to_json(current_prediction(*session));
    return out;
}

Json Api::get_components(const std::string& id, const std::optional<std::string>& target,
                         std::optional<std::size_t> limit) const {
    const std::size_t max_rows = limit.value_or(kDefaultLimit);
    if (max_rows == 0) {
        throw Error(ErrorCode::InvalidRequest, "limit must be at least 1");
    }
    auto session = sessions_.get(id);
    std::lock_guard lock(session->mutex);
    const auto& classes = wb_.class_set(session->class_set);
    const auto attribution =
        attribute(wb_.model(), sample_of(*session), classes, session->steering, target, wb_.score());
    const auto& mods = session->steering.modifications();
    const auto code = encode(wb_.model(), sample_of(*session));

    Json out;
    out["session_id"] = session->id;
    out["target"] = attribution.target_class;
    out["target_logit"] = attribution.target_logit;
    out["ranked_components"] = attribution.ranking.size();
    out["rows"] = Json::array();
    for (std::size_t i = 0; i < attribution.ranking.size() && i < max_rows; ++i) {
        const std::size_t c = attribution.ranking[i];
        const auto& card = wb_.cards()[c];
        Json row;
        row["rank"] = i + 1;
        row["component"] = c;
        row["activation"] = code.activations[c];
        row["steered_activation"] = attribution.activations[c];
        auto m = mods.find(c);
        row["m"] = m == mods.end() ? 0.0 : m->second;
        row["attribution"] = attribution.relevance[c];
        row["dead"] = card.dead;
        if (card.top_labels.empty()) {
            row["top_label"] = nullptr;
            row["top_label_score"] = nullptr;
        } else {
            row["top_label"] = card.top_labels.front().label;
            row["top_label_score"] = card.top_labels.front().score;
        }
        row["exemplars"] = Json::array();
        for (const auto& sid : card.exemplar_ids) {
            Json ex;
            ex["sample_id"] = sid;
            const auto ref = wb_.reference_asset(sid);
            ex["asset_ref"] = ref.empty() ? Json(nullptr) : Json(ref);
            row["exemplars"].push_back(std::move(ex));
        }
        out["rows"].push_back(std::move(row));
    }
    return out;
}

Json Api::put_steering(const std::string& id, const nlohmann::json& body) {
    if (!body.is_object() || !body.contains("modifications")) {
        throw Error(ErrorCode::InvalidRequest, "body needs a \"modifications\" array");
    }
    // Component range first so an out-of-range index is UnknownComponent.
    if (body["modifications"].is_array()) {
        for (const auto& entry : body["modifications"]) {
            if (entry.is_object() && entry.contains("component") &&
                entry["component"].is_number_unsigned() &&
                entry["component"].get<std::size_t>() >= wb_.model().dim_sae()) {
                throw Error(ErrorCode::UnknownComponent,
                            "component " + std::to_string(entry["component"].get<std::size_t>()) +
                                " out of range");
            }
        }
    }
    const auto steering = json::steering_from_json(body["modifications"]);

    auto session = sessions_.get(id);
    std::lock_guard lock(session->mutex);
    const auto& classes = wb_.class_set(session->class_set);
    const auto before =
        predict(wb_.model(), sample_of(*session), classes, SteeringConfig{}, wb_.score());
    const auto after = predict(wb_.model(), sample_of(*session), classes, steering, wb_.score());

    session->steering = steering;
    const auto& entry = sessions_.record(*session, "steer", after);

    Json out;
    out["session_id"] = session->id;
    out["steering"] = json::to_json(steering);
    out["prediction_before"] = json::to_json(before);
    out["prediction_after"] = json::to_json(after);
    out["per_class_deltas"] = json::class_deltas(before, after);
    out["history_length"] = entry.seq;
    return out;
}

Json Api::reset(const std::string& id) {
    auto session = sessions_.get(id);
    std::lock_guard lock(session->mutex);
    const auto prediction = predict(wb_.model(), sample_of(*session),
                                    wb_.class_set(session->class_set), SteeringConfig{}, wb_.score());
    session->steering = SteeringConfig{};
    sessions_.record(*session, "reset", prediction);
    Json out;
    out["session"] = session_json(*session);
    out["prediction"] = json::to_json(prediction);
    return out;
}

Json Api::dose_response(const std::string& id, std::size_t component, std::size_t steps) const {
    if (component >= wb_.model().dim_sae()) {
        throw Error(ErrorCode::UnknownComponent, "component " + std::to_string(component) + " out of range");
    }
    const auto grid = steering_grid(steps);
    auto session = sessions_.get(id);
    std::lock_guard lock(session->mutex);
    const auto curve = steerlens::dose_response(wb_.model(), sample_of(*session),
                                                wb_.class_set(session->class_set), component, grid,
                                                wb_.score());
    Json out;
    out["session_id"] = session->id;
    out["component"] = component;
    out["curve"] = json::to_json(curve);
    return out;
}

Json Api::impact(const std::string& id, const nlohmann::json& body) const {
    const auto name = required_string(body, "eval_set");
    auto session = sessions_.get(id);
    std::lock_guard lock(session->mutex);
    const auto& eval = wb_.eval_set(name);
    const auto report = global_impact(wb_.model(), eval, wb_.class_set(session->class_set),
                                      session->steering, wb_.score());
    Json out;
    out["session_id"] = session->id;
    out["eval_set"] = name;
    out["steering"] = json::to_json(session->steering);
    out["impact"] = json::to_json(report);
    return out;
}

Api::Asset Api::get_asset(const std::string& ref) const {
    const auto path = wb_.resolve_asset(ref);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::NotFound, "asset not readable: " + ref);
    }
    return Asset{std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()),
                 content_type_for(path)};
}

} // namespace steerlens
