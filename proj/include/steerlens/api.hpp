#pragma once

#include "steerlens/error.hpp"
#include "steerlens/json_codec.hpp"
#include "steerlens/sessions.hpp"
#include "steerlens/workbench.hpp"

#include <map>
#include <optional>
#include <string>

namespace steerlens {

struct ApiRequest {
    std::string method; // GET, POST, PUT
    std::string path;   // e.g. /v1/sessions/s000001/components
    std::map<std::string, std::string> query;
    std::string body;
};

struct ApiResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

int http_status(ErrorCode code);

/// The /v1/ workflow API, independent of any transport. Every handler either
/// returns a complete result or throws steerlens::Error before mutating state.
class Api {
public:
    Api(const Workbench& workbench, SessionStore& sessions);

    /// Routes a request and converts errors into {"error": {...}} bodies.
    ApiResponse handle(const ApiRequest& request);

    json::Json list_samples() const;
    json::Json config() const;
    json::Json create_session(const nlohmann::json& body);
    json::Json get_session(const std::string& id) const;
    json::Json get_components(const std::string& id, const std::optional<std::string>& target,
                              std::optional<std::size_t> limit) const;
    json::Json put_steering(const std::string& id, const nlohmann::json& body);
    json::Json reset(const std::string& id);
    json::Json dose_response(const std::string& id, std::size_t component, std::size_t steps) const;
    json::Json impact(const std::string& id, const nlohmann::json& body) const;

    struct Asset {
        std::string bytes;
        std::string content_type;
    };
    Asset get_asset(const std::string& ref) const;

    static constexpr std::size_t kDefaultLimit = 50;
    static constexpr std::size_t kDefaultSteps = 21;

private:
    std::span<const float> sample_of(const Session& s) const;
    Prediction current_prediction(const Session& s) const;
    json::Json session_json(const Session& s) const;

    const Workbench& wb_;
    SessionStore& sessions_;
};

} // namespace steerlens
