#include "doctest.h"

#include "pets_fixture.hpp"
#include "test_support.hpp"

#include "steerlens/api.hpp"
#include "steerlens/http_server.hpp"
#include "steerlens/error.hpp"

#include <httplib.h>

#include <thread>

using namespace steerlens;
using steerlens::testing::TempDir;
using Json = nlohmann::json;

namespace {

struct Fixture {
    TempDir dir{"service"};
    std::filesystem::path config_path;
    std::unique_ptr<Workbench> wb;
    std::unique_ptr<SessionStore> store;
    std::unique_ptr<Api> api;

    explicit Fixture(bool history = false) {
        config_path = steerlens::testing::write_pets_workbench(dir.path(), history);
        const auto cfg = WorkbenchConfig::from_file(config_path);
        wb = std::make_unique<Workbench>(Workbench::load(cfg));
        store = std::make_unique<SessionStore>(cfg.history_dir);
        api = std::make_unique<Api>(*wb, *store);
    }

    ApiResponse call(const std::string& method, const std::string& path, const Json& body = nullptr,
                     std::map<std::string, std::string> query = {}) {
        return api->handle({method, path, std::move(query), body.is_null() ? "" : body.dump()});
    }
    Json call_json(const std::string& method, const std::string& path, const Json& body = nullptr,
                   std::map<std::string, std::string> query = {}) {
        return Json::parse(call(method, path, body, std::move(query)).body);
    }
    std::string open(const std::string& sample = "img-001") {
        return call_json("POST", "/v1/sessions", {{"sample_id", sample}, {"class_set", "pets"}})["session"]
            ["session_id"];
    }
};

std::string error_code(const ApiResponse& r) {
    return Json::parse(r.body)["error"]["code"];
}

Json steer(double m, std::size_t component = 2) {
    return {{"modifications", Json::array({{{"component", component}, {"m", m}}})}};
}

} // namespace

TEST_CASE("golden walkthrough matches the numpy oracle") {
    Fixture f;
    const auto golden = steerlens::testing::load_json(steerlens::testing::test_data("golden/walkthrough.json"));
    REQUIRE(golden["steps"].size() >= 8);
    for (const auto& step : golden["steps"]) {
        std::map<std::string, std::string> query;
        if (step.contains("query")) query = step["query"].get<std::map<std::string, std::string>>();
        const auto r = f.call(step["method"], step["path"], step.value("body", Json()), query);
        const std::string label = step["method"].get<std::string>() + " " + step["path"].get<std::string>();
        CAPTURE(label);
        CHECK(r.status == step["status"].get<int>());
        std::vector<std::string> diffs;
        steerlens::testing::json_diff(step["response"], Json::parse(r.body), "$", 1e-6, diffs);
        for (const auto& d : diffs) CAPTURE(d);
        CHECK(diffs.empty());
        if (!diffs.empty()) MESSAGE(diffs.front());
    }
}

TEST_CASE("samples list mirrors the inspection corpus in order") {
    Fixture f;
    const auto j = f.call_json("GET", "/v1/samples");
    REQUIRE(j["samples"].size() == f.wb->inspection().count());
    for (std::size_t i = 0; i < f.wb->inspection().count(); ++i) {
        CHECK(j["samples"][i]["sample_id"] == f.wb->inspection().ids()[i]);
    }
    const auto cfg = f.call_json("GET", "/v1/config");
    CHECK(cfg["dim_sae"] == 5);
    CHECK(cfg["class_sets"][0]["name"] == "pets");
}

TEST_CASE("session creation delegates to the engine") {
    Fixture f;
    const auto j = f.call_json("POST", "/v1/sessions", {{"sample_id", "img-003"}, {"class_set", "pets"}});
    const auto direct = predict(f.wb->model(), f.wb->inspection().row(2), f.wb->class_set("pets"), {},
                                f.wb->score());
    double total = 0.0;
    for (std::size_t c = 0; c < direct.labels.size(); ++c) {
        CHECK(j["prediction"]["classes"][c]["logit"].get<double>() == direct.logits[c]);
        total += j["prediction"]["classes"][c]["probability"].get<double>();
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.open() != f.open());

    CHECK(f.call("POST", "/v1/sessions", {{"sample_id", "nope"}, {"class_set", "pets"}}).status == 404);
    CHECK(f.call("POST", "/v1/sessions", {{"sample_id", "img-001"}, {"class_set", "x"}}).status == 404);
    CHECK(f.call("POST", "/v1/sessions", Json::object()).status == 400);
    CHECK(f.api->handle({"POST", "/v1/sessions", {}, "{not json"}).status == 400);
}

TEST_CASE("components compose attribution and concept cards") {
    Fixture f;
    const auto id = f.open();
    const auto j = f.call_json("GET", "/v1/sessions/" + id + "/components");
    const auto direct = attribute(f.wb->model(), f.wb->inspection().row(0), f.wb->class_set("pets"), {},
                                  std::nullopt, f.wb->score());
    REQUIRE(j["rows"].size() == direct.ranking.size());
    for (std::size_t i = 0; i < direct.ranking.size(); ++i) {
        const auto c = direct.ranking[i];
        CHECK(j["rows"][i]["component"] == c);
        CHECK(j["rows"][i]["attribution"].get<double>() == direct.relevance[c]);
        const auto& card = f.wb->cards()[c];
        CHECK(j["rows"][i]["dead"] == card.dead);
        CHECK(j["rows"][i]["exemplars"].size() == card.exemplar_ids.size());
        if (i > 0) {
            CHECK(std::abs(j["rows"][i - 1]["attribution"].get<double>()) >=
                  std::abs(j["rows"][i]["attribution"].get<double>()));
        }
    }
    const auto one = f.call_json("GET", "/v1/sessions/" + id + "/components", nullptr, {{"limit", "1"}});
    CHECK(one["rows"].size() == 1);
    CHECK(one["rows"][0] == j["rows"][0]);
    const auto cat = f.call_json("GET", "/v1/sessions/" + id + "/components", nullptr, {{"target", "cat"}});
    CHECK(cat["target"] == "cat");

    CHECK(error_code(f.call("GET", "/v1/sessions/" + id + "/components", nullptr, {{"limit", "0"}})) ==
          "InvalidRequest");
    CHECK(error_code(f.call("GET", "/v1/sessions/" + id + "/components", nullptr, {{"target", "cow"}})) ==
          "UnknownClass");
    CHECK(error_code(f.call("GET", "/v1/sessions/zzz/components")) == "UnknownSession");
}

TEST_CASE("steering updates state, records history and validates input") {
    Fixture f;
    const auto id = f.open();
    const auto path = "/v1/sessions/" + id + "/steering";

    const auto none = f.call_json("PUT", path, {{"modifications", Json::array()}});
    CHECK(none["prediction_before"] == none["prediction_after"]);
    CHECK(none["history_length"] == 1);

    const auto first = f.call_json("PUT", path, steer(-1.0));
    CHECK(first["prediction_before"]["predicted"] == "dog");
    CHECK(first["prediction_after"]["predicted"] == "cat");
    const auto again = f.call_json("PUT", path, steer(-1.0));
    CHECK(again["prediction_after"] == first["prediction_after"]);
    CHECK(again["history_length"] == 3);

    const auto session = f.call_json("GET", "/v1/sessions/" + id);
    CHECK(session["session"]["steering"] == Json::parse(R"([{"component":2,"m":-1.0}])"));

    for (const auto& bad : {steer(1.5), steer(-1.01)}) {
        const auto r = f.call("PUT", path, bad);
        CHECK(r.status == 400);
        CHECK(error_code(r) == "InvalidSteering");
    }
    CHECK(error_code(f.call("PUT", path, steer(0.5, 99))) == "UnknownComponent");
    CHECK(f.call("PUT", path, steer(0.5, 99)).status == 404);
    CHECK(error_code(f.call("PUT", path, {{"modifications", Json::parse(R"([{"component":2,"m":"x"}])")}})) ==
          "InvalidSteering");
    CHECK(error_code(f.call("PUT", path, {{"modifications",
                                           Json::parse(R"([{"component":2,"m":0.1},{"component":2,"m":0.2}])")}})) ==
          "InvalidSteering");
    CHECK(error_code(f.call("PUT", "/v1/sessions/zzz/steering", steer(0.0))) == "UnknownSession");

    // Rejected requests leave state untouched.
    const auto after = f.call_json("GET", "/v1/sessions/" + id);
    CHECK(after["session"]["history"].size() == 3);
    CHECK(after["session"]["steering"] == session["session"]["steering"]);
}

TEST_CASE("reset restores the initial prediction and is idempotent") {
    Fixture f;
    const auto created = f.call_json("POST", "/v1/sessions", {{"sample_id", "img-001"}, {"class_set", "pets"}});
    const std::string id = created["session"]["session_id"];
    f.call("PUT", "/v1/sessions/" + id + "/steering", steer(-1.0));
    const auto r1 = f.call_json("POST", "/v1/sessions/" + id + "/reset");
    CHECK(r1["prediction"] == created["prediction"]);
    CHECK(r1["session"]["steering"].empty());
    CHECK(r1["session"]["history"].size() == 2);
    const auto r2 = f.call_json("POST", "/v1/sessions/" + id + "/reset");
    CHECK(r2["prediction"] == r1["prediction"]);
    CHECK(r2["session"]["history"].size() == 3);
    CHECK(r2["session"]["history"][2]["action"] == "reset");
}

TEST_CASE("dose response and impact delegate to the engine") {
    Fixture f;
    const auto id = f.open();
    const auto dose =
        f.call_json("GET", "/v1/sessions/" + id + "/dose_response", nullptr, {{"component", "2"}, {"steps", "3"}});
    const auto direct = dose_response(f.wb->model(), f.wb->inspection().row(0), f.wb->class_set("pets"), 2,
                                      steering_grid(3), f.wb->score());
    REQUIRE(dose["curve"].size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(dose["curve"][i]["m"].get<double>() == direct[i].m);
        CHECK(dose["curve"][i]["prediction"]["predicted"] == direct[i].prediction.predicted());
    }
    const auto dflt = f.call_json("GET", "/v1/sessions/" + id + "/dose_response", nullptr, {{"component", "2"}});
    CHECK(dflt["curve"].size() == Api::kDefaultSteps);
    CHECK(error_code(f.call("GET", "/v1/sessions/" + id + "/dose_response", nullptr,
                            {{"component", "2"}, {"steps", "1"}})) == "InvalidRequest");
    CHECK(error_code(f.call("GET", "/v1/sessions/" + id + "/dose_response", nullptr, {{"component", "9"}})) ==
          "UnknownComponent");

    const auto zero = f.call_json("POST", "/v1/sessions/" + id + "/impact", {{"eval_set", "val"}});
    CHECK(zero["impact"]["accuracy_before"] == zero["impact"]["accuracy_after"]);
    CHECK(zero["impact"]["mean_abs_prob_shift"].get<double>() == 0.0);

    f.call("PUT", "/v1/sessions/" + id + "/steering", steer(-1.0));
    const auto imp = f.call_json("POST", "/v1/sessions/" + id + "/impact", {{"eval_set", "val"}});
    SteeringConfig s;
    s.set(2, -1.0);
    const auto report = global_impact(f.wb->model(), f.wb->eval_set("val"), f.wb->class_set("pets"), s,
                                      f.wb->score());
    CHECK(imp["impact"]["accuracy_after"].get<double>() == report.accuracy_after);
    CHECK(imp["impact"]["mean_abs_prob_shift"].get<double>() == report.mean_abs_prob_shift);
    CHECK(error_code(f.call("POST", "/v1/sessions/" + id + "/impact", {{"eval_set", "test"}})) == "UnknownEvalSet");
}

TEST_CASE("assets are served from inside the asset directory only") {
    Fixture f;
    const auto ok = f.call("GET", "/v1/assets/inspect/img-001.png");
    CHECK(ok.status == 200);
    CHECK(ok.body == steerlens::testing::file_bytes(f.dir / "assets/inspect/img-001.png"));
    CHECK(ok.content_type == "image/png");
    CHECK(f.call("GET", "/v1/assets/../config.json").status == 403);
    CHECK(f.call("GET", "/v1/assets/inspect/../../config.json").status == 403);
    CHECK(f.call("GET", "/v1/assets//etc/passwd").status == 403);
    CHECK(f.call("GET", "/v1/assets/inspect/missing.png").status == 404);
    CHECK(f.call("GET", "/v1/unknown").status == 404);
    CHECK(f.call("DELETE", "/v1/samples").status >= 400);
}

TEST_CASE("history is appended to JSON-lines files") {
    Fixture f(true);
    const auto id = f.open();
    f.call("PUT", "/v1/sessions/" + id + "/steering", steer(-1.0));
    f.call("POST", "/v1/sessions/" + id + "/reset");
    f.store->close();
    std::ifstream in(f.dir / ("history/" + id + ".jsonl"));
    std::vector<Json> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(Json::parse(line));
    REQUIRE(lines.size() == 2);
    CHECK(lines[0]["action"] == "steer");
    CHECK(lines[0]["predicted"] == "cat");
    CHECK(lines[1]["action"] == "reset");
    CHECK(lines[0]["timestamp"].get<std::string>() <= lines[1]["timestamp"].get<std::string>());
}

TEST_CASE("cards cache is written once and reused") {
    Fixture f;
    CHECK(std::filesystem::exists(f.dir / "cards.crd"));
    const auto cfg = WorkbenchConfig::from_file(f.config_path);
    const auto again = Workbench::load(cfg);
    REQUIRE(again.cards().size() == f.wb->cards().size());
    for (std::size_t j = 0; j < again.cards().size(); ++j) {
        CHECK(again.cards()[j].exemplar_ids == f.wb->cards()[j].exemplar_ids);
    }
}

TEST_CASE("configuration errors abort loading") {
    TempDir dir("badcfg");
    std::ofstream(dir / "config.json") << R"({"sae": "missing.sae"})";
    CHECK_THROWS_AS(WorkbenchConfig::from_file(dir / "config.json"), Error);
    CHECK_THROWS_AS(WorkbenchConfig::from_file(dir / "absent.json"), Error);

    Fixture f;
    auto cfg = WorkbenchConfig::from_file(f.config_path);
    cfg.sae = f.dir / "nope.sae";
    CHECK_THROWS_AS(Workbench::load(cfg), Error);
}

TEST_CASE("HTTP transport round-trips the API") {
    Fixture f;
    HttpServer server(*f.api);
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client cli("127.0.0.1", port);
    auto samples = cli.Get("/v1/samples");
    REQUIRE(samples);
    CHECK(samples->status == 200);
    CHECK(Json::parse(samples->body) == f.call_json("GET", "/v1/samples"));

    auto created = cli.Post("/v1/sessions", R"({"sample_id":"img-001","class_set":"pets"})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string id = Json::parse(created->body)["session"]["session_id"];

    auto put = cli.Put("/v1/sessions/" + id + "/steering", steer(-1.0).dump(), "application/json");
    REQUIRE(put);
    CHECK(Json::parse(put->body)["prediction_after"]["predicted"] == "cat");

    auto comps = cli.Get("/v1/sessions/" + id + "/components?limit=2&target=dog");
    REQUIRE(comps);
    const auto cj = Json::parse(comps->body);
    CHECK(cj["rows"].size() == 2);
    CHECK(cj["target"] == "dog");

    auto asset = cli.Get("/v1/assets/ref/r0.png");
    REQUIRE(asset);
    CHECK(asset->body == "PNG:ref/r0.png");
    auto bad = cli.Put("/v1/sessions/" + id + "/steering", steer(2.0).dump(), "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);

    server.stop();
    t.join();
    CHECK_FALSE(server.is_running());
}
