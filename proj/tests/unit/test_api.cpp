#include <filesystem>
#include <fstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dloop/api.hpp"
#include "fixture_support.hpp"

namespace fs = std::filesystem;
using namespace dloop;
using namespace dloop::testing;
using nlohmann::json;

namespace {

struct ApiBench {
  fs::path dir;
  SessionStore store;
  RandomIdSource ids{5};
  SteppingClock clock{parse_timestamp("2026-05-05T00:00:00.000Z"), std::chrono::milliseconds(1)};
  ApiService api;

  static fs::path fresh(const std::string& name) {
    auto d = fs::temp_directory_path() / ("dloop-unit-api-" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }

  explicit ApiBench(const std::string& name,
                    std::shared_ptr<Provider> provider = std::make_shared<SyntheticProvider>())
      : dir(fresh(name)), store(dir), api(deps(std::move(provider))) {}

  ApiDeps deps(std::shared_ptr<Provider> provider) {
    ApiDeps d;
    d.catalog = &catalog();
    d.exemplars = &exemplars();
    d.gateway.emplace(std::move(provider));
    d.store = &store;
    d.ids = &ids;
    d.clock = &clock;
    d.provider_label = "mock";
    return d;
  }

  std::pair<int, json> call(const std::string& method, const std::string& path,
                            const std::string& body = "{}") {
    const auto r = api.handle({method, path, body});
    return {r.status, r.body.empty() ? json() : json::parse(r.body)};
  }

  std::string create() {
    auto [status, body] = call("POST", "/sessions",
                               json{{"background", "bg"}, {"design_goal", "dg"}}.dump());
    EXPECT_EQ(status, 201);
    return body.at("session").at("id");
  }
};

}  // namespace

TEST(Api, HealthReportsProvider) {
  ApiBench b("health");
  const auto [status, body] = b.call("GET", "/health");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body, (json{{"status", "ok"}, {"provider", "mock"}}));
}

TEST(Api, RoutingErrors) {
  ApiBench b("routing");
  EXPECT_EQ(b.call("GET", "/nope").first, 404);
  EXPECT_EQ(b.call("GET", "/nope").second.at("code"), "not_found");
  EXPECT_EQ(b.call("PUT", "/health").first, 405);
  EXPECT_EQ(b.call("POST", "/sessions", "{oops").first, 400);
  EXPECT_EQ(b.call("GET", "/sessions/does-not-exist").first, 404);
  EXPECT_EQ(b.call("POST", "/sessions", R"({"background": 3})").first, 400);
  EXPECT_GE(b.api.routes().size(), 22u);
}

TEST(Api, ErrorEnvelopeAndStatusTable) {
  EXPECT_EQ(error_envelope("cycle_detected", "m"),
            (json{{"code", "cycle_detected"}, {"message", "m"}, {"details", nullptr}}));
  EXPECT_EQ(status_for("duplicate_edge"), 409);
  EXPECT_EQ(status_for("empty_goal"), 422);
  EXPECT_EQ(status_for("missing_fixture"), 502);
  EXPECT_EQ(status_for("rate_limited"), 503);
  EXPECT_EQ(status_for("timeout"), 504);
  EXPECT_EQ(status_for("unknown_id"), 404);
  EXPECT_EQ(status_for("something_else"), 500);
}

TEST(Api, SessionLifecycle) {
  ApiBench b("lifecycle");
  const auto id = b.create();
  const auto [ls, listing] = b.call("GET", "/sessions");
  EXPECT_EQ(ls, 200);
  ASSERT_EQ(listing.at("sessions").size(), 1u);
  EXPECT_EQ(listing.at("sessions")[0].at("id"), id);
  EXPECT_EQ(b.call("GET", "/sessions/" + id).second.at("schema_version"), 1);
  EXPECT_EQ(b.call("DELETE", "/sessions/" + id).first, 204);
  EXPECT_EQ(b.call("GET", "/sessions/" + id).first, 404);
}

TEST(Api, GraphErrorsMapToConflict) {
  ApiBench b("graph");
  const auto base = "/sessions/" + b.create();
  const std::string n1 =
      b.call("POST", base + "/nodes", R"({"kind":"design","title":"A"})").second.at("id");
  const std::string n2 =
      b.call("POST", base + "/nodes", R"({"kind":"note","content":"B"})").second.at("id");
  const auto edge = json{{"source", n1}, {"target", n2}}.dump();
  EXPECT_EQ(b.call("POST", base + "/edges", edge).first, 201);
  const auto [dup, env] = b.call("POST", base + "/edges", edge);
  EXPECT_EQ(dup, 409);
  EXPECT_EQ(env.at("code"), "duplicate_edge");
  EXPECT_EQ(b.call("POST", base + "/edges", json{{"source", n1}, {"target", n1}}.dump()).first, 409);
  EXPECT_EQ(b.call("POST", base + "/nodes", R"({"kind":"robot"})").first, 400);
  EXPECT_EQ(b.call("POST", base + "/nodes/" + n1 + "/subcanvas", R"({"goal":"  "})").first, 409);
}

TEST(Api, FailedChainRunIsCommittedAsFailed) {
  auto mock = std::make_shared<MockProvider>([](const ChatRequest& r) {
    ChatResponse out;
    out.text = r.response_hint == OutputKind::RationaleJson ? "garbage"
                                                            : SyntheticProvider().complete(r).text;
    return out;
  });
  ApiBench b("failed", mock);
  const auto id = b.create();
  const auto base = "/sessions/" + id;
  const std::string design =
      b.call("POST", base + "/nodes", R"({"kind":"design","title":"Research"})").second.at("id");
  const auto sub = b.call("POST", base + "/nodes/" + design + "/subcanvas", R"({"goal":"why"})").second;
  std::string first;
  for (const auto& n : sub.at("chain_nodes")) {
    if (n.at("order_index") == 0) first = n.at("id");
  }
  const auto [status, env] =
      b.call("POST", base + "/subcanvas/" + sub.at("id").get<std::string>() + "/chain/" + first + "/run");
  EXPECT_EQ(status, 502);
  EXPECT_EQ(env.at("code"), "schema_error");
  EXPECT_EQ(env.at("details").at("node").at("run_state"), "failed");
  const auto stored = b.store.load(id);
  EXPECT_EQ(stored.subcanvases.begin()->second.chain_node(NodeId{first}).run_state, RunState::Failed);
}

TEST(Api, InjectedFaultLeavesStorageUntouched) {
  ApiBench b("fault");
  const auto id = b.create();
  const auto before = read_file(b.store.path_for(id));
  b.api.set_fault_hook([](std::string_view p) { throw InjectedFault(p); });
  const auto [status, env] = b.call("POST", "/sessions/" + id + "/pipeline");
  EXPECT_EQ(status, 500);
  EXPECT_EQ(env.at("code"), "injected_fault");
  EXPECT_EQ(read_file(b.store.path_for(id)), before);
}

TEST(Api, QualityEndpoint) {
  ApiBench b("quality");
  const auto [s1, mean] = b.call("POST", "/assessment/quality",
                                 R"({"novelty":5.2,"usefulness_converted":2.79})");
  EXPECT_EQ(s1, 200);
  EXPECT_NEAR(mean.at("quality").get<double>(), 3.995, 1e-9);
  const auto [s2, raw] = b.call(
      "POST", "/assessment/quality",
      R"({"novelty":6,"importance":5,"popularity":1.0,"frequency":1.0,"mode":"sum"})");
  EXPECT_EQ(s2, 200);
  EXPECT_DOUBLE_EQ(raw.at("quality").get<double>(), 13.0);
  EXPECT_EQ(b.call("POST", "/assessment/quality", R"({"novelty":9,"usefulness_converted":2})").first,
            422);
}

TEST(Config, PrecedenceIsFileThenEnvThenFlags) {
  const auto path = fs::temp_directory_path() / "dloop-unit-config.json";
  std::ofstream(path) << R"({"port": 1000, "model": "file-model", "provider": "mock"})";
  const auto env = [](const std::string& key) -> std::optional<std::string> {
    if (key == "DLOOP_PORT") return "2000";
    if (key == "DLOOP_MODEL") return "env-model";
    return std::nullopt;
  };
  const auto cfg = resolve_config({{"port", "3000"}}, env, path.string());
  EXPECT_EQ(cfg.port, 3000);
  EXPECT_EQ(cfg.model, "env-model");
  EXPECT_EQ(cfg.provider, "mock");
  EXPECT_EQ(cfg.host, "127.0.0.1");
  const auto none = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
  EXPECT_THROW(resolve_config({{"provider", "psychic"}}, none, std::nullopt), BadRequest);
  EXPECT_THROW(resolve_config({{"port", "70000"}}, none, std::nullopt), BadRequest);
  std::ofstream(path) << R"({"colour": "blue"})";
  EXPECT_THROW(resolve_config({}, none, path.string()), BadRequest);
}

TEST(HttpServer, ServesHealthOverHttp) {
  ApiBench b("http");
  HttpServer server(b.api, "127.0.0.1", 0);
  const int port = server.bind_any();
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen_after_bind(); });
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/health");
  for (int i = 0; !res && i < 50; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    res = client.Get("/health");
  }
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body).at("status"), "ok");
  auto missing = client.Get("/sessions/nope");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  server.stop();
  t.join();
}
