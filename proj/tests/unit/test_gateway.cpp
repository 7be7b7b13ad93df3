#include <filesystem>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "dloop/error.hpp"
#include "dloop/gateway.hpp"
#include "dloop/live_provider.hpp"
#include "dloop/reasoning.hpp"
#include "fixture_support.hpp"

namespace fs = std::filesystem;
using namespace dloop;
using nlohmann::json;

namespace {

ChatRequest sample_request() {
  return chat_request_from_json(
      json::parse(dloop::testing::read_file(dloop::testing::fixture_dir() / "requests" /
                                            "sample_request.json")));
}

class FakeTransport final : public HttpTransport {
public:
  std::vector<HttpResponse> replies;
  std::vector<std::string> bodies;
  HttpHeaders last_headers;

protected:
  HttpResponse do_post(const std::string&, const std::string& body, const HttpHeaders& headers,
                       std::chrono::seconds) override {
    bodies.push_back(body);
    last_headers = headers;
    auto r = replies.front();
    replies.erase(replies.begin());
    return r;
  }
};

std::string completion(const std::string& content) {
  return json{{"choices", {{{"message", {{"content", content}}}, {"finish_reason", "stop"}}}},
              {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 3}}}}
      .dump();
}

}  // namespace

// Frozen from tests/scripts/request_hash.py over the same fixture.
TEST(RequestHash, MatchesFrozenOracleValue) {
  EXPECT_EQ(request_hash(sample_request()),
            "56560833908a4083470828c001297c0969b9789f5cc3eb466a60c0db0b0e8b3e");
}

TEST(RequestHash, CanonicalFormIsSortedAndCompact) {
  ChatRequest r;
  r.system = "s";
  r.user = "u";
  r.temperature = 0.0;
  r.max_tokens = 5;
  r.response_hint = OutputKind::StageLabelJson;
  EXPECT_EQ(canonical_request_json(r),
            R"({"max_tokens":5,"model":"gpt-4o","response_hint":"StageLabelJson","system":"s",)"
            R"("temperature":"0.000","user":"u"})");
}

TEST(RequestHash, SensitiveToEveryField) {
  const auto base = sample_request();
  const auto h = request_hash(base);
  auto r = base;
  r.user += " ";
  EXPECT_NE(request_hash(r), h);
  r = base;
  r.temperature = 0.7001;
  EXPECT_EQ(request_hash(r), h) << "temperature is hashed at three decimals";
  r.temperature = 0.701;
  EXPECT_NE(request_hash(r), h);
  r = base;
  r.response_hint = OutputKind::FreeText;
  EXPECT_NE(request_hash(r), h);
  EXPECT_EQ(chat_request_from_json(to_json(base)), base);
}

TEST(Gateway, RetriesOnceWithRepairInstruction) {
  auto mock = std::make_shared<MockProvider>(
      std::vector<std::string>{"not json", R"({"stage":"Define"})"});
  CallLog log;
  const auto gw = Gateway(mock).scoped(log);
  ChatRequest req;
  req.user = "classify";
  const auto stage = gw.complete_validated<DesignStage>(
      req, [](const std::string& raw) { return parse_stage_label(raw); });
  EXPECT_EQ(stage, DesignStage::Define);
  ASSERT_EQ(mock->calls(), 2u);
  EXPECT_NE(mock->requests()[1].user.find("not json"), std::string::npos);
  EXPECT_EQ(mock->requests()[1].user.rfind("classify", 0), 0u);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log.entries()[0].outcome, "unparseable_label");
  EXPECT_EQ(log.entries()[1].outcome, "ok");
}

TEST(Gateway, ExhaustionCarriesTheLastRawText) {
  auto mock = std::make_shared<MockProvider>(std::vector<std::string>{"bad", "worse"});
  const Gateway gw(mock);
  ChatRequest req;
  req.user = "classify";
  try {
    (void)gw.complete_validated<DesignStage>(
        req, [](const std::string& raw) { return parse_stage_label(raw); });
    FAIL();
  } catch (const ValidationExhausted& e) {
    EXPECT_EQ(e.code(), "validation_exhausted");
    EXPECT_NE(std::string(e.what()).find("worse"), std::string::npos);
  }
  EXPECT_THROW(check_max_retries(3), std::invalid_argument);
  EXPECT_THROW(check_max_retries(-1), std::invalid_argument);
}

TEST(Gateway, TransportErrorsAreNotRetried) {
  auto mock = std::make_shared<MockProvider>(
      [](const ChatRequest&) -> ChatResponse { throw Timeout("slow"); });
  const Gateway gw(mock);
  ChatRequest req;
  req.user = "classify";
  EXPECT_THROW((void)gw.complete_validated<DesignStage>(
                   req, [](const std::string& raw) { return parse_stage_label(raw); }),
               Timeout);
  EXPECT_EQ(mock->calls(), 1u);
}

TEST(Replay, RecordThenReplay) {
  const auto path = fs::temp_directory_path() / "dloop-unit-record.jsonl";
  fs::remove(path);
  const auto clock = std::make_shared<FixedClock>(parse_timestamp("2026-01-01T00:00:00.000Z"));
  const auto recorder = record_mode(path, std::make_shared<SyntheticProvider>(), clock);
  auto req = sample_request();
  const auto live = recorder.complete(req);
  const auto replay = replay_mode(path);
  const auto again = replay.complete(req);
  EXPECT_EQ(again.text, live.text);
  req.user += "?";
  try {
    (void)replay.complete(req);
    FAIL();
  } catch (const MissingFixture& e) {
    EXPECT_NE(std::string(e.what()).find(request_hash(req)), std::string::npos);
  }
  const auto t = Transcript::load(path);
  ASSERT_EQ(t.entries().size(), 1u);
  EXPECT_EQ(t.entries()[0].recorded_at, "2026-01-01T00:00:00.000Z");
}

TEST(Replay, CorpusIsServedWithoutNetwork) {
  const auto before = HttpTransport::total_calls();
  const auto t = Transcript::load(dloop::testing::flow_transcript());
  ReplayProvider replay(dloop::testing::flow_transcript());
  for (const auto& e : t.entries()) {
    EXPECT_EQ(e.request_hash, request_hash(e.request));
    EXPECT_EQ(replay.complete(e.request).text, e.response.text);
  }
  EXPECT_EQ(HttpTransport::total_calls(), before);
}

TEST(LiveProvider, BuildsChatCompletionRequest) {
  auto transport = std::make_unique<FakeTransport>();
  auto* fake = transport.get();
  fake->replies.push_back({200, completion(R"({"stage":"Define"})")});
  ::setenv("DLOOP_UNIT_KEY", "sk-test", 1);
  LiveConfig cfg;
  cfg.api_key_env = "DLOOP_UNIT_KEY";
  LiveProvider live(cfg, std::move(transport));
  const auto before = HttpTransport::total_calls();
  auto req = sample_request();
  req.response_hint = OutputKind::StageLabelJson;
  const auto r = live.complete(req);
  EXPECT_EQ(HttpTransport::total_calls(), before + 1);
  EXPECT_EQ(r.text, R"({"stage":"Define"})");
  EXPECT_EQ(r.prompt_tokens, 11);
  EXPECT_EQ(r.provider_id, "live");
  const auto body = json::parse(fake->bodies.at(0));
  EXPECT_EQ(body.at("messages").size(), 2u);
  EXPECT_EQ(body.at("messages")[0].at("role"), "system");
  EXPECT_EQ(body.at("response_format").at("type"), "json_object");
  EXPECT_EQ(fake->last_headers.at(0).second, "Bearer sk-test");
}

TEST(LiveProvider, MapsFailures) {
  auto transport = std::make_unique<FakeTransport>();
  auto* fake = transport.get();
  fake->replies = {{429, "{}"}, {500, "oops"}, {200, "{\"choices\":[]}"}};
  LiveProvider live(LiveConfig{}, std::move(transport));
  EXPECT_THROW((void)live.complete(ChatRequest{}), RateLimited);
  EXPECT_THROW((void)live.complete(ChatRequest{}), TransportError);
  EXPECT_THROW((void)live.complete(ChatRequest{}), TransportError);
}
