#include "dloop/live_provider.hpp"

#include <cstdlib>

#include <nlohmann/json.hpp>

namespace dloop {

LiveProvider::LiveProvider(LiveConfig config, std::unique_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)),
      slots_(std::max(1, config_.max_in_flight)) {
  if (!transport_) throw std::invalid_argument("live provider needs a transport");
}

ChatResponse LiveProvider::complete(const ChatRequest& request) {
  nlohmann::json body{
      {"model", request.model},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
      {"messages", nlohmann::json::array()},
  };
  if (!request.system.empty()) {
    body["messages"].push_back({{"role", "system"}, {"content", request.system}});
  }
  if (!request.user.empty()) {
    body["messages"].push_back({{"role", "user"}, {"content", request.user}});
  }
  if (request.response_hint != OutputKind::FreeText) {
    body["response_format"] = {{"type", "json_object"}};
  }

  HttpHeaders headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }

  HttpResponse http;
  slots_.acquire();
  try {
    http = transport_->post(config_.path, body.dump(), headers, config_.timeout);
  } catch (...) {
    slots_.release();
    throw;
  }
  slots_.release();

  if (http.status == 429) throw RateLimited("provider returned 429");
  if (http.status < 200 || http.status >= 300) {
    throw TransportError("provider returned HTTP " + std::to_string(http.status));
  }

  try {
    const auto j = nlohmann::json::parse(http.body);
    const auto& choice = j.at("choices").at(0);
    ChatResponse r;
    const auto& content = choice.at("message").at("content");
    r.text = content.is_null() ? std::string{} : content.get<std::string>();
    r.finish_reason = choice.value("finish_reason", std::string("stop"));
    if (j.contains("usage")) {
      r.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      r.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    r.provider_id = id();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed provider response: ") + e.what());
  }
}

}  // namespace dloop
