#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include "dloop/gateway.hpp"

namespace dloop {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// Minimal POST-only transport. Every implementation is counted so tests can
/// assert that no network traffic happened.
class HttpTransport {
public:
  virtual ~HttpTransport() = default;

  HttpResponse post(const std::string& path, const std::string& body, const HttpHeaders& headers,
                    std::chrono::seconds timeout);

  static std::uint64_t total_calls() noexcept;

protected:
  virtual HttpResponse do_post(const std::string& path, const std::string& body,
                               const HttpHeaders& headers, std::chrono::seconds timeout) = 0;
};

/// cpp-httplib client for `base_url` (http:// or https://).
std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url);

struct LiveConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::seconds timeout{60};
  int max_in_flight = 4;
};

/// OpenAI-compatible chat-completion client. No transport-level retry.
class LiveProvider final : public Provider {
public:
  LiveProvider(LiveConfig config, std::unique_ptr<HttpTransport> transport);

  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string id() const override { return "live"; }

private:
  LiveConfig config_;
  std::unique_ptr<HttpTransport> transport_;
  std::counting_semaphore<> slots_;
};

}  // namespace dloop
