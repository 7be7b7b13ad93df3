#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "dloop/live_provider.hpp"

namespace dloop {

namespace {

std::atomic<std::uint64_t> g_http_calls{0};

class HttplibTransport final : public HttpTransport {
public:
  explicit HttplibTransport(std::string base_url) : base_url_(std::move(base_url)) {}

protected:
  HttpResponse do_post(const std::string& path, const std::string& body,
                       const HttpHeaders& headers, std::chrono::seconds timeout) override {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto result = client.Post(path, h, body, "application/json");
    if (!result) {
      const auto err = result.error();
      if (err == httplib::Error::Read || err == httplib::Error::Write ||
          err == httplib::Error::ConnectionTimeout) {
        throw Timeout("request to " + base_url_ + path + " timed out: " + httplib::to_string(err));
      }
      throw TransportError("request to " + base_url_ + path + " failed: " + httplib::to_string(err));
    }
    return HttpResponse{result->status, result->body};
  }

private:
  std::string base_url_;
};

}  // namespace

HttpResponse HttpTransport::post(const std::string& path, const std::string& body,
                                 const HttpHeaders& headers, std::chrono::seconds timeout) {
  g_http_calls.fetch_add(1, std::memory_order_relaxed);
  return do_post(path, body, headers, timeout);
}

std::uint64_t HttpTransport::total_calls() noexcept {
  return g_http_calls.load(std::memory_order_relaxed);
}

std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url) {
  return std::make_unique<HttplibTransport>(base_url);
}

}  // namespace dloop
