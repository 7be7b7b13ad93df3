#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dloop/clock.hpp"
#include "dloop/exemplar.hpp"
#include "dloop/gateway.hpp"
#include "dloop/ids.hpp"
#include "dloop/orchestrator.hpp"
#include "dloop/prompt.hpp"
#include "dloop/session_store.hpp"

namespace dloop {

class BadRequest : public Error {
public:
  explicit BadRequest(const std::string& message) : Error("bad_request", message) {}
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;
};

nlohmann::json error_envelope(const std::string& code, const std::string& message,
                              const nlohmann::json& details = nullptr);
/// HTTP status for an error code token.
int status_for(const std::string& code);

struct ApiDeps {
  const TemplateCatalog* catalog = nullptr;
  const ExemplarStore* exemplars = nullptr;
  std::optional<Gateway> gateway;
  SessionStore* store = nullptr;
  IdSource* ids = nullptr;
  const Clock* clock = nullptr;
  std::string provider_label;
};

/// HTTP/JSON facade. Every mutation loads the stored session, works on a
/// copy, validates it and saves only on success.
class ApiService {
public:
  explicit ApiService(ApiDeps deps);

  ApiResponse handle(const ApiRequest& request);
  void set_fault_hook(FaultHook hook) { hook_ = std::move(hook); }

  /// "METHOD /path/{param}" for every route, in registration order.
  [[nodiscard]] std::vector<std::string> routes() const;

private:
  using Params = std::map<std::string, std::string>;
  using Handler = std::function<ApiResponse(const Params&, const nlohmann::json&)>;

  struct Route {
    std::string method;
    std::vector<std::string> segments;
    bool mutation = false;
    Handler handler;
  };

  void add(std::string method, const std::string& pattern, bool mutation, Handler handler);
  void register_routes();

  /// Runs `fn` on a copy of the stored session under the writer lease.
  ApiResponse mutate(const std::string& id,
                     const std::function<ApiResponse(Session&, Orchestrator&)>& fn);
  ApiResponse run_chain(const Params& p, bool regenerate);
  void fault(std::string_view point) const;

  ApiDeps deps_;
  FaultHook hook_;
  std::vector<Route> routes_;
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8787;
  std::string provider = "replay";
  std::string model = "gpt-4o";
  std::string transcript;
  std::string exemplar_dir;
  std::string session_dir = "sessions";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string base_url = "https://api.openai.com";
  bool record = false;
};

/// Merges defaults, then the JSON config file, then DLOOP_* variables read
/// through `env`, then explicitly set flags.
ServeConfig resolve_config(const std::map<std::string, std::string>& flags,
                           const std::function<std::optional<std::string>(const std::string&)>& env,
                           const std::optional<std::string>& config_file);

/// Blocking HTTP server over an ApiService.
class HttpServer {
public:
  HttpServer(ApiService& service, std::string host, int port);
  ~HttpServer();

  /// Returns false when the socket could not be bound.
  bool listen();
  /// Binds to an ephemeral port and returns it, or -1.
  int bind_any();
  bool listen_after_bind();
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dloop
