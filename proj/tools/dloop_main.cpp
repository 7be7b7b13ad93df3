#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "dloop/api.hpp"
#include "dloop/assessment.hpp"
#include "dloop/live_provider.hpp"
#include "dloop/session_store.hpp"

namespace {

dloop::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

std::optional<std::string> getenv_opt(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

int serve(const std::map<std::string, std::string>& flags,
          const std::optional<std::string>& config_file, const std::string& template_dir) {
  const auto cfg = dloop::resolve_config(flags, getenv_opt, config_file);
  auto clock = std::make_shared<dloop::SystemClock>();

  dloop::GatewayDefaults defaults;
  defaults.model = cfg.model;
  std::shared_ptr<dloop::Provider> provider;
  if (cfg.provider == "replay") {
    if (cfg.transcript.empty()) throw std::runtime_error("replay mode needs --transcript");
    provider = std::make_shared<dloop::ReplayProvider>(cfg.transcript);
  } else if (cfg.provider == "mock") {
    provider = std::make_shared<dloop::SyntheticProvider>();
  } else {
    dloop::LiveConfig live;
    live.base_url = cfg.base_url;
    live.api_key_env = cfg.api_key_env;
    if (!std::getenv(cfg.api_key_env.c_str())) {
      throw std::runtime_error("environment variable " + cfg.api_key_env + " is not set");
    }
    provider = std::make_shared<dloop::LiveProvider>(live, dloop::make_http_transport(cfg.base_url));
  }
  if (cfg.record) {
    if (cfg.transcript.empty()) throw std::runtime_error("--record needs --transcript");
    provider = std::make_shared<dloop::RecordingProvider>(provider, cfg.transcript, clock);
  }

  const auto catalog = template_dir.empty() ? dloop::TemplateCatalog::load_default()
                                            : dloop::TemplateCatalog::load(template_dir);
  std::optional<dloop::ExemplarStore> exemplars;
  if (!cfg.exemplar_dir.empty()) {
    exemplars = dloop::ExemplarStore::load_directory(
        cfg.exemplar_dir, std::make_shared<dloop::HashingEmbeddingProvider>());
    spdlog::info("loaded {} exemplars from {}", exemplars->size(), cfg.exemplar_dir);
  }
  dloop::SessionStore store(cfg.session_dir);
  dloop::RandomIdSource ids;

  dloop::ApiDeps deps;
  deps.catalog = &catalog;
  deps.exemplars = exemplars ? &*exemplars : nullptr;
  deps.gateway.emplace(provider, defaults);
  deps.store = &store;
  deps.ids = &ids;
  deps.clock = clock.get();
  deps.provider_label = cfg.provider;
  dloop::ApiService service(std::move(deps));

  dloop::HttpServer server(service, cfg.host, cfg.port);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  spdlog::info("serving on http://{}:{} with provider {}", cfg.host, cfg.port, cfg.provider);
  if (!server.listen()) {
    g_server = nullptr;
    throw std::runtime_error(fmt::format("cannot listen on {}:{}", cfg.host, cfg.port));
  }
  g_server = nullptr;
  return 0;
}

int validate_file(const std::string& path) {
  try {
    const auto s = dloop::load_session(path);
    std::cout << "ok " << s.id << "\n";
    return 0;
  } catch (const dloop::Error& e) {
    std::cout << e.code() << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dloop: node-based reasoning-chain design assistant"};
  app.require_subcommand(1);

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP/JSON service");
  std::map<std::string, std::string> flags;
  std::string config_file, template_dir;
  int port = 0;
  bool record = false;
  std::string host, provider, model, transcript, exemplar_dir, session_dir, api_key_env, base_url;
  serve_cmd->add_option("--config", config_file, "JSON config file");
  serve_cmd->add_option("--host", host, "Bind address (default 127.0.0.1)");
  serve_cmd->add_option("--port", port, "Port (default 8787)");
  serve_cmd->add_option("--provider", provider, "live | replay | mock (default replay)")
      ->check(CLI::IsMember({"live", "replay", "mock"}));
  serve_cmd->add_option("--model", model, "Model name (default gpt-4o)");
  serve_cmd->add_option("--transcript", transcript, "Transcript JSONL for replay or record");
  serve_cmd->add_option("--exemplar-dir", exemplar_dir, "Directory of exemplar JSON files");
  serve_cmd->add_option("--session-dir", session_dir, "Session directory (default sessions)");
  serve_cmd->add_option("--api-key-env", api_key_env, "Env var holding the API key");
  serve_cmd->add_option("--base-url", base_url, "Base URL of the chat-completions API");
  serve_cmd->add_option("--template-dir", template_dir, "Template catalog directory");
  serve_cmd->add_flag("--record", record, "Append every live call to --transcript");

  auto* validate_cmd = app.add_subcommand("validate", "Check a session file");
  std::string validate_path;
  validate_cmd->add_option("file", validate_path)->required();

  auto* list_cmd = app.add_subcommand("list", "List sessions, newest first");
  std::string list_dir = "sessions";
  list_cmd->add_option("--session-dir", list_dir);

  auto* score_cmd = app.add_subcommand("score", "Compute usefulness and quality");
  double novelty = 0, importance = 0, popularity = 0, frequency = 0;
  std::string mode = "mean";
  score_cmd->add_option("--novelty", novelty)->required();
  score_cmd->add_option("--importance", importance)->required();
  score_cmd->add_option("--popularity", popularity)->required();
  score_cmd->add_option("--frequency", frequency)->required();
  score_cmd->add_option("--mode", mode)->check(CLI::IsMember({"mean", "sum"}));

  auto* hash_cmd = app.add_subcommand("hash", "Print the transcript hash of a request JSON");
  std::string hash_path;
  hash_cmd->add_option("file", hash_path, "Request JSON file, or - for stdin")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) {
      auto set = [&](const char* flag, const char* key, const std::string& value) {
        if (serve_cmd->count(flag) > 0) flags[key] = value;
      };
      set("--host", "host", host);
      set("--port", "port", std::to_string(port));
      set("--provider", "provider", provider);
      set("--model", "model", model);
      set("--transcript", "transcript", transcript);
      set("--exemplar-dir", "exemplar_dir", exemplar_dir);
      set("--session-dir", "session_dir", session_dir);
      set("--api-key-env", "api_key_env", api_key_env);
      set("--base-url", "base_url", base_url);
      if (record) flags["record"] = "true";
      return serve(flags,
                   config_file.empty() ? std::nullopt : std::optional<std::string>(config_file),
                   template_dir);
    }
    if (*validate_cmd) return validate_file(validate_path);
    if (*list_cmd) {
      const auto listing = dloop::list_sessions(list_dir);
      for (const auto& s : listing.sessions) {
        std::cout << s.id << "\t" << dloop::format_timestamp(s.modified_at) << "\t" << s.title
                  << "\n";
      }
      for (const auto& w : listing.warnings) std::cerr << "warning: " << w << "\n";
      return 0;
    }
    if (*score_cmd) {
      const auto s = dloop::score({novelty, importance, popularity, frequency},
                                  mode == "sum" ? dloop::QualityMode::Sum
                                                : dloop::QualityMode::Mean);
      std::cout << fmt::format("usefulness_raw {:.4f}\nusefulness_converted {:.4f}\nquality {:.4f}\n",
                               s.usefulness_raw, s.usefulness_converted, s.quality);
      return 0;
    }
    if (*hash_cmd) {
      nlohmann::json j;
      if (hash_path == "-") {
        j = nlohmann::json::parse(std::cin);
      } else {
        std::ifstream in(hash_path);
        if (!in) throw std::runtime_error("cannot read " + hash_path);
        j = nlohmann::json::parse(in);
      }
      std::cout << dloop::request_hash(dloop::chat_request_from_json(j)) << "\n";
      return 0;
    }
  } catch (const dloop::Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
