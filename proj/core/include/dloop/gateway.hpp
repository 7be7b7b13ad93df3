#pragma once

#include <cstdint>
#include <deque>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dloop/clock.hpp"
#include "dloop/error.hpp"
#include "dloop/prompt.hpp"

namespace dloop {

struct ChatRequest {
  std::string system;
  std::string user;
  std::string model = "gpt-4o";
  double temperature = 0.7;
  int max_tokens = 1200;
  OutputKind response_hint = OutputKind::FreeText;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

struct ChatResponse {
  std::string text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  std::string finish_reason = "stop";
  std::string provider_id;

  friend bool operator==(const ChatResponse&, const ChatResponse&) = default;
};

/// Sorted keys, no insignificant whitespace, temperature as a fixed
/// three-decimal string.
std::string canonical_request_json(const ChatRequest& request);
/// Lowercase hex SHA-256 of canonical_request_json.
std::string request_hash(const ChatRequest& request);

nlohmann::json to_json(const ChatRequest& request);
ChatRequest chat_request_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ChatResponse& response);
ChatResponse chat_response_from_json(const nlohmann::json& j, std::string provider_id);

class Provider {
public:
  virtual ~Provider() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  [[nodiscard]] virtual std::string id() const = 0;
};

/// Scripted responses, consumed in order, or a handler computing them.
class MockProvider final : public Provider {
public:
  using Handler = std::function<ChatResponse(const ChatRequest&)>;

  MockProvider() = default;
  explicit MockProvider(std::vector<std::string> script);
  explicit MockProvider(Handler handler) : handler_(std::move(handler)) {}

  void push(std::string text);
  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string id() const override { return "mock"; }

  [[nodiscard]] std::vector<ChatRequest> requests() const;
  [[nodiscard]] std::size_t calls() const;

private:
  mutable std::mutex mutex_;
  std::deque<std::string> script_;
  Handler handler_;
  std::vector<ChatRequest> requests_;
};

struct TranscriptEntry {
  std::string request_hash;
  ChatRequest request;
  ChatResponse response;
  std::string provider_id;
  std::string recorded_at;
};

nlohmann::json to_json(const TranscriptEntry& entry);
TranscriptEntry transcript_entry_from_json(const nlohmann::json& j);

/// JSON-lines exchange log. Lookup is by request hash; the first entry for a
/// hash wins.
class Transcript {
public:
  static Transcript load(const std::filesystem::path& path);

  [[nodiscard]] const TranscriptEntry* find(const std::string& hash) const;
  [[nodiscard]] const std::vector<TranscriptEntry>& entries() const noexcept { return entries_; }
  void add(TranscriptEntry entry);

private:
  std::vector<TranscriptEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Serves every call from a transcript and never touches the network.
class ReplayProvider final : public Provider {
public:
  explicit ReplayProvider(const std::filesystem::path& path);
  explicit ReplayProvider(Transcript transcript) : transcript_(std::move(transcript)) {}

  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string id() const override { return "replay"; }

private:
  Transcript transcript_;
};

/// Forwards to `inner` and appends each exchange to the transcript file.
class RecordingProvider final : public Provider {
public:
  RecordingProvider(std::shared_ptr<Provider> inner, std::filesystem::path path,
                    std::shared_ptr<const Clock> clock);

  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string id() const override { return inner_->id(); }
  [[nodiscard]] std::size_t recorded() const;

private:
  std::shared_ptr<Provider> inner_;
  std::filesystem::path path_;
  std::shared_ptr<const Clock> clock_;
  mutable std::mutex mutex_;
  std::size_t recorded_ = 0;
};

/// Offline stand-in that fabricates well-formed envelopes deterministically
/// from the request text.
class SyntheticProvider final : public Provider {
public:
  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string id() const override { return "synthetic"; }
};

struct CallSummary {
  std::string request_hash;
  std::string response_hint;
  std::string provider_id;
  int attempt = 0;
  std::string outcome;
  int prompt_tokens = 0;
  int completion_tokens = 0;

  friend bool operator==(const CallSummary&, const CallSummary&) = default;
};

class CallLog {
public:
  void append(CallSummary summary);
  [[nodiscard]] std::vector<CallSummary> entries() const;
  [[nodiscard]] std::size_t size() const;

private:
  mutable std::mutex mutex_;
  std::vector<CallSummary> entries_;
};

struct GatewayDefaults {
  std::string model = "gpt-4o";
  double generation_temperature = 0.7;
  double classifier_temperature = 0.0;
  int max_tokens = 1200;
};

/// Cheap, copyable handle onto a shared provider.
class Gateway {
public:
  explicit Gateway(std::shared_ptr<Provider> provider, GatewayDefaults defaults = {});

  /// Same provider, with every call also appended to `log`.
  [[nodiscard]] Gateway scoped(CallLog& log) const;

  ChatResponse complete(const ChatRequest& request) const;

  /// Calls the provider until `validator` accepts the text, at most
  /// 1 + max_retries times. Only OutputError triggers a retry.
  template <class T>
  T complete_validated(const ChatRequest& request,
                       const std::function<T(const std::string&)>& validator,
                       int max_retries = 1) const;

  /// Request for a rendered prompt with the model and temperature defaults.
  [[nodiscard]] ChatRequest make_request(const RenderedPrompt& prompt) const;

  [[nodiscard]] const Provider& provider() const noexcept { return *state_->provider; }
  [[nodiscard]] std::string provider_id() const { return state_->provider->id(); }
  [[nodiscard]] const GatewayDefaults& defaults() const noexcept { return state_->defaults; }

private:
  struct State {
    std::shared_ptr<Provider> provider;
    GatewayDefaults defaults;
  };

  ChatResponse call(const ChatRequest& request, int attempt, std::string& hash) const;
  void note(const std::string& hash, const ChatRequest& request, const ChatResponse* response,
            int attempt, std::string outcome) const;

  std::shared_ptr<State> state_;
  CallLog* log_ = nullptr;
};

/// Appended to the user text when a response is re-requested.
std::string repair_instruction(const std::string& error, const std::string& raw);

void check_max_retries(int max_retries);

Gateway replay_mode(const std::filesystem::path& transcript, GatewayDefaults defaults = {});
Gateway record_mode(const std::filesystem::path& transcript, std::shared_ptr<Provider> inner,
                    std::shared_ptr<const Clock> clock, GatewayDefaults defaults = {});

template <class T>
T Gateway::complete_validated(const ChatRequest& request,
                              const std::function<T(const std::string&)>& validator,
                              int max_retries) const {
  check_max_retries(max_retries);
  ChatRequest current = request;
  std::exception_ptr last_error;
  std::string last_raw;
  std::string last_message;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    std::string hash;
    ChatResponse response = call(current, attempt, hash);
    try {
      T value = validator(response.text);
      note(hash, current, &response, attempt, "ok");
      return value;
    } catch (OutputError& e) {
      e.set_raw(response.text);
      note(hash, current, &response, attempt, e.code());
      last_error = std::current_exception();
      last_raw = response.text;
      last_message = e.what();
      current.user = request.user + repair_instruction(last_message, last_raw);
    }
  }
  throw ValidationExhausted(last_error, last_raw, last_message, max_retries + 1);
}

}  // namespace dloop
