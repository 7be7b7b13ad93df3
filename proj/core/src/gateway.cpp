#include "dloop/gateway.hpp"

#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

namespace dloop {

namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

OutputKind hint_from_json(const nlohmann::json& j) {
  const auto text = j.get<std::string>();
  const auto kind = output_kind_from_string(text);
  if (!kind) throw std::invalid_argument("unknown response_hint " + text);
  return *kind;
}

bool is_classifier(OutputKind kind) {
  return kind == OutputKind::ModeLabelJson || kind == OutputKind::StageLabelJson;
}

}  // namespace

nlohmann::json to_json(const ChatRequest& request) {
  return nlohmann::json{{"system", request.system},
                        {"user", request.user},
                        {"model", request.model},
                        {"temperature", fmt::format("{:.3f}", request.temperature)},
                        {"max_tokens", request.max_tokens},
                        {"response_hint", std::string(to_string(request.response_hint))}};
}

ChatRequest chat_request_from_json(const nlohmann::json& j) {
  ChatRequest r;
  r.system = j.at("system").get<std::string>();
  r.user = j.at("user").get<std::string>();
  r.model = j.at("model").get<std::string>();
  const auto& t = j.at("temperature");
  r.temperature = t.is_string() ? std::stod(t.get<std::string>()) : t.get<double>();
  r.max_tokens = j.at("max_tokens").get<int>();
  r.response_hint = hint_from_json(j.at("response_hint"));
  return r;
}

nlohmann::json to_json(const ChatResponse& response) {
  return nlohmann::json{{"text", response.text},
                        {"prompt_tokens", response.prompt_tokens},
                        {"completion_tokens", response.completion_tokens},
                        {"finish_reason", response.finish_reason}};
}

ChatResponse chat_response_from_json(const nlohmann::json& j, std::string provider_id) {
  ChatResponse r;
  r.text = j.at("text").get<std::string>();
  r.prompt_tokens = j.value("prompt_tokens", 0);
  r.completion_tokens = j.value("completion_tokens", 0);
  r.finish_reason = j.value("finish_reason", std::string("stop"));
  r.provider_id = std::move(provider_id);
  return r;
}

std::string canonical_request_json(const ChatRequest& request) {
  return to_json(request).dump();
}

std::string request_hash(const ChatRequest& request) {
  return sha256_hex(canonical_request_json(request));
}

// MockProvider

MockProvider::MockProvider(std::vector<std::string> script)
    : script_(std::make_move_iterator(script.begin()), std::make_move_iterator(script.end())) {}

void MockProvider::push(std::string text) {
  std::lock_guard lock(mutex_);
  script_.push_back(std::move(text));
}

ChatResponse MockProvider::complete(const ChatRequest& request) {
  std::unique_lock lock(mutex_);
  requests_.push_back(request);
  if (handler_) {
    lock.unlock();
    auto r = handler_(request);
    r.provider_id = "mock";
    return r;
  }
  if (script_.empty()) throw TransportError("mock script exhausted");
  ChatResponse r;
  r.text = std::move(script_.front());
  script_.pop_front();
  r.provider_id = "mock";
  return r;
}

std::vector<ChatRequest> MockProvider::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::size_t MockProvider::calls() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

// Transcript

nlohmann::json to_json(const TranscriptEntry& entry) {
  return nlohmann::json{{"request_hash", entry.request_hash},
                        {"request", to_json(entry.request)},
                        {"response", to_json(entry.response)},
                        {"provider_id", entry.provider_id},
                        {"recorded_at", entry.recorded_at}};
}

TranscriptEntry transcript_entry_from_json(const nlohmann::json& j) {
  TranscriptEntry e;
  e.request_hash = j.at("request_hash").get<std::string>();
  e.request = chat_request_from_json(j.at("request"));
  e.provider_id = j.value("provider_id", std::string{});
  e.response = chat_response_from_json(j.at("response"), e.provider_id);
  e.recorded_at = j.value("recorded_at", std::string{});
  return e;
}

Transcript Transcript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open transcript " + path.string());
  Transcript t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      t.add(transcript_entry_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw IoError(fmt::format("{}:{}: bad transcript entry: {}", path.string(), lineno, e.what()));
    }
  }
  return t;
}

const TranscriptEntry* Transcript::find(const std::string& hash) const {
  auto it = index_.find(hash);
  return it == index_.end() ? nullptr : &entries_[it->second];
}

void Transcript::add(TranscriptEntry entry) {
  index_.try_emplace(entry.request_hash, entries_.size());
  entries_.push_back(std::move(entry));
}

ReplayProvider::ReplayProvider(const std::filesystem::path& path)
    : transcript_(Transcript::load(path)) {}

ChatResponse ReplayProvider::complete(const ChatRequest& request) {
  const auto hash = request_hash(request);
  const auto* entry = transcript_.find(hash);
  if (!entry) throw MissingFixture(hash);
  auto r = entry->response;
  r.provider_id = "replay";
  return r;
}

RecordingProvider::RecordingProvider(std::shared_ptr<Provider> inner, std::filesystem::path path,
                                     std::shared_ptr<const Clock> clock)
    : inner_(std::move(inner)), path_(std::move(path)), clock_(std::move(clock)) {
  std::ofstream probe(path_, std::ios::app);
  if (!probe) throw IoError("cannot open transcript for writing: " + path_.string());
}

ChatResponse RecordingProvider::complete(const ChatRequest& request) {
  auto response = inner_->complete(request);
  TranscriptEntry entry{request_hash(request), request, response, inner_->id(),
                        format_timestamp(clock_->now())};
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out << to_json(entry).dump() << '\n';
  if (!out) throw IoError("cannot append to transcript " + path_.string());
  ++recorded_;
  return response;
}

std::size_t RecordingProvider::recorded() const {
  std::lock_guard lock(mutex_);
  return recorded_;
}

// CallLog

void CallLog::append(CallSummary summary) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(summary));
}

std::vector<CallSummary> CallLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t CallLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

// Gateway

Gateway::Gateway(std::shared_ptr<Provider> provider, GatewayDefaults defaults)
    : state_(std::make_shared<State>(State{std::move(provider), std::move(defaults)})) {
  if (!state_->provider) throw std::invalid_argument("gateway needs a provider");
}

Gateway Gateway::scoped(CallLog& log) const {
  Gateway g = *this;
  g.log_ = &log;
  return g;
}

ChatResponse Gateway::call(const ChatRequest& request, int attempt, std::string& hash) const {
  if (request.system.empty() && request.user.empty()) {
    throw std::invalid_argument("chat request needs system or user text");
  }
  hash = request_hash(request);
  try {
    return state_->provider->complete(request);
  } catch (const Error& e) {
    note(hash, request, nullptr, attempt, e.code());
    throw;
  }
}

void Gateway::note(const std::string& hash, const ChatRequest& request,
                   const ChatResponse* response, int attempt, std::string outcome) const {
  if (!log_) return;
  CallSummary s;
  s.request_hash = hash;
  s.response_hint = std::string(to_string(request.response_hint));
  s.provider_id = state_->provider->id();
  s.attempt = attempt;
  s.outcome = std::move(outcome);
  if (response) {
    s.prompt_tokens = response->prompt_tokens;
    s.completion_tokens = response->completion_tokens;
  }
  log_->append(std::move(s));
}

ChatResponse Gateway::complete(const ChatRequest& request) const {
  std::string hash;
  auto response = call(request, 0, hash);
  note(hash, request, &response, 0, "ok");
  return response;
}

ChatRequest Gateway::make_request(const RenderedPrompt& prompt) const {
  ChatRequest r;
  r.system = prompt.system;
  r.user = prompt.user;
  r.model = state_->defaults.model;
  r.temperature = is_classifier(prompt.expected_output) ? state_->defaults.classifier_temperature
                                                        : state_->defaults.generation_temperature;
  r.max_tokens = state_->defaults.max_tokens;
  r.response_hint = prompt.expected_output;
  return r;
}

std::string repair_instruction(const std::string& error, const std::string& raw) {
  return fmt::format(
      "\n\nYour previous response could not be used: {}\nPrevious response:\n{}\n"
      "Respond again with output that follows the required format exactly.",
      error, raw);
}

void check_max_retries(int max_retries) {
  if (max_retries < 0 || max_retries > 2) {
    throw std::invalid_argument("max_retries must be within [0, 2]");
  }
}

Gateway replay_mode(const std::filesystem::path& transcript, GatewayDefaults defaults) {
  return Gateway(std::make_shared<ReplayProvider>(transcript), std::move(defaults));
}

Gateway record_mode(const std::filesystem::path& transcript, std::shared_ptr<Provider> inner,
                    std::shared_ptr<const Clock> clock, GatewayDefaults defaults) {
  return Gateway(
      std::make_shared<RecordingProvider>(std::move(inner), transcript, std::move(clock)),
      std::move(defaults));
}

}  // namespace dloop
