#pragma once

#include <exception>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dloop {

/// Base of every library error. `code()` is a stable machine token
/// (e.g. "invalid_chain") that the HTTP layer forwards verbatim.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  [[nodiscard]] const std::string& code() const noexcept { return code_; }

private:
  std::string code_;
};

// graph-core

class DuplicateId : public Error {
public:
  explicit DuplicateId(std::string_view id)
      : Error("duplicate_id", "id already present: " + std::string(id)) {}
};

class UnknownId : public Error {
public:
  explicit UnknownId(std::string_view id)
      : Error("unknown_id", "unknown id: " + std::string(id)) {}
};

class SelfLoop : public Error {
public:
  explicit SelfLoop(std::string_view id)
      : Error("self_loop", "edge would connect node to itself: " + std::string(id)) {}
};

class DuplicateEdge : public Error {
public:
  DuplicateEdge(std::string_view source, std::string_view target)
      : Error("duplicate_edge", "edge already exists: " + std::string(source) + " -> " +
                                    std::string(target)) {}
};

class CycleDetected : public Error {
public:
  explicit CycleDetected(std::string_view id)
      : Error("cycle_detected", "cycle in the ancestor subgraph of " + std::string(id)) {}
};

// prompt-engine

class MissingPlaceholder : public Error {
public:
  explicit MissingPlaceholder(std::string field)
      : Error("missing_placeholder", "missing placeholder value: " + field),
        field_(std::move(field)) {}

  [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

class EmptyGoal : public Error {
public:
  EmptyGoal() : Error("empty_goal", "goal must not be empty") {}
};

class CatalogError : public Error {
public:
  explicit CatalogError(const std::string& message) : Error("catalog_error", message) {}
};

// Model output that failed its envelope contract. These are the errors the
// gateway's validation retry is allowed to repair.
class OutputError : public Error {
public:
  using Error::Error;

  [[nodiscard]] const std::string& raw() const noexcept { return raw_; }
  void set_raw(std::string raw) { raw_ = std::move(raw); }

private:
  std::string raw_;
};

class SchemaError : public OutputError {
public:
  explicit SchemaError(std::string detail)
      : OutputError("schema_error", "schema error: " + detail), detail_(std::move(detail)) {}

  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
  std::string detail_;
};

class UnparseableLabel : public OutputError {
public:
  explicit UnparseableLabel(const std::string& message)
      : OutputError("unparseable_label", message) {}
};

class InvalidChain : public OutputError {
public:
  explicit InvalidChain(const std::string& message) : OutputError("invalid_chain", message) {}
};

class StepListError : public OutputError {
public:
  explicit StepListError(const std::string& message) : OutputError("step_list_error", message) {}
};

class InvalidTransition : public Error {
public:
  explicit InvalidTransition(const std::string& message)
      : Error("invalid_transition", message) {}
};

// exemplar-store

class ProviderError : public Error {
public:
  explicit ProviderError(const std::string& message) : Error("provider_error", message) {}
};

// llm-gateway

class GatewayError : public Error {
public:
  using Error::Error;
};

class Timeout : public GatewayError {
public:
  explicit Timeout(const std::string& message) : GatewayError("timeout", message) {}
};

class TransportError : public GatewayError {
public:
  explicit TransportError(const std::string& message) : GatewayError("transport_error", message) {}
};

class RateLimited : public GatewayError {
public:
  explicit RateLimited(const std::string& message) : GatewayError("rate_limited", message) {}
};

class MissingFixture : public GatewayError {
public:
  explicit MissingFixture(std::string hash)
      : GatewayError("missing_fixture",
                     "no recorded response for request " + hash +
                         "; re-record the transcript in record mode"),
        hash_(std::move(hash)) {}

  [[nodiscard]] const std::string& hash() const noexcept { return hash_; }

private:
  std::string hash_;
};

class ValidationExhausted : public GatewayError {
public:
  ValidationExhausted(std::exception_ptr cause, std::string last_raw, const std::string& last_error,
                      int attempts)
      : GatewayError("validation_exhausted",
                     "no valid response after " + std::to_string(attempts) +
                         " attempt(s): " + last_error),
        cause_(std::move(cause)), last_raw_(std::move(last_raw)), attempts_(attempts) {}

  [[nodiscard]] const std::exception_ptr& cause() const noexcept { return cause_; }
  [[nodiscard]] const std::string& last_raw() const noexcept { return last_raw_; }
  [[nodiscard]] int attempts() const noexcept { return attempts_; }

private:
  std::exception_ptr cause_;
  std::string last_raw_;
  int attempts_;
};

class IoError : public Error {
public:
  explicit IoError(const std::string& message) : Error("io_error", message) {}
};

// session-store

class SchemaVersionUnsupported : public Error {
public:
  explicit SchemaVersionUnsupported(int version)
      : Error("schema_version_unsupported",
              "unsupported session schema version " + std::to_string(version)),
        version_(version) {}

  [[nodiscard]] int version() const noexcept { return version_; }

private:
  int version_;
};

class CorruptSession : public Error {
public:
  explicit CorruptSession(const std::string& message) : Error("corrupt_session", message) {}
};

// orchestrator

class PreconditionFailed : public Error {
public:
  explicit PreconditionFailed(const std::string& message)
      : Error("precondition_failed", message) {}
};

class NotCompleted : public Error {
public:
  explicit NotCompleted(std::string_view id)
      : Error("not_completed", "chain node is not completed: " + std::string(id)) {}
};

class LastNode : public Error {
public:
  LastNode() : Error("last_node", "cannot delete the last node of a chain") {}
};

// assessment

class RangeError : public Error {
public:
  explicit RangeError(const std::string& message) : Error("range_error", message) {}
};

}  // namespace dloop
