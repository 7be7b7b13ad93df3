#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <string_view>

namespace dloop {

/// Opaque string identifier, distinct per tag so node, edge and sub-canvas
/// ids cannot be mixed up.
template <class Tag>
class StrongId {
public:
  StrongId() = default;
  explicit StrongId(std::string value) : value_(std::move(value)) {}

  [[nodiscard]] const std::string& value() const noexcept { return value_; }
  [[nodiscard]] bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const StrongId&, const StrongId&) = default;
  friend bool operator==(const StrongId&, const StrongId&) = default;

private:
  std::string value_;
};

using NodeId = StrongId<struct NodeIdTag>;
using EdgeId = StrongId<struct EdgeIdTag>;
using SubCanvasId = StrongId<struct SubCanvasIdTag>;

/// Source of fresh UUIDv4 strings. Injected so replay runs are reproducible.
class IdSource {
public:
  virtual ~IdSource() = default;
  virtual std::string next() = 0;
};

class RandomIdSource final : public IdSource {
public:
  RandomIdSource();
  explicit RandomIdSource(std::uint64_t seed);

  std::string next() override;

private:
  std::mutex mutex_;
  std::mt19937_64 rng_;
};

/// Formats 128 random bits as a version-4, variant-1 UUID.
std::string format_uuid_v4(std::uint64_t hi, std::uint64_t lo);

bool is_uuid_v4(std::string_view text);

}  // namespace dloop

template <class Tag>
struct std::hash<dloop::StrongId<Tag>> {
  std::size_t operator()(const dloop::StrongId<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.value());
  }
};
