#pragma once

#include <atomic>
#include <chrono>
#include <string>
#include <string_view>

namespace dloop {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

class Clock {
public:
  virtual ~Clock() = default;
  [[nodiscard]] virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
public:
  [[nodiscard]] Timestamp now() const override;
};

class FixedClock final : public Clock {
public:
  explicit FixedClock(Timestamp at) : at_(at) {}
  [[nodiscard]] Timestamp now() const override { return at_; }

private:
  Timestamp at_;
};

// Advances by `step` on every read.
class SteppingClock final : public Clock {
public:
  SteppingClock(Timestamp start, std::chrono::milliseconds step)
      : next_(start.time_since_epoch().count()), step_(step.count()) {}

  [[nodiscard]] Timestamp now() const override;

private:
  mutable std::atomic<std::int64_t> next_;
  std::int64_t step_;
};

/// "YYYY-MM-DDTHH:MM:SS.mmmZ"
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view text);

}  // namespace dloop
