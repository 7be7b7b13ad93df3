#include "dloop/clock.hpp"

#include <cstdio>
#include <stdexcept>

#include <fmt/format.h>

namespace dloop {

using std::chrono::days;
using std::chrono::milliseconds;

Timestamp SystemClock::now() const {
  return std::chrono::time_point_cast<milliseconds>(std::chrono::system_clock::now());
}

Timestamp SteppingClock::now() const {
  const auto ms = next_.fetch_add(step_);
  return Timestamp{milliseconds{ms}};
}

std::string format_timestamp(Timestamp t) {
  const auto day = std::chrono::floor<days>(t);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{t - day};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}.{:03d}Z",
                     static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()), hms.hours().count(),
                     hms.minutes().count(), hms.seconds().count(), hms.subseconds().count());
}

Timestamp parse_timestamp(std::string_view text) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0, ms = 0;
  const std::string buf(text);
  char tail = 0;
  if (std::sscanf(buf.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u.%3u%c", &y, &mo, &d, &h, &mi, &s, &ms,
                  &tail) != 8 ||
      tail != 'Z' || buf.size() != 24) {
    throw std::invalid_argument("bad timestamp: " + buf);
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo},
                                        std::chrono::day{d}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) {
    throw std::invalid_argument("bad timestamp: " + buf);
  }
  return Timestamp{std::chrono::sys_days{ymd}.time_since_epoch() + std::chrono::hours{h} +
                   std::chrono::minutes{mi} + std::chrono::seconds{s} + milliseconds{ms}};
}

}  // namespace dloop
