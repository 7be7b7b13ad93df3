#include "dloop/assessment.hpp"

#include <cmath>

#include <fmt/format.h>

#include "dloop/error.hpp"

namespace dloop {

namespace {

void require(bool ok, const char* name, double value, const char* range) {
  if (!ok || std::isnan(value)) throw RangeError(fmt::format("{} = {} outside {}", name, value, range));
}

// Tenths as an integer; rejects values off the one-decimal grid.
long tenths(const char* name, double value) {
  require(value >= 0.0 && value <= 1.0, name, value, "[0, 1]");
  const double scaled = value * 10.0;
  const long rounded = std::lround(scaled);
  require(std::abs(scaled - static_cast<double>(rounded)) <= 1e-9, name, value,
          "the one-decimal grid");
  return rounded;
}

}  // namespace

double compute_usefulness(double importance, double popularity, double frequency) {
  require(importance >= 1.0 && importance <= 5.0, "L", importance, "[1, 5]");
  const long r = tenths("R", popularity);
  const long f = tenths("F", frequency);
  return importance * static_cast<double>(r * f) / 100.0;
}

double convert_usefulness(double usefulness) {
  require(usefulness >= 0.0 && usefulness <= 5.0, "U", usefulness, "[0, 5]");
  return 1.0 + 6.0 * (usefulness / 5.0);
}

double compute_quality(double novelty, double usefulness_converted, QualityMode mode) {
  require(novelty >= 1.0 && novelty <= 7.0, "N", novelty, "[1, 7]");
  require(usefulness_converted >= 1.0 && usefulness_converted <= 7.0, "U'", usefulness_converted,
          "[1, 7]");
  const double sum = novelty + usefulness_converted;
  return mode == QualityMode::Sum ? sum : sum / 2.0;
}

QualityScores score(const QualityInputs& in, QualityMode mode) {
  QualityScores s;
  s.usefulness_raw = compute_usefulness(in.importance, in.popularity, in.frequency);
  s.usefulness_converted = convert_usefulness(s.usefulness_raw);
  s.quality = compute_quality(in.novelty, s.usefulness_converted, mode);
  return s;
}

}  // namespace dloop
