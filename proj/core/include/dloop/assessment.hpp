#pragma once

namespace dloop {

enum class QualityMode { Sum, Mean };

struct QualityInputs {
  double novelty = 1.0;     // N, 1..7
  double importance = 1.0;  // L, 1..5
  double popularity = 0.0;  // R, 0..1 in steps of 0.1
  double frequency = 0.0;   // F, 0..1 in steps of 0.1
};

struct QualityScores {
  double usefulness_raw = 0.0;
  double usefulness_converted = 1.0;
  double quality = 0.0;
};

/// U = L * R * F. R and F must sit on the one-decimal grid.
double compute_usefulness(double importance, double popularity, double frequency);
/// Affine map of U from [0, 5] onto [1, 7].
double convert_usefulness(double usefulness);
double compute_quality(double novelty, double usefulness_converted, QualityMode mode = QualityMode::Mean);
QualityScores score(const QualityInputs& inputs, QualityMode mode = QualityMode::Mean);

}  // namespace dloop
