#pragma once

// Synthetic predictions: oracle calls from the consensus grades, corrupted
// by flipping exactly round(rate * eligible) patients per error kind.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "raisdr/aggregation.hpp"
#include "raisdr/cohort.hpp"

namespace raisdr {

struct FlipRates {
  /// Referable (R3/R4) patients whose every image is called non-referable.
  double fn = 0.0;
  /// Gradable non-referable patients with the left macula view called
  /// referable.
  double fp = 0.0;
  /// Ungradable patients whose images are called gradable non-referable.
  double ungradable = 0.0;

  /// "FN=5/54,FP=0.03,UG=0.1"; each value a decimal or a fraction in [0, 1].
  /// Throws InvalidParams.
  static FlipRates parse(std::string_view text);
  friend bool operator==(const FlipRates&, const FlipRates&) = default;
};

/// Ungradable for R6, Referable for R3/R4, NonReferable otherwise. Scores
/// are drawn so that the call equals (score >= 0.5).
PredictionSet oracle_predictions(const Cohort& cohort, std::uint64_t seed);

struct SimulationResult {
  PredictionSet predictions;
  std::vector<std::string> flipped_fn;
  std::vector<std::string> flipped_fp;
  std::vector<std::string> flipped_ungradable;
};

SimulationResult simulate_predictions(const Cohort& cohort,
                                      const FlipRates& rates,
                                      std::uint64_t seed);

}  // namespace raisdr
