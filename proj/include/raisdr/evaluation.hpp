#pragma once

// Named experiments and the end-to-end evaluation: scenario filtering,
// metrics, optional ROC, per-group metrics and fairness rows.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "raisdr/aggregation.hpp"
#include "raisdr/fairness.hpp"
#include "raisdr/metrics.hpp"

namespace raisdr {

struct Experiment {
  int number = 0;
  ScenarioSpec scenario;
  /// Subgroup comparison, evaluated over `comparison_scope` (the scenario
  /// with any filter on the compared attribute removed).
  std::optional<GroupSpec> comparison;
  std::optional<ScenarioSpec> comparison_scope;

  std::string name() const { return "experiment-" + std::to_string(number); }
};

/// Experiments 1..9.
std::span<const Experiment> experiments();

/// Accepts "experiment-N" or a ScenarioSpec string. Throws ValueError.
Experiment resolve_scenario(std::string_view text);

struct GroupMetrics {
  std::string label;
  std::size_t units = 0;
  std::optional<MetricsReport> metrics;  // nullopt for an empty group
};

struct EvaluationReport {
  std::string name;
  ScenarioSpec scenario;
  std::vector<LabeledPair> pairs;
  MetricsReport metrics;
  std::optional<RocCurve> roc;
  std::vector<GroupMetrics> groups;
  std::vector<FairnessReport> fairness;
};

/// Throws EmptyInput when the scenario admits no units, plus any error of
/// the underlying stages.
EvaluationReport evaluate(const Cohort& cohort, const PredictionSet& predictions,
                          const Experiment& experiment);

/// ROC over pairs when every pair has a score and both classes occur.
std::optional<RocCurve> roc_of(std::span<const LabeledPair> pairs);

nlohmann::json to_json(const EvaluationReport& report);
std::string to_text(const EvaluationReport& report);

}  // namespace raisdr
