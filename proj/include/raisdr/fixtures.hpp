#pragma once

// Published confusion matrices with their reported rounded percentages, and
// a synthetic study whose per-patient outcomes replay the proposed-system
// rows of the per-patient table.

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raisdr/aggregation.hpp"
#include "raisdr/cohort.hpp"
#include "raisdr/confusion.hpp"
#include "raisdr/inference.hpp"
#include "raisdr/metrics.hpp"

namespace raisdr {

/// Order of the reported percentages.
inline constexpr std::array<std::string_view, 6> kHeadlineCells = {
    "F1neg", "Sens", "Spec", "PPV", "NPV", "Acc"};

struct PublishedRow {
  std::string_view table;   // "per-patient" / "per-image"
  std::string_view system;  // "proposed" / "eyeart"
  ReferralScheme scheme;
  EvalUnit unit;
  ConfusionMatrix cm;
  std::array<std::uint64_t, 6> expected;  // kHeadlineCells order

  std::string label() const;
};

std::span<const PublishedRow> published_rows();

/// Rounded percentages of a report in kHeadlineCells order; Undefined
/// metrics yield nullopt.
std::array<std::optional<std::uint64_t>, 6> headline_cells(
    const MetricsReport& report);

struct ReproductionRow {
  PublishedRow row;
  MetricsReport metrics;
  /// e.g. "per-patient/proposed/RDR: Sens expected 91 got 90".
  std::vector<std::string> mismatches;
};

std::vector<ReproductionRow> reproduce(std::span<const PublishedRow> rows);

/// "TP=49,FP=28,FN=5,TN=715" in any order. Throws ValueError.
ConfusionMatrix parse_matrix_spec(std::string_view text);

/// Cohort, predictions and stub manifest such that experiment 1 yields
/// (TN 715, FP 28, FN 5, TP 49) and experiment 2 (637, 106, 33, 270).
/// Projection-B images carry contradicting predictions, so they only agree
/// with the tables when the projection filter is honored.
struct ReplayFixture {
  Cohort cohort;
  PredictionSet predictions;
  BackendManifest manifest;
};

const ReplayFixture& per_patient_fixture();

}  // namespace raisdr
