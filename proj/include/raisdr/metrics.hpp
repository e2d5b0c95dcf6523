#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "json.hpp"
#include "raisdr/confusion.hpp"

namespace raisdr {

using Rational = boost::rational<std::int64_t>;

/// An unreduced ratio of counts, kept exact until display.
struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const noexcept {
    return static_cast<double>(num) / static_cast<double>(den);
  }
  Rational exact() const {
    return Rational(static_cast<std::int64_t>(num),
                    static_cast<std::int64_t>(den));
  }
  /// Integer percent, rounding halves up.
  std::uint64_t percent() const noexcept {
    return (200 * num + den) / (2 * den);
  }
  friend bool operator==(const Fraction&, const Fraction&) = default;
};

/// Classification metrics of one confusion matrix. A metric is nullopt
/// (Undefined) exactly when its denominator is zero.
///
/// Two F1 values are reported. f1_positive scores the Referable class from
/// PPV and sensitivity; f1_negative scores the NonReferable class from NPV
/// and specificity. The published headline "F1" figures for this screening
/// task match f1_negative, so reports never show a bare "F1".
struct MetricsReport {
  ConfusionMatrix cm;
  std::optional<Fraction> accuracy;
  std::optional<Fraction> ppv;
  std::optional<Fraction> npv;
  std::optional<Fraction> sensitivity;
  std::optional<Fraction> specificity;
  std::optional<Fraction> f1_positive;
  std::optional<Fraction> f1_negative;
  std::optional<Fraction> f1_macro;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Throws Error(EmptyMatrix) when the matrix holds no units.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

/// "F1neg; (Sens, Spec, PPV, NPV, Acc)" in rounded percent, "-" for
/// Undefined. e.g. "98; (91, 96, 64, 99, 96)".
std::string headline(const MetricsReport& report);

/// Raw fractions plus rounded percentages for every metric.
nlohmann::json to_json(const MetricsReport& report);

struct RocPoint {
  /// Units scoring at or above this are called positive. The first point
  /// uses +infinity (nobody positive).
  double threshold = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
  std::vector<RocPoint> points;  // descending threshold
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  double auc = 0.0;
};

/// One point per distinct score, plus the (0,0) start; tied scores share a
/// point. Throws DegenerateLabels when only one class is present and
/// ValueError on mismatched lengths, labels other than 0/1, or NaN scores.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> truths);

/// Trapezoidal area under the curve, evaluated on the integer counts, so it
/// equals the tie-corrected Mann-Whitney statistic.
double auc(const RocCurve& curve);

/// `threshold,fpr,tpr` rows.
std::string roc_to_csv(const RocCurve& curve);
nlohmann::json to_json(const RocCurve& curve);

}  // namespace raisdr
