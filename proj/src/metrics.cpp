#include "raisdr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "raisdr/error.hpp"

namespace raisdr {
namespace {

std::optional<Fraction> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return Fraction{num, den};
}

// F1 from its precision and recall, defined only when both are and their
// sum is positive. The returned fraction is 2a / (2a + b + c) on counts.
std::optional<Fraction> f1(const std::optional<Fraction>& precision,
                           const std::optional<Fraction>& recall,
                           std::uint64_t hits, std::uint64_t misses) {
  if (!precision || !recall) return std::nullopt;
  if (precision->num == 0 && recall->num == 0) return std::nullopt;
  return Fraction{2 * hits, 2 * hits + misses};
}

}  // namespace

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) {
    throw Error(ErrorCode::EmptyMatrix, "confusion matrix has no units");
  }
  MetricsReport r;
  r.cm = cm;
  r.accuracy = ratio(cm.tp + cm.tn, cm.total());
  r.ppv = ratio(cm.tp, cm.tp + cm.fp);
  r.npv = ratio(cm.tn, cm.tn + cm.fn);
  r.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
  r.specificity = ratio(cm.tn, cm.tn + cm.fp);
  r.f1_positive = f1(r.ppv, r.sensitivity, cm.tp, cm.fp + cm.fn);
  r.f1_negative = f1(r.npv, r.specificity, cm.tn, cm.fp + cm.fn);
  if (r.f1_positive && r.f1_negative) {
    // (a/b + c/d) / 2 = (a*d + c*b) / (2*b*d)
    const auto& p = *r.f1_positive;
    const auto& n = *r.f1_negative;
    r.f1_macro = Fraction{p.num * n.den + n.num * p.den, 2 * p.den * n.den};
  }
  return r;
}

std::string headline(const MetricsReport& r) {
  const auto pct = [](const std::optional<Fraction>& f) {
    return f ? std::to_string(f->percent()) : std::string("-");
  };
  return pct(r.f1_negative) + "; (" + pct(r.sensitivity) + ", " +
         pct(r.specificity) + ", " + pct(r.ppv) + ", " + pct(r.npv) + ", " +
         pct(r.accuracy) + ")";
}

nlohmann::json to_json(const MetricsReport& r) {
  const auto metric = [](const std::optional<Fraction>& f) -> nlohmann::json {
    if (!f) return {{"defined", false}};
    return {{"defined", true},
            {"numerator", f->num},
            {"denominator", f->den},
            {"value", f->value()},
            {"percent", f->percent()}};
  };
  return {
      {"confusion",
       {{"tp", r.cm.tp}, {"tn", r.cm.tn}, {"fp", r.cm.fp}, {"fn", r.cm.fn}}},
      {"accuracy", metric(r.accuracy)},
      {"ppv", metric(r.ppv)},
      {"npv", metric(r.npv)},
      {"sensitivity", metric(r.sensitivity)},
      {"specificity", metric(r.specificity)},
      {"f1_positive", metric(r.f1_positive)},
      {"f1_negative", metric(r.f1_negative)},
      {"f1_macro", metric(r.f1_macro)},
      {"headline", headline(r)},
      {"notes",
       "headline F1 is the non-referable class F1 (f1_negative); "
       "percentages rounded half-up"},
  };
}

RocCurve roc_curve(std::span<const double> scores,
                   std::span<const int> truths) {
  if (scores.size() != truths.size()) {
    throw Error(ErrorCode::ValueError, "scores and truths differ in length");
  }
  RocCurve curve;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) {
      throw Error(ErrorCode::ValueError, "NaN score");
    }
    if (truths[i] == 1) {
      ++curve.positives;
    } else if (truths[i] == 0) {
      ++curve.negatives;
    } else {
      throw Error(ErrorCode::ValueError, "truth labels must be 0 or 1");
    }
  }
  if (curve.positives == 0 || curve.negatives == 0) {
    throw Error(ErrorCode::DegenerateLabels,
                "ROC needs at least one positive and one negative");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  const auto point = [&](double threshold, std::uint64_t tp, std::uint64_t fp) {
    return RocPoint{threshold,
                    static_cast<double>(tp) / static_cast<double>(curve.positives),
                    static_cast<double>(fp) / static_cast<double>(curve.negatives),
                    tp, fp};
  };
  curve.points.push_back(point(std::numeric_limits<double>::infinity(), 0, 0));
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      truths[order[i]] == 1 ? ++tp : ++fp;
    }
    curve.points.push_back(point(threshold, tp, fp));
  }
  curve.auc = auc(curve);
  return curve;
}

double auc(const RocCurve& curve) {
  if (curve.positives == 0 || curve.negatives == 0) {
    throw Error(ErrorCode::DegenerateLabels, "curve without both classes");
  }
  // Twice the area in count units: sum of (dFP) * (TP_prev + TP_cur).
  unsigned __int128 twice_area = 0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    twice_area += static_cast<unsigned __int128>(b.fp - a.fp) * (a.tp + b.tp);
  }
  return static_cast<double>(static_cast<long double>(twice_area) /
                             (2.0L * curve.positives * curve.negatives));
}

std::string roc_to_csv(const RocCurve& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "threshold,fpr,tpr\n";
  for (const auto& p : curve.points) {
    if (std::isinf(p.threshold)) {
      out << "inf";
    } else {
      out << p.threshold;
    }
    out << ',' << p.fpr << ',' << p.tpr << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const RocCurve& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : curve.points) {
    points.push_back({{"threshold", std::isinf(p.threshold)
                                        ? nlohmann::json("inf")
                                        : nlohmann::json(p.threshold)},
                      {"fpr", p.fpr},
                      {"tpr", p.tpr}});
  }
  return {{"auc", curve.auc},
          {"positives", curve.positives},
          {"negatives", curve.negatives},
          {"points", std::move(points)}};
}

}  // namespace raisdr
