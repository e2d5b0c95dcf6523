#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "raisdr/error.hpp"
#include "raisdr/fixtures.hpp"
#include "raisdr/metrics.hpp"
#include "support.hpp"

using namespace raisdr;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

ConfusionMatrix cm_of(std::uint64_t tn, std::uint64_t fp, std::uint64_t fn, std::uint64_t tp) {
  ConfusionMatrix cm;
  cm.tn = tn;
  cm.fp = fp;
  cm.fn = fn;
  cm.tp = tp;
  return cm;
}

ConfusionMatrix random_cm(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> small(0, 6), big(0, 2000), which(0, 1);
  auto draw = [&] { return static_cast<std::uint64_t>(which(rng) ? small(rng) : big(rng)); };
  ConfusionMatrix cm;
  do {
    cm = cm_of(draw(), draw(), draw(), draw());
  } while (cm.total() == 0);
  return cm;
}

Rational r(const Fraction& f) { return f.exact(); }

}  // namespace

TEST(Metrics, PerPatientProposedRdr) {
  const auto m = compute_metrics(cm_of(715, 28, 5, 49));
  EXPECT_EQ(headline(m), "98; (91, 96, 64, 99, 96)");
  EXPECT_EQ(m.ppv->exact(), Rational(49, 77));
  EXPECT_EQ(m.f1_negative->exact(), Rational(2 * 715, 2 * 715 + 33));
}

TEST(Metrics, PerImageEyeartRdr) {
  EXPECT_EQ(headline(compute_metrics(cm_of(1186, 422, 2, 98))), "85; (98, 74, 19, 100, 75)");
}

TEST(Metrics, PerfectClassifier) {
  const auto m = compute_metrics(cm_of(10, 0, 0, 10));
  for (const auto& f : {m.accuracy, m.ppv, m.npv, m.sensitivity, m.specificity, m.f1_positive,
                        m.f1_negative, m.f1_macro}) {
    ASSERT_TRUE(f);
    EXPECT_EQ(r(*f), Rational(1));
  }
}

TEST(Metrics, ZeroDenominators) {
  const auto m = compute_metrics(cm_of(5, 0, 5, 0));
  EXPECT_FALSE(m.ppv);
  EXPECT_FALSE(m.f1_positive);
  EXPECT_FALSE(m.f1_macro);
  EXPECT_TRUE(m.accuracy && m.npv && m.sensitivity && m.specificity && m.f1_negative);
  EXPECT_EQ(r(*m.sensitivity), Rational(0));
  EXPECT_EQ(headline(m).find("-") != std::string::npos, true);
  EXPECT_EQ(code_of([] { compute_metrics(ConfusionMatrix{}); }), ErrorCode::EmptyMatrix);
}

TEST(Metrics, HalfUpRounding) {
  EXPECT_EQ((Fraction{1, 200}).percent(), 1u);   // 0.5% rounds up
  EXPECT_EQ((Fraction{1, 201}).percent(), 0u);
  EXPECT_EQ((Fraction{199, 200}).percent(), 100u);
  EXPECT_EQ((Fraction{7, 8}).percent(), 88u);    // 87.5
}

TEST(Metrics, JsonCarriesFractions) {
  const auto j = to_json(compute_metrics(cm_of(715, 28, 5, 49)));
  EXPECT_EQ(j["ppv"]["numerator"], 49);
  EXPECT_EQ(j["ppv"]["denominator"], 77);
  EXPECT_EQ(j["ppv"]["percent"], 64);
  EXPECT_TRUE(j["f1_negative"].is_object());
}

// The six reported figures of every published row, against the rounded
// values recomputed here from the cells in plain rational arithmetic.
TEST(Published, RowsReproduce) {
  const std::vector<std::pair<std::string, std::string>> expected = {
      {"per-patient/proposed/RDR", "98; (91, 96, 64, 99, 96)"},
      {"per-patient/eyeart/RDR", "86; (98, 76, 23, 100, 77)"},
      {"per-patient/proposed/ACR", "90; (89, 86, 72, 95, 87)"},
      {"per-patient/eyeart/ACR", "85; (93, 76, 61, 96, 81)"},
      {"per-image/proposed/RDR", "98; (89, 96, 61, 99, 96)"},
      {"per-image/eyeart/RDR", "85; (98, 74, 19, 100, 75)"},
      {"per-image/proposed/ACR", "92; (87, 89, 69, 96, 88)"},
      {"per-image/eyeart/ACR", "84; (93, 74, 51, 97, 78)"},
  };
  const auto rows = reproduce(published_rows());
  ASSERT_EQ(rows.size(), expected.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].row.label(), expected[i].first);
    EXPECT_EQ(headline(rows[i].metrics), expected[i].second);
    EXPECT_TRUE(rows[i].mismatches.empty());
    const auto& c = rows[i].row.cm;
    const auto pct = [](Rational q) {
      // half-up on an exact rational
      const Rational scaled = q * 100 + Rational(1, 2);
      return static_cast<std::uint64_t>(scaled.numerator() / scaled.denominator());
    };
    const Rational sens(c.tp, c.tp + c.fn), spec(c.tn, c.tn + c.fp);
    const Rational ppv(c.tp, c.tp + c.fp), npv(c.tn, c.tn + c.fn);
    const Rational acc(c.tp + c.tn, c.total());
    const Rational f1n = 2 * npv * spec / (npv + spec);
    const std::array<std::uint64_t, 6> mine{pct(f1n), pct(sens), pct(spec),
                                            pct(ppv), pct(npv),  pct(acc)};
    EXPECT_EQ(mine, rows[i].row.expected) << expected[i].first;
  }
}

TEST(Published, PerturbedCellIsReported) {
  std::vector<PublishedRow> rows(published_rows().begin(), published_rows().end());
  rows[0].cm.tp = 40;
  const auto out = reproduce(rows);
  EXPECT_FALSE(out[0].mismatches.empty());
  EXPECT_TRUE(out[1].mismatches.empty());
}

TEST(Published, MatrixSpec) {
  EXPECT_EQ(parse_matrix_spec("TN=715,TP=49,FN=5,FP=28"), cm_of(715, 28, 5, 49));
  EXPECT_EQ(code_of([] { parse_matrix_spec("TP=1,FP=2"); }), ErrorCode::ValueError);
  EXPECT_EQ(code_of([] { parse_matrix_spec("TP=x,FP=2,FN=1,TN=1"); }), ErrorCode::ValueError);
}

TEST(MetricsProperty, RandomMatrices) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1500; ++i) {
    const auto cm = random_cm(rng);
    const auto m = compute_metrics(cm);
    // Undefined exactly on zero denominators.
    EXPECT_EQ(m.ppv.has_value(), cm.tp + cm.fp > 0);
    EXPECT_EQ(m.npv.has_value(), cm.tn + cm.fn > 0);
    EXPECT_EQ(m.sensitivity.has_value(), cm.tp + cm.fn > 0);
    EXPECT_EQ(m.specificity.has_value(), cm.tn + cm.fp > 0);
    ASSERT_TRUE(m.accuracy);
    EXPECT_EQ(r(*m.accuracy) * static_cast<std::int64_t>(cm.total()),
              Rational(static_cast<std::int64_t>(cm.tp + cm.tn)));
    for (const auto& f : {m.accuracy, m.ppv, m.npv, m.sensitivity, m.specificity,
                          m.f1_positive, m.f1_negative, m.f1_macro}) {
      if (f) {
        EXPECT_GE(r(*f), Rational(0));
        EXPECT_LE(r(*f), Rational(1));
      }
    }
    if (m.ppv && m.sensitivity && m.ppv->num > 0 && m.sensitivity->num > 0) {
      ASSERT_TRUE(m.f1_positive);
      const auto p = r(*m.ppv), s = r(*m.sensitivity), f = r(*m.f1_positive);
      EXPECT_LE(std::min(p, s), f);
      EXPECT_LE(f, std::max(p, s));
      EXPECT_EQ(f, 2 * p * s / (p + s));
    }
    const auto sw = compute_metrics(cm.swapped());
    EXPECT_EQ(sw.ppv, m.npv);
    EXPECT_EQ(sw.npv, m.ppv);
    EXPECT_EQ(sw.sensitivity, m.specificity);
    EXPECT_EQ(sw.specificity, m.sensitivity);
    EXPECT_EQ(sw.f1_positive, m.f1_negative);
    EXPECT_EQ(sw.f1_negative, m.f1_positive);
    EXPECT_EQ(sw.accuracy, m.accuracy);
  }
}

TEST(Roc, Examples) {
  {
    const std::vector<double> s{0.9, 0.8};
    const std::vector<int> t{1, 0};
    const auto c = roc_curve(s, t);
    EXPECT_DOUBLE_EQ(c.auc, 1.0);
    EXPECT_TRUE(std::any_of(c.points.begin(), c.points.end(),
                            [](const RocPoint& p) { return p.fpr == 0 && p.tpr == 1; }));
  }
  {
    const std::vector<double> s{0.9, 0.8};
    const std::vector<int> t{0, 1};
    EXPECT_DOUBLE_EQ(roc_curve(s, t).auc, 0.0);
  }
  {
    const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    const std::vector<int> t{0, 0, 1, 1};
    EXPECT_DOUBLE_EQ(roc_curve(s, t).auc, 0.75);
    EXPECT_DOUBLE_EQ(testsupport::mann_whitney(s, t), 0.75);
  }
}

TEST(Roc, TiesShareAPoint) {
  const std::vector<double> s{0.5, 0.5, 0.5, 0.2};
  const std::vector<int> t{1, 0, 1, 0};
  const auto c = roc_curve(s, t);
  ASSERT_EQ(c.points.size(), 3u);
  EXPECT_DOUBLE_EQ(c.points[1].tpr, 1.0);
  EXPECT_DOUBLE_EQ(c.points[1].fpr, 0.5);
  EXPECT_DOUBLE_EQ(c.auc, testsupport::mann_whitney(s, t));
}

TEST(Roc, Errors) {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<int> same{1, 1};
  EXPECT_EQ(code_of([&] { roc_curve(s, same); }), ErrorCode::DegenerateLabels);
  const std::vector<int> shorter{1};
  EXPECT_EQ(code_of([&] { roc_curve(s, shorter); }), ErrorCode::ValueError);
  const std::vector<int> bad{1, 2};
  EXPECT_EQ(code_of([&] { roc_curve(s, bad); }), ErrorCode::ValueError);
  const std::vector<double> nan{0.1, std::nan("")};
  const std::vector<int> ok{1, 0};
  EXPECT_EQ(code_of([&] { roc_curve(nan, ok); }), ErrorCode::ValueError);
}

TEST(RocProperty, RandomInstances) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(2, 200), levels(1, 20);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = len(rng);
    const int k = levels(rng);  // few levels force ties
    std::uniform_int_distribution<int> lvl(0, k);
    std::vector<double> s(n);
    std::vector<int> t(n);
    for (int i = 0; i < n; ++i) {
      s[i] = static_cast<double>(lvl(rng)) / k;
      t[i] = static_cast<int>(rng() % 2);
    }
    t[0] = 1;
    t[1] = 0;
    const auto c = roc_curve(s, t);
    EXPECT_NEAR(c.auc, testsupport::mann_whitney(s, t), 1e-12);
    ASSERT_GE(c.points.size(), 2u);
    EXPECT_EQ(c.points.front().fpr, 0.0);
    EXPECT_EQ(c.points.front().tpr, 0.0);
    EXPECT_EQ(c.points.back().fpr, 1.0);
    EXPECT_EQ(c.points.back().tpr, 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      EXPECT_GT(c.points[i - 1].threshold, c.points[i].threshold);
      EXPECT_LE(c.points[i - 1].fpr, c.points[i].fpr);
      EXPECT_LE(c.points[i - 1].tpr, c.points[i].tpr);
    }
    // Strictly increasing transform leaves the curve unchanged.
    std::vector<double> warped(n);
    std::transform(s.begin(), s.end(), warped.begin(),
                   [](double v) { return std::exp(3 * v) - 7; });
    const auto w = roc_curve(warped, t);
    ASSERT_EQ(w.points.size(), c.points.size());
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      EXPECT_EQ(w.points[i].fpr, c.points[i].fpr);
      EXPECT_EQ(w.points[i].tpr, c.points[i].tpr);
    }
    EXPECT_EQ(w.auc, c.auc);
  }
}

TEST(Roc, CsvExport) {
  const std::vector<double> s{0.9, 0.8};
  const std::vector<int> t{1, 0};
  const auto csv = roc_to_csv(roc_curve(s, t));
  EXPECT_EQ(csv.substr(0, 17), "threshold,fpr,tpr");
  EXPECT_NE(csv.find("inf,0,0"), std::string::npos);
}
