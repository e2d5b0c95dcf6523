#include <gtest/gtest.h>

#include <random>

#include "raisdr/error.hpp"
#include "raisdr/workflow.hpp"
#include "support.hpp"

using namespace raisdr;
using testsupport::anatomy;
using testsupport::out;

namespace {

struct Case {
  bool quality;
  bool macula;
  bool nerve;
  int m1;
  int grade_label;  // M2 or M3, whichever runs
  MdDecision md;
};

BackendManifest manifest_for(const std::string& id, const Case& c) {
  BackendManifest m;
  m.insert(id, ModelId::MQ, ClassifierOutput{c.quality ? 1 : 0, c.quality ? 0.9 : 0.2});
  m.insert(id, ModelId::MA, anatomy(c.macula, c.nerve));
  m.insert(id, ModelId::M1, out(c.m1));
  m.insert(id, ModelId::M2, out(c.grade_label));
  m.insert(id, ModelId::M3, out(c.grade_label));
  return m;
}

// Reference mapping written directly from the decision table.
Disposition expected_disposition(const Case& c) {
  if (!(c.quality && c.macula && c.nerve)) {
    return c.md == MdDecision::RetakeImage ? Disposition::Retake
                                           : Disposition::ReferUngradable;
  }
  if (c.m1 == 0) {
    return c.grade_label == 0 ? Disposition::Review12Months : Disposition::Review6Months;
  }
  return Disposition::ReferSpecialist;
}

std::vector<Stage> stages(const ScreeningResult& r) {
  std::vector<Stage> s;
  for (const auto& rec : r.trace) s.push_back(rec.stage);
  return s;
}

ScreeningResult screen(const Case& c, const ScreeningPolicy& policy = {},
                       int prior_retakes = 0) {
  const StubBackend backend(manifest_for("img", c));
  PresetMdProvider md(c.md);
  return run_screening(backend, {"img"}, policy, md, prior_retakes);
}

}  // namespace

TEST(DecisionTable, ExhaustiveEnumeration) {
  int cases = 0;
  for (int bits = 0; bits < 32; ++bits) {
    for (auto md : {MdDecision::RetakeImage, MdDecision::ProceedUngradable}) {
      const Case c{bool(bits & 1), bool(bits & 2), bool(bits & 4), (bits >> 3) & 1,
                   (bits >> 4) & 1, md};
      const auto r = screen(c);
      ++cases;
      ASSERT_EQ(r.disposition, expected_disposition(c)) << "case bits " << bits;
      const auto s = stages(r);
      ASSERT_GE(s.size(), 3u);
      EXPECT_EQ(s[0], Stage::Quality);
      EXPECT_EQ(s[1], Stage::Anatomy);
      EXPECT_EQ(s[2], Stage::MdGate);
      const bool m2 = std::count(s.begin(), s.end(), Stage::LowGrade) > 0;
      const bool m3 = std::count(s.begin(), s.end(), Stage::HighGrade) > 0;
      EXPECT_FALSE(m2 && m3);
      if (r.disposition == Disposition::Retake ||
          r.disposition == Disposition::ReferUngradable) {
        EXPECT_EQ(s.size(), 3u);
        EXPECT_FALSE(r.quality.passed());
      } else {
        ASSERT_EQ(s.size(), 5u);
        EXPECT_EQ(s[3], Stage::Referral);
        EXPECT_EQ(s[4], c.m1 ? Stage::HighGrade : Stage::LowGrade);
      }
      if (r.disposition == Disposition::ReferSpecialist) {
        EXPECT_EQ(r.grades, std::vector{c.grade_label ? Grade::R4 : Grade::R3});
      }
    }
  }
  EXPECT_EQ(cases, 64);
}

TEST(Screening, Review12Months) {
  const auto r = screen({true, true, true, 0, 0, MdDecision::RetakeImage});
  EXPECT_EQ(r.disposition, Disposition::Review12Months);
  EXPECT_EQ(r.grades, (std::vector{Grade::R0, Grade::R1}));
  EXPECT_EQ(r.category(ReferralScheme::RDR), ReferralCategory::NonReferable);
}

TEST(Screening, ReferSpecialistWithR4) {
  const auto r = screen({true, true, true, 1, 1, MdDecision::RetakeImage});
  EXPECT_EQ(r.disposition, Disposition::ReferSpecialist);
  EXPECT_EQ(r.grades, std::vector{Grade::R4});
  EXPECT_EQ(r.trace.back().decision, "refer_specialist:R4");
}

TEST(Screening, RetakeHasNoModelStages) {
  const auto r = screen({false, true, true, 1, 1, MdDecision::RetakeImage});
  EXPECT_EQ(r.disposition, Disposition::Retake);
  for (const auto& rec : r.trace) {
    EXPECT_NE(rec.stage, Stage::Referral);
    EXPECT_NE(rec.stage, Stage::LowGrade);
    EXPECT_NE(rec.stage, Stage::HighGrade);
  }
  EXPECT_FALSE(r.category(ReferralScheme::ACR).has_value());
}

TEST(Screening, ProceedUngradableIsAcrReferable) {
  const auto r = screen({false, true, true, 0, 0, MdDecision::ProceedUngradable});
  EXPECT_EQ(r.disposition, Disposition::ReferUngradable);
  EXPECT_EQ(r.category(ReferralScheme::ACR), ReferralCategory::Referable);
  EXPECT_EQ(r.category(ReferralScheme::RDR), ReferralCategory::Excluded);
}

TEST(Screening, RetakeLimit) {
  ScreeningPolicy policy;
  policy.max_retakes = 2;
  const Case c{false, true, true, 0, 0, MdDecision::RetakeImage};
  EXPECT_EQ(screen(c, policy, 0).disposition, Disposition::Retake);
  EXPECT_EQ(screen(c, policy, 1).disposition, Disposition::Retake);
  const auto r = screen(c, policy, 2);
  EXPECT_EQ(r.disposition, Disposition::ReferUngradable);
  EXPECT_TRUE(r.retake_limit_exceeded);
  EXPECT_EQ(r.trace.back().decision, "retake_limit_exceeded");

  policy.max_retakes = 0;
  EXPECT_EQ(screen(c, policy, 0).disposition, Disposition::ReferUngradable);
}

TEST(Screening, MdProviderSeesGateVerdict) {
  const StubBackend backend(manifest_for("img", {true, false, true, 0, 0, MdDecision::RetakeImage}));
  PresetMdProvider md({MdDecision::RetakeImage, MdDecision::ProceedUngradable});
  EXPECT_EQ(run_screening(backend, {"img"}, {}, md, 0).disposition, Disposition::Retake);
  EXPECT_EQ(run_screening(backend, {"img"}, {}, md, 1).disposition,
            Disposition::ReferUngradable);
  EXPECT_EQ(run_screening(backend, {"img"}, {}, md, 1).disposition,
            Disposition::ReferUngradable);
  ASSERT_EQ(md.requests().size(), 3u);
  EXPECT_EQ(md.requests()[0].verdict.reason(), GateFailure::MissingMacula);
  EXPECT_EQ(md.requests()[1].prior_retakes, 1);
}

TEST(Screening, Deterministic) {
  const Case c{true, true, true, 1, 0, MdDecision::RetakeImage};
  EXPECT_EQ(screen(c), screen(c));
}

TEST(Screening, BackendErrorsCarryStage) {
  BackendManifest m;
  m.insert("img", ModelId::MQ, out(1));
  m.insert("img", ModelId::MA, anatomy(true, true));
  const StubBackend backend(m);
  PresetMdProvider md(MdDecision::RetakeImage);
  try {
    run_screening(backend, {"img"}, {}, md);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingPrediction);
    EXPECT_NE(e.detail().find("M1"), std::string::npos);
  }
}

TEST(QualityGate, Examples) {
  const ScreeningPolicy policy;
  EXPECT_TRUE(quality_gate({1, 0.8}, anatomy(true, true), policy).passed());
  EXPECT_EQ(quality_gate({1, 0.8}, anatomy(false, true), policy).reason(),
            GateFailure::MissingMacula);
  EXPECT_EQ(quality_gate({0, 0.49}, anatomy(true, true), policy).reason(),
            GateFailure::LowQuality);
  EXPECT_TRUE(quality_gate({1, 0.5}, anatomy(true, true), policy).passed());
}

TEST(QualityGate, OptionalAnatomy) {
  ScreeningPolicy policy;
  policy.require_optic_nerve = false;
  EXPECT_TRUE(quality_gate({1, 0.8}, anatomy(true, false), policy).passed());
  policy.require_macula = false;
  EXPECT_TRUE(quality_gate({1, 0.8}, anatomy(false, false), policy).passed());
}

TEST(QualityGate, RaisingThresholdNeverPasses) {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double score = u(rng);
    double a = u(rng);
    double b = u(rng);
    if (a > b) std::swap(a, b);
    ScreeningPolicy low;
    low.quality_threshold = a;
    ScreeningPolicy high;
    high.quality_threshold = b;
    const ClassifierOutput mq{score >= 0.5 ? 1 : 0, score};
    const auto an = anatomy(u(rng) < 0.8, u(rng) < 0.8);
    if (!quality_gate(mq, an, low).passed()) {
      EXPECT_FALSE(quality_gate(mq, an, high).passed());
    }
  }
}

TEST(Policy, Validation) {
  ScreeningPolicy p;
  p.max_retakes = 6;
  EXPECT_THROW(p.validate(), Error);
  p.max_retakes = -1;
  EXPECT_THROW(p.validate(), Error);
  p.max_retakes = 2;
  p.quality_threshold = 1.1;
  EXPECT_THROW(p.validate(), Error);
}

TEST(ScreeningResult, JsonRoundTrip) {
  for (int bits = 0; bits < 32; ++bits) {
    for (auto md : {MdDecision::RetakeImage, MdDecision::ProceedUngradable}) {
      const Case c{bool(bits & 1), bool(bits & 2), bool(bits & 4), (bits >> 3) & 1,
                   (bits >> 4) & 1, md};
      const auto r = screen(c);
      EXPECT_EQ(screening_result_from_json(to_json(r)), r);
    }
  }
}

TEST(ModelRouter, RoutesPerModel) {
  BackendManifest a;
  a.insert("img", ModelId::MQ, out(1));
  a.insert("img", ModelId::MA, anatomy(true, true));
  a.insert("img", ModelId::M1, out(0));
  BackendManifest b;
  b.insert("img", ModelId::M2, out(1));
  auto first = std::make_shared<StubBackend>(a);
  auto second = std::make_shared<StubBackend>(b);
  ModelRouter router;
  for (auto m : {ModelId::MQ, ModelId::MA, ModelId::M1}) router.route(m, first);
  router.route(ModelId::M2, second);
  PresetMdProvider md(MdDecision::RetakeImage);
  EXPECT_EQ(run_screening(router, {"img"}, {}, md).disposition, Disposition::Review6Months);
  EXPECT_THROW(router.classify(ModelId::M3, {"img"}), Error);
}
