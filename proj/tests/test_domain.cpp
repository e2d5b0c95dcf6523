#include <gtest/gtest.h>

#include "raisdr/domain.hpp"
#include "raisdr/error.hpp"

using namespace raisdr;

namespace {

constexpr Grade kAllGrades[] = {Grade::R0, Grade::R1, Grade::R2, Grade::R3,
                                Grade::R4, Grade::R5, Grade::R6};

}  // namespace

TEST(ReferralCategory, PublishedMappings) {
  EXPECT_EQ(referral_category(Grade::R3, ReferralScheme::RDR), ReferralCategory::Referable);
  EXPECT_EQ(referral_category(Grade::R6, ReferralScheme::ACR), ReferralCategory::Referable);
  EXPECT_EQ(referral_category(Grade::R6, ReferralScheme::RDR), ReferralCategory::Excluded);
  EXPECT_EQ(referral_category(Grade::R0, ReferralScheme::RDR), ReferralCategory::NonReferable);
}

TEST(ReferralCategory, FullTable) {
  for (auto scheme : {ReferralScheme::RDR, ReferralScheme::ACR}) {
    for (auto g : {Grade::R0, Grade::R1, Grade::R2}) {
      EXPECT_EQ(referral_category(g, scheme), ReferralCategory::NonReferable);
    }
    for (auto g : {Grade::R3, Grade::R4}) {
      EXPECT_EQ(referral_category(g, scheme), ReferralCategory::Referable);
    }
  }
}

TEST(ReferralCategory, SchemesAgreeOnGradable) {
  for (Grade g : kAllGrades) {
    if (!is_gradable(g)) continue;
    EXPECT_EQ(referral_category(g, ReferralScheme::RDR),
              referral_category(g, ReferralScheme::ACR));
  }
}

TEST(ReferralCategory, EnucleationIsRejected) {
  for (auto scheme : {ReferralScheme::RDR, ReferralScheme::ACR}) {
    try {
      referral_category(Grade::R5, scheme);
      FAIL() << "expected UnsupportedGrade";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::UnsupportedGrade);
    }
  }
}

TEST(Grade, SeverityOrder) {
  for (int i = 0; i < 4; ++i) {
    EXPECT_LT(*severity(kAllGrades[i]), *severity(kAllGrades[i + 1]));
  }
  EXPECT_FALSE(severity(Grade::R5));
  EXPECT_FALSE(severity(Grade::R6));
}

TEST(Disposition, OnlyRetakeIsNonTerminal) {
  EXPECT_FALSE(is_terminal(Disposition::Retake));
  for (auto d : {Disposition::Review12Months, Disposition::Review6Months,
                 Disposition::ReferSpecialist, Disposition::ReferUngradable}) {
    EXPECT_TRUE(is_terminal(d));
  }
}

TEST(Encoding, RoundTrips) {
  for (Grade g : kAllGrades) EXPECT_EQ(parse_grade(to_string(g)), g);
  for (auto p : {Projection::A, Projection::B}) EXPECT_EQ(parse_projection(to_string(p)), p);
  for (auto l : {Laterality::Left, Laterality::Right}) {
    EXPECT_EQ(parse_laterality(to_string(l)), l);
  }
  for (auto s : {Sex::Male, Sex::Female, Sex::Unknown}) EXPECT_EQ(parse_sex(to_string(s)), s);
  for (auto d : {Disposition::Review12Months, Disposition::Review6Months,
                 Disposition::ReferSpecialist, Disposition::ReferUngradable,
                 Disposition::Retake}) {
    EXPECT_EQ(parse_disposition(to_string(d)), d);
  }
  for (auto c : {ReferralCategory::NonReferable, ReferralCategory::Referable,
                 ReferralCategory::Excluded}) {
    EXPECT_EQ(parse_category(to_string(c)), c);
  }
}

TEST(Encoding, CanonicalText) {
  EXPECT_EQ(to_string(Grade::R4), "R4");
  EXPECT_EQ(to_string(Laterality::Left), "L");
  EXPECT_EQ(to_string(Sex::Female), "F");
  EXPECT_EQ(to_string(Projection::B), "B");
}

TEST(Encoding, RejectsUnknown) {
  EXPECT_THROW(parse_grade("R7"), Error);
  EXPECT_THROW(parse_projection("C"), Error);
  EXPECT_THROW(parse_sex("X"), Error);
}
