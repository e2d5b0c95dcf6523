#include "raisdr/domain.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "raisdr/error.hpp"

namespace raisdr {
namespace {

std::string lowered(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

[[noreturn]] void bad_value(std::string_view what, std::string_view text) {
  throw Error(ErrorCode::ValueError,
              "cannot parse " + std::string(what) + " from '" +
                  std::string(text) + "'");
}

}  // namespace

ReferralCategory referral_category(Grade grade, ReferralScheme scheme) {
  switch (grade) {
    case Grade::R0:
    case Grade::R1:
    case Grade::R2:
      return ReferralCategory::NonReferable;
    case Grade::R3:
    case Grade::R4:
      return ReferralCategory::Referable;
    case Grade::R6:
      return scheme == ReferralScheme::ACR ? ReferralCategory::Referable
                                           : ReferralCategory::Excluded;
    case Grade::R5:
      break;
  }
  throw Error(ErrorCode::UnsupportedGrade,
              "R5 (enucleation) has no referral category");
}

std::string_view to_string(Grade g) {
  static constexpr std::array<std::string_view, 7> kNames = {
      "R0", "R1", "R2", "R3", "R4", "R5", "R6"};
  return kNames[static_cast<std::size_t>(g)];
}

std::string_view to_string(Projection p) {
  return p == Projection::A ? "A" : "B";
}

std::string_view to_string(Laterality l) {
  return l == Laterality::Left ? "L" : "R";
}

std::string_view to_string(Sex s) {
  switch (s) {
    case Sex::Male: return "M";
    case Sex::Female: return "F";
    case Sex::Unknown: return "U";
  }
  return "U";
}

std::string_view to_string(ReferralScheme s) {
  return s == ReferralScheme::RDR ? "RDR" : "ACR";
}

std::string_view to_string(ReferralCategory c) {
  switch (c) {
    case ReferralCategory::NonReferable: return "0";
    case ReferralCategory::Referable: return "1";
    case ReferralCategory::Excluded: return "excluded";
  }
  return "excluded";
}

std::string_view to_string(Disposition d) {
  switch (d) {
    case Disposition::Review12Months: return "review_12_months";
    case Disposition::Review6Months: return "review_6_months";
    case Disposition::ReferSpecialist: return "refer_specialist";
    case Disposition::ReferUngradable: return "refer_ungradable";
    case Disposition::Retake: return "retake";
  }
  return "retake";
}

Grade parse_grade(std::string_view text) {
  if (text.size() == 2 && (text[0] == 'R' || text[0] == 'r') &&
      text[1] >= '0' && text[1] <= '6') {
    return static_cast<Grade>(text[1] - '0');
  }
  bad_value("grade", text);
}

Projection parse_projection(std::string_view text) {
  const auto t = lowered(text);
  if (t == "a" || t == "macula") return Projection::A;
  if (t == "b" || t == "optic_nerve") return Projection::B;
  bad_value("projection", text);
}

Laterality parse_laterality(std::string_view text) {
  const auto t = lowered(text);
  if (t == "l" || t == "left") return Laterality::Left;
  if (t == "r" || t == "right") return Laterality::Right;
  bad_value("laterality", text);
}

Sex parse_sex(std::string_view text) {
  const auto t = lowered(text);
  if (t == "m" || t == "male") return Sex::Male;
  if (t == "f" || t == "female") return Sex::Female;
  if (t == "u" || t == "unknown" || t.empty()) return Sex::Unknown;
  bad_value("sex", text);
}

ReferralScheme parse_scheme(std::string_view text) {
  const auto t = lowered(text);
  if (t == "rdr" || t == "drd") return ReferralScheme::RDR;
  if (t == "acr") return ReferralScheme::ACR;
  bad_value("referral scheme", text);
}

ReferralCategory parse_category(std::string_view text) {
  const auto t = lowered(text);
  if (t == "0" || t == "nonreferable") return ReferralCategory::NonReferable;
  if (t == "1" || t == "referable") return ReferralCategory::Referable;
  if (t == "excluded") return ReferralCategory::Excluded;
  bad_value("referral category", text);
}

Disposition parse_disposition(std::string_view text) {
  for (auto d : {Disposition::Review12Months, Disposition::Review6Months,
                 Disposition::ReferSpecialist, Disposition::ReferUngradable,
                 Disposition::Retake}) {
    if (lowered(text) == to_string(d)) return d;
  }
  bad_value("disposition", text);
}

}  // namespace raisdr
