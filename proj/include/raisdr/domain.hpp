#pragma once

// Core enumerations shared across the screening pipeline and the evaluation
// harness, together with their canonical text encodings.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace raisdr {

/// ICO severity scale as used for the local validation data. R5 marks an
/// enucleated eye and R6 an ungradable photograph; neither has a severity.
enum class Grade : std::uint8_t { R0, R1, R2, R3, R4, R5, R6 };

enum class Projection : std::uint8_t { A, B };  // A: macula, B: optic nerve

enum class Laterality : std::uint8_t { Left, Right };

enum class Sex : std::uint8_t { Male, Female, Unknown };

enum class ReferralScheme : std::uint8_t { RDR, ACR };

enum class ReferralCategory : std::uint8_t {
  NonReferable = 0,
  Referable = 1,
  Excluded,
};

enum class Disposition : std::uint8_t {
  Review12Months,
  Review6Months,
  ReferSpecialist,
  ReferUngradable,
  Retake,
};

/// True for R0..R4.
constexpr bool is_gradable(Grade g) noexcept {
  return static_cast<int>(g) <= static_cast<int>(Grade::R4);
}

/// Severity rank for gradable grades, nullopt for R5/R6.
constexpr std::optional<int> severity(Grade g) noexcept {
  if (!is_gradable(g)) return std::nullopt;
  return static_cast<int>(g);
}

constexpr bool is_terminal(Disposition d) noexcept {
  return d != Disposition::Retake;
}

/// Maps a consensus grade onto the referral classes of a scheme.
/// Throws Error(UnsupportedGrade) for R5; callers filter enucleated eyes.
ReferralCategory referral_category(Grade grade, ReferralScheme scheme);

std::string_view to_string(Grade g);
std::string_view to_string(Projection p);
std::string_view to_string(Laterality l);
std::string_view to_string(Sex s);
std::string_view to_string(ReferralScheme s);
std::string_view to_string(ReferralCategory c);
std::string_view to_string(Disposition d);

// Parsers accept the canonical encodings (and a few obvious long forms) and
// throw Error(ValueError) otherwise.
Grade parse_grade(std::string_view text);
Projection parse_projection(std::string_view text);
Laterality parse_laterality(std::string_view text);
Sex parse_sex(std::string_view text);
ReferralScheme parse_scheme(std::string_view text);
ReferralCategory parse_category(std::string_view text);
Disposition parse_disposition(std::string_view text);

}  // namespace raisdr
