#pragma once

// Group fairness over (outcome R, truth Y, group A) records: disparate
// impact and the two equal-opportunity differences, in exact arithmetic.

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "raisdr/aggregation.hpp"
#include "raisdr/metrics.hpp"

namespace raisdr {

struct OutcomeRecord {
  int r = 0;  // model outcome
  int y = 0;  // true label
  std::string a;
  friend bool operator==(const OutcomeRecord&, const OutcomeRecord&) = default;
};

/// A group is a named set of attribute values, so pooled reference groups
/// (projection "AB" = {A, B}) can be expressed.
struct GroupValue {
  std::string label;
  std::set<std::string> members;

  bool contains(const std::string& a) const { return members.contains(a); }
  friend bool operator==(const GroupValue&, const GroupValue&) = default;
};

struct GroupSpec {
  std::string attribute;
  GroupValue unprivileged;  // monitored group
  GroupValue privileged;    // reference group

  /// True when some attribute value belongs to both groups.
  bool overlapping() const;
  GroupSpec swapped() const { return {attribute, privileged, unprivileged}; }

  /// Builds a spec for one of the pair attributes: sex (Male/Female),
  /// laterality (Left/Right), projection (A, B, or pooled AB) and age
  /// (<N / >=N). Throws Error(ValueError).
  static GroupSpec parse(const std::string& attribute,
                         const std::string& unprivileged,
                         const std::string& privileged);

  friend bool operator==(const GroupSpec&, const GroupSpec&) = default;
};

/// Value of a fairness attribute on a pair; empty when the unit has none
/// (e.g. projection of a patient spanning both projections).
std::string attribute_value(const LabeledPair& pair,
                            const std::string& attribute, int age_boundary = 60);

/// R = predicted Referable, Y = truly Referable, A = attribute value.
std::vector<OutcomeRecord> outcome_records(std::span<const LabeledPair> pairs,
                                           const std::string& attribute,
                                           int age_boundary = 60);

/// P(R=1 | unprivileged) / P(R=1 | privileged); nullopt when the privileged
/// rate is zero. Throws Error(EmptyGroup) if either group has no records.
std::optional<Rational> disparate_impact(std::span<const OutcomeRecord> records,
                                         const GroupSpec& group);

struct EqualOpportunity {
  std::optional<Rational> eod_0;  // over Y=0 records, rates of R=0
  std::optional<Rational> eod_1;  // over Y=1 records, rates of R=1
  friend bool operator==(const EqualOpportunity&,
                         const EqualOpportunity&) = default;
};

/// Unprivileged minus privileged conditional rates; a component is nullopt
/// when either group lacks records with that label. Throws EmptyGroup.
EqualOpportunity equal_opportunity_difference(
    std::span<const OutcomeRecord> records, const GroupSpec& group);

struct DiBounds {
  Rational lower{4, 5};
  Rational upper{5, 4};
};

enum class FlagStatus : std::uint8_t { Pass, Fail, Undefined };
std::string_view to_string(FlagStatus f);

struct SubgroupCounts {
  std::uint64_t records = 0;
  std::uint64_t favorable = 0;  // R=1
  std::uint64_t label_1 = 0;    // Y=1
  std::uint64_t label_1_favorable = 0;
  std::uint64_t label_0 = 0;    // Y=0
  std::uint64_t label_0_unfavorable = 0;
  friend bool operator==(const SubgroupCounts&, const SubgroupCounts&) = default;
};

struct FairnessReport {
  GroupSpec group;
  EvalUnit unit = EvalUnit::PerImage;
  std::optional<Rational> di;
  std::optional<Rational> eod_0;
  std::optional<Rational> eod_1;
  FlagStatus four_fifths = FlagStatus::Undefined;
  bool overlapping_groups = false;
  SubgroupCounts unprivileged_counts;
  SubgroupCounts privileged_counts;
};

FairnessReport fairness_report(std::span<const LabeledPair> pairs,
                               const GroupSpec& group, EvalUnit unit,
                               const DiBounds& bounds = {},
                               int age_boundary = 60);

/// Columns: Feature,Type,unprivileged,privileged,DI,EOD_0,EOD_1 followed by
/// four_fifths,overlap and the subgroup sizes.
std::string fairness_csv(std::span<const FairnessReport> reports);
nlohmann::json to_json(const FairnessReport& report);

}  // namespace raisdr
