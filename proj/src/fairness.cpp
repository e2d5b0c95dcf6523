#include "raisdr/fairness.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "raisdr/csv.hpp"
#include "raisdr/error.hpp"

namespace raisdr {

bool GroupSpec::overlapping() const {
  return std::any_of(unprivileged.members.begin(), unprivileged.members.end(),
                     [&](const std::string& m) { return privileged.contains(m); });
}

namespace {

GroupValue group_value(const std::string& attribute, const std::string& text) {
  if (attribute == "sex") {
    const Sex s = parse_sex(text);
    if (s == Sex::Unknown) {
      throw Error(ErrorCode::ValueError, "sex groups must be Male or Female");
    }
    return {text, {std::string(to_string(s))}};
  }
  if (attribute == "laterality") {
    return {text, {std::string(to_string(parse_laterality(text)))}};
  }
  if (attribute == "projection") {
    std::set<std::string> members;
    for (char c : text) {
      members.insert(
          std::string(to_string(parse_projection(std::string(1, c)))));
    }
    if (members.empty()) {
      throw Error(ErrorCode::ValueError, "empty projection group");
    }
    return {text, members};
  }
  if (attribute == "age") {
    const auto spec = ScenarioSpec::parse("age=" + text);
    if (!spec.age) throw Error(ErrorCode::ValueError, "age group needs a band");
    const int b = spec.age->boundary;
    const int representative = spec.age->band == AgeFilter::Band::Below ? b - 1 : b;
    return {text, {age_band_label(representative, b)}};
  }
  throw Error(ErrorCode::ValueError,
              "unknown fairness attribute '" + attribute +
                  "' (sex, laterality, projection, age)");
}

Rational rate(std::uint64_t num, std::uint64_t den) {
  return Rational(static_cast<std::int64_t>(num),
                  static_cast<std::int64_t>(den));
}

SubgroupCounts count(std::span<const OutcomeRecord> records,
                     const GroupValue& group) {
  SubgroupCounts c;
  for (const auto& rec : records) {
    if (!group.contains(rec.a)) continue;
    ++c.records;
    c.favorable += rec.r == 1;
    if (rec.y == 1) {
      ++c.label_1;
      c.label_1_favorable += rec.r == 1;
    } else {
      ++c.label_0;
      c.label_0_unfavorable += rec.r == 0;
    }
  }
  return c;
}

void require_members(const SubgroupCounts& c, const GroupValue& g) {
  if (c.records == 0) {
    throw Error(ErrorCode::EmptyGroup, "group '" + g.label + "' has no records");
  }
}

std::optional<Rational> di_of(const SubgroupCounts& u, const SubgroupCounts& p) {
  if (p.favorable == 0) return std::nullopt;
  return rate(u.favorable, u.records) / rate(p.favorable, p.records);
}

EqualOpportunity eod_of(const SubgroupCounts& u, const SubgroupCounts& p) {
  EqualOpportunity e;
  if (u.label_0 > 0 && p.label_0 > 0) {
    e.eod_0 = rate(u.label_0_unfavorable, u.label_0) -
              rate(p.label_0_unfavorable, p.label_0);
  }
  if (u.label_1 > 0 && p.label_1 > 0) {
    e.eod_1 = rate(u.label_1_favorable, u.label_1) -
              rate(p.label_1_favorable, p.label_1);
  }
  return e;
}

double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) /
         static_cast<double>(r.denominator());
}

}  // namespace

GroupSpec GroupSpec::parse(const std::string& attribute,
                           const std::string& unprivileged,
                           const std::string& privileged) {
  GroupSpec spec{attribute, group_value(attribute, unprivileged),
                 group_value(attribute, privileged)};
  if (spec.unprivileged.members == spec.privileged.members) {
    throw Error(ErrorCode::ValueError, "groups must differ");
  }
  return spec;
}

std::string attribute_value(const LabeledPair& pair,
                            const std::string& attribute, int age_boundary) {
  if (attribute == "sex") return std::string(to_string(pair.sex));
  if (attribute == "age") return age_band_label(pair.age, age_boundary);
  if (attribute == "projection") {
    return pair.projection ? std::string(to_string(*pair.projection)) : "";
  }
  if (attribute == "laterality") {
    return pair.laterality ? std::string(to_string(*pair.laterality)) : "";
  }
  throw Error(ErrorCode::ValueError,
              "unknown fairness attribute '" + attribute + "'");
}

std::vector<OutcomeRecord> outcome_records(std::span<const LabeledPair> pairs,
                                           const std::string& attribute,
                                           int age_boundary) {
  std::vector<OutcomeRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({p.prediction == ReferralCategory::Referable ? 1 : 0,
                   p.truth == ReferralCategory::Referable ? 1 : 0,
                   attribute_value(p, attribute, age_boundary)});
  }
  return out;
}

std::optional<Rational> disparate_impact(std::span<const OutcomeRecord> records,
                                         const GroupSpec& group) {
  const auto u = count(records, group.unprivileged);
  const auto p = count(records, group.privileged);
  require_members(u, group.unprivileged);
  require_members(p, group.privileged);
  return di_of(u, p);
}

EqualOpportunity equal_opportunity_difference(
    std::span<const OutcomeRecord> records, const GroupSpec& group) {
  const auto u = count(records, group.unprivileged);
  const auto p = count(records, group.privileged);
  require_members(u, group.unprivileged);
  require_members(p, group.privileged);
  return eod_of(u, p);
}

std::string_view to_string(FlagStatus f) {
  switch (f) {
    case FlagStatus::Pass: return "pass";
    case FlagStatus::Fail: return "fail";
    case FlagStatus::Undefined: return "undefined";
  }
  return "undefined";
}

FairnessReport fairness_report(std::span<const LabeledPair> pairs,
                               const GroupSpec& group, EvalUnit unit,
                               const DiBounds& bounds, int age_boundary) {
  const auto records = outcome_records(pairs, group.attribute, age_boundary);
  FairnessReport r;
  r.group = group;
  r.unit = unit;
  r.unprivileged_counts = count(records, group.unprivileged);
  r.privileged_counts = count(records, group.privileged);
  require_members(r.unprivileged_counts, group.unprivileged);
  require_members(r.privileged_counts, group.privileged);
  r.di = di_of(r.unprivileged_counts, r.privileged_counts);
  const auto eod = eod_of(r.unprivileged_counts, r.privileged_counts);
  r.eod_0 = eod.eod_0;
  r.eod_1 = eod.eod_1;
  if (r.di) {
    r.four_fifths = (*r.di >= bounds.lower && *r.di <= bounds.upper)
                        ? FlagStatus::Pass
                        : FlagStatus::Fail;
  }
  r.overlapping_groups = group.overlapping();
  return r;
}

namespace {

std::string feature_name(const std::string& attribute) {
  std::string out = attribute;
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(out[0]));
  return out;
}

std::string fmt(const std::optional<Rational>& v) {
  if (!v) return "undefined";
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << to_double(*v);
  return out.str();
}

nlohmann::json rational_json(const std::optional<Rational>& v) {
  if (!v) return nullptr;
  return {{"numerator", v->numerator()},
          {"denominator", v->denominator()},
          {"value", to_double(*v)}};
}

nlohmann::json counts_json(const SubgroupCounts& c) {
  return {{"records", c.records},
          {"favorable", c.favorable},
          {"label_1", c.label_1},
          {"label_1_favorable", c.label_1_favorable},
          {"label_0", c.label_0},
          {"label_0_unfavorable", c.label_0_unfavorable}};
}

std::string unit_label(EvalUnit u) {
  return u == EvalUnit::PerImage ? "Per Image" : "Per Patient";
}

}  // namespace

std::string fairness_csv(std::span<const FairnessReport> reports) {
  std::ostringstream out;
  out << "Feature,Type,unprivileged,privileged,DI,EOD_0,EOD_1,four_fifths,"
         "overlap,n_unprivileged,n_privileged\n";
  for (const auto& r : reports) {
    out << csv_field(feature_name(r.group.attribute)) << ','
        << unit_label(r.unit) << ',' << csv_field(r.group.unprivileged.label)
        << ',' << csv_field(r.group.privileged.label) << ',' << fmt(r.di)
        << ',' << fmt(r.eod_0) << ',' << fmt(r.eod_1) << ','
        << to_string(r.four_fifths) << ','
        << (r.overlapping_groups ? "yes" : "no") << ','
        << r.unprivileged_counts.records << ',' << r.privileged_counts.records
        << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const FairnessReport& r) {
  return {{"feature", feature_name(r.group.attribute)},
          {"type", unit_label(r.unit)},
          {"unprivileged", r.group.unprivileged.label},
          {"privileged", r.group.privileged.label},
          {"di", rational_json(r.di)},
          {"eod_0", rational_json(r.eod_0)},
          {"eod_1", rational_json(r.eod_1)},
          {"four_fifths", to_string(r.four_fifths)},
          {"overlapping_groups", r.overlapping_groups},
          {"unprivileged_counts", counts_json(r.unprivileged_counts)},
          {"privileged_counts", counts_json(r.privileged_counts)}};
}

}  // namespace raisdr
