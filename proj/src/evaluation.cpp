#include "raisdr/evaluation.hpp"

#include <algorithm>
#include <sstream>

#include "raisdr/error.hpp"

namespace raisdr {

namespace {

std::vector<Experiment> make_experiments() {
  const auto spec = [](ReferralScheme s, EvalUnit u) {
    ScenarioSpec sc;
    sc.scheme = s;
    sc.unit = u;
    sc.projection = Projection::A;
    return sc;
  };
  std::vector<Experiment> out;
  out.push_back({1, spec(ReferralScheme::RDR, EvalUnit::PerPatient), {}, {}});
  out.push_back({2, spec(ReferralScheme::ACR, EvalUnit::PerPatient), {}, {}});
  out.push_back({3, spec(ReferralScheme::RDR, EvalUnit::PerImage), {}, {}});
  out.push_back({4, spec(ReferralScheme::ACR, EvalUnit::PerImage), {}, {}});

  ScenarioSpec both = spec(ReferralScheme::RDR, EvalUnit::PerImage);
  both.projection.reset();
  out.push_back({5, both, GroupSpec::parse("projection", "B", "A"), both});
  out.push_back({6, both, GroupSpec::parse("projection", "A", "AB"), both});

  const ScenarioSpec patient_a = spec(ReferralScheme::RDR, EvalUnit::PerPatient);
  out.push_back({7, patient_a, GroupSpec::parse("sex", "Male", "Female"),
                 patient_a});
  const ScenarioSpec image_a = spec(ReferralScheme::RDR, EvalUnit::PerImage);
  out.push_back({8, image_a, GroupSpec::parse("laterality", "Left", "Right"),
                 image_a});

  ScenarioSpec young = patient_a;
  young.age = AgeFilter{60, AgeFilter::Band::Below};
  out.push_back({9, young, GroupSpec::parse("age", "<60", ">=60"), patient_a});
  return out;
}

std::vector<LabeledPair> members(std::span<const LabeledPair> pairs,
                                 const std::string& attribute,
                                 const GroupValue& group, int age_boundary) {
  std::vector<LabeledPair> out;
  for (const auto& p : pairs) {
    if (group.contains(attribute_value(p, attribute, age_boundary))) {
      out.push_back(p);
    }
  }
  return out;
}

int boundary_of(const ScenarioSpec& s) { return s.age ? s.age->boundary : 60; }

}  // namespace

std::span<const Experiment> experiments() {
  static const std::vector<Experiment> all = make_experiments();
  return all;
}

Experiment resolve_scenario(std::string_view text) {
  constexpr std::string_view prefix = "experiment-";
  if (text.starts_with(prefix)) {
    const auto num = text.substr(prefix.size());
    for (const auto& e : experiments()) {
      if (num == std::to_string(e.number)) return e;
    }
    throw Error(ErrorCode::ValueError,
                "unknown experiment '" + std::string(text) + "' (1-9)");
  }
  Experiment e;
  e.scenario = ScenarioSpec::parse(text);
  return e;
}

std::optional<RocCurve> roc_of(std::span<const LabeledPair> pairs) {
  std::vector<double> scores;
  std::vector<int> truths;
  bool pos = false;
  bool neg = false;
  for (const auto& p : pairs) {
    if (!p.score) return std::nullopt;
    scores.push_back(*p.score);
    const bool referable = p.truth == ReferralCategory::Referable;
    truths.push_back(referable ? 1 : 0);
    (referable ? pos : neg) = true;
  }
  if (!pos || !neg) return std::nullopt;
  return roc_curve(scores, truths);
}

EvaluationReport evaluate(const Cohort& cohort, const PredictionSet& predictions,
                          const Experiment& experiment) {
  EvaluationReport r;
  r.name = experiment.number > 0 ? experiment.name() : "custom";
  r.scenario = experiment.scenario;
  r.pairs = filter_scenario(cohort, predictions, experiment.scenario);
  if (r.pairs.empty()) {
    throw Error(ErrorCode::EmptyInput,
                "scenario " + experiment.scenario.to_string() + " admits no units");
  }
  r.metrics = compute_metrics(build_confusion(r.pairs));
  r.roc = roc_of(r.pairs);

  if (experiment.comparison) {
    const auto& group = *experiment.comparison;
    const ScenarioSpec scope =
        experiment.comparison_scope.value_or(experiment.scenario);
    const auto scoped = scope == experiment.scenario
                            ? r.pairs
                            : filter_scenario(cohort, predictions, scope);
    const int boundary = boundary_of(experiment.scenario);
    for (const GroupValue* g : {&group.unprivileged, &group.privileged}) {
      const auto sub = members(scoped, group.attribute, *g, boundary);
      GroupMetrics gm{g->label, sub.size(), std::nullopt};
      if (!sub.empty()) gm.metrics = compute_metrics(build_confusion(sub));
      r.groups.push_back(std::move(gm));
    }
    r.fairness.push_back(
        fairness_report(scoped, group, scope.unit, DiBounds{}, boundary));
  }
  return r;
}

nlohmann::json to_json(const EvaluationReport& r) {
  nlohmann::json j = {{"name", r.name},
                      {"scenario", r.scenario.to_string()},
                      {"units", r.pairs.size()},
                      {"metrics", to_json(r.metrics)},
                      {"headline", headline(r.metrics)}};
  j["roc"] = r.roc ? to_json(*r.roc) : nlohmann::json(nullptr);
  auto groups = nlohmann::json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"group", g.label},
                      {"units", g.units},
                      {"metrics", g.metrics ? to_json(*g.metrics)
                                            : nlohmann::json(nullptr)}});
  }
  j["groups"] = std::move(groups);
  auto fairness = nlohmann::json::array();
  for (const auto& f : r.fairness) fairness.push_back(to_json(f));
  j["fairness"] = std::move(fairness);
  return j;
}

std::string to_text(const EvaluationReport& r) {
  std::ostringstream out;
  const auto& cm = r.metrics.cm;
  out << r.name << "  " << r.scenario.to_string() << '\n'
      << "  units " << r.pairs.size() << "  TN " << cm.tn << "  FP " << cm.fp
      << "  FN " << cm.fn << "  TP " << cm.tp << '\n'
      << "  F1neg; (Sens, Spec, PPV, NPV, Acc)  " << headline(r.metrics) << '\n';
  if (r.roc) out << "  AUC " << r.roc->auc << '\n';
  for (const auto& g : r.groups) {
    out << "  group " << g.label << "  units " << g.units << "  "
        << (g.metrics ? headline(*g.metrics) : std::string("-")) << '\n';
  }
  if (!r.fairness.empty()) out << fairness_csv(r.fairness);
  return out.str();
}

}  // namespace raisdr
