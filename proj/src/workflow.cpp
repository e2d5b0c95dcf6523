#include "raisdr/workflow.hpp"

#include "raisdr/error.hpp"

namespace raisdr {

using nlohmann::json;

std::string_view to_string(MdDecision d) {
  return d == MdDecision::RetakeImage ? "retake" : "proceed_ungradable";
}

MdDecision parse_md_decision(std::string_view text) {
  if (text == "retake") return MdDecision::RetakeImage;
  if (text == "proceed_ungradable") return MdDecision::ProceedUngradable;
  throw Error(ErrorCode::ValueError,
              "md decision must be 'retake' or 'proceed_ungradable'");
}

std::string_view to_string(GateFailure f) {
  switch (f) {
    case GateFailure::LowQuality: return "low_quality";
    case GateFailure::MissingMacula: return "missing_macula";
    case GateFailure::MissingOpticNerve: return "missing_optic_nerve";
  }
  return "?";
}

GateFailure parse_gate_failure(std::string_view text) {
  for (auto f : {GateFailure::LowQuality, GateFailure::MissingMacula,
                 GateFailure::MissingOpticNerve}) {
    if (text == to_string(f)) return f;
  }
  throw Error(ErrorCode::ValueError,
              "unknown gate failure '" + std::string(text) + "'");
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Quality: return "MQ";
    case Stage::Anatomy: return "MA";
    case Stage::MdGate: return "MD";
    case Stage::Referral: return "M1";
    case Stage::LowGrade: return "M2";
    case Stage::HighGrade: return "M3";
  }
  return "?";
}

namespace {

Stage parse_stage(std::string_view text) {
  for (auto s : {Stage::Quality, Stage::Anatomy, Stage::MdGate,
                 Stage::Referral, Stage::LowGrade, Stage::HighGrade}) {
    if (text == to_string(s)) return s;
  }
  throw Error(ErrorCode::ParseError,
              "unknown stage '" + std::string(text) + "'");
}

// Runs one backend call, prefixing any failure with the stage name.
template <typename F>
auto at_stage(Stage stage, F&& call) {
  try {
    return call();
  } catch (const Error& e) {
    throw Error(e.code(),
                "stage " + std::string(to_string(stage)) + ": " + e.detail());
  }
}

ClassifierOutput run_classifier(const InferenceBackend& backend, ModelId model,
                                Stage stage, const ImageRef& image,
                                const ScreeningPolicy& policy) {
  return at_stage(stage, [&] {
    auto out = backend.classify(model, image);
    validate_output(out, policy.thresholds.of(model));
    return out;
  });
}

std::string anatomy_decision(const QualityVerdict& v) {
  std::string out;
  for (GateFailure f : v.failures) {
    if (f == GateFailure::LowQuality) continue;
    if (!out.empty()) out += ',';
    out += to_string(f);
  }
  return out.empty() ? "ok" : out;
}

}  // namespace

void ScreeningPolicy::validate() const {
  if (!(quality_threshold >= 0.0 && quality_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidPolicy, "quality_threshold outside [0, 1]");
  }
  if (max_retakes < 0 || max_retakes > kRetakeCeiling) {
    throw Error(ErrorCode::InvalidPolicy, "max_retakes must lie in [0, 5]");
  }
}

QualityVerdict quality_gate(const ClassifierOutput& mq,
                            const AnatomyOutput& anatomy,
                            const ScreeningPolicy& policy) {
  QualityVerdict v;
  if (!(mq.score >= policy.quality_threshold)) {
    v.failures.push_back(GateFailure::LowQuality);
  }
  if (policy.require_macula && !anatomy.macula.present) {
    v.failures.push_back(GateFailure::MissingMacula);
  }
  if (policy.require_optic_nerve && !anatomy.optic_nerve.present) {
    v.failures.push_back(GateFailure::MissingOpticNerve);
  }
  return v;
}

std::optional<ReferralCategory> ScreeningResult::category(
    ReferralScheme scheme) const {
  switch (disposition) {
    case Disposition::Review12Months:
    case Disposition::Review6Months:
      return ReferralCategory::NonReferable;
    case Disposition::ReferSpecialist:
      return ReferralCategory::Referable;
    case Disposition::ReferUngradable:
      return referral_category(Grade::R6, scheme);
    case Disposition::Retake:
      break;
  }
  return std::nullopt;
}

PresetMdProvider::PresetMdProvider(std::vector<MdDecision> sequence)
    : decisions_(std::move(sequence)) {
  if (decisions_.empty()) {
    throw Error(ErrorCode::InvalidPolicy, "empty MD decision sequence");
  }
}

MdDecision PresetMdProvider::decide(const MdRequest& request) {
  requests_.push_back(request);
  const MdDecision d = decisions_[std::min(next_, decisions_.size() - 1)];
  ++next_;
  return d;
}

void ModelRouter::route(ModelId model,
                        std::shared_ptr<const InferenceBackend> backend) {
  routes_[model] = std::move(backend);
}

const InferenceBackend& ModelRouter::backend_for(ModelId model) const {
  const auto it = routes_.find(model);
  if (it == routes_.end() || !it->second) {
    throw Error(ErrorCode::BackendUnavailable,
                "no backend routed for " + std::string(to_string(model)));
  }
  return *it->second;
}

ClassifierOutput ModelRouter::classify(ModelId model,
                                       const ImageRef& image) const {
  return backend_for(model).classify(model, image);
}

AnatomyOutput ModelRouter::detect_anatomy(const ImageRef& image) const {
  return backend_for(ModelId::MA).detect_anatomy(image);
}

QualityAssessment assess_quality(const InferenceBackend& backend,
                                 const ImageRef& image,
                                 const ScreeningPolicy& policy) {
  policy.validate();
  QualityAssessment a;
  a.mq = run_classifier(backend, ModelId::MQ, Stage::Quality, image, policy);
  a.anatomy = at_stage(Stage::Anatomy, [&] {
    auto out = backend.detect_anatomy(image);
    validate_output(out, policy.thresholds.of(ModelId::MA));
    return out;
  });
  a.verdict = quality_gate(a.mq, a.anatomy, policy);
  return a;
}

namespace {

ScreeningResult gate_prefix(const std::string& image_id,
                            const QualityAssessment& a, int prior_retakes) {
  ScreeningResult r;
  r.image_id = image_id;
  r.prior_retakes = prior_retakes;
  r.quality = a.verdict;
  const bool low = !a.verdict.failures.empty() &&
                   a.verdict.failures.front() == GateFailure::LowQuality;
  r.trace.push_back({Stage::Quality, a.mq, low ? "low_quality" : "ok"});
  r.trace.push_back({Stage::Anatomy, a.anatomy, anatomy_decision(a.verdict)});
  return r;
}

}  // namespace

ScreeningResult resolve_md_decision(const std::string& image_id,
                                    const QualityAssessment& assessment,
                                    MdDecision decision,
                                    const ScreeningPolicy& policy,
                                    int prior_retakes) {
  if (assessment.verdict.passed()) {
    throw Error(ErrorCode::InvalidState,
                "MD decision requested for an image that passed the gate");
  }
  ScreeningResult r = gate_prefix(image_id, assessment, prior_retakes);
  if (decision == MdDecision::RetakeImage &&
      prior_retakes + 1 <= policy.max_retakes) {
    r.trace.push_back({Stage::MdGate, decision, "retake"});
    r.disposition = Disposition::Retake;
    return r;
  }
  r.retake_limit_exceeded = decision == MdDecision::RetakeImage;
  r.trace.push_back({Stage::MdGate, decision,
                     r.retake_limit_exceeded ? "retake_limit_exceeded"
                                             : "proceed_ungradable"});
  r.disposition = Disposition::ReferUngradable;
  r.grades = {Grade::R6};
  return r;
}

ScreeningResult grade_image(const InferenceBackend& backend,
                            const ImageRef& image,
                            const QualityAssessment& assessment,
                            const ScreeningPolicy& policy, int prior_retakes) {
  if (!assessment.verdict.passed()) {
    throw Error(ErrorCode::InvalidState,
                "grading requested for an image that failed the gate");
  }
  ScreeningResult r = gate_prefix(image.image_id, assessment, prior_retakes);
  r.trace.push_back({Stage::MdGate, std::monostate{}, "not_required"});
  const auto referral =
      run_classifier(backend, ModelId::M1, Stage::Referral, image, policy);
  if (referral.label == 0) {
    r.trace.push_back({Stage::Referral, referral, "evaluate_m2"});
    const auto low =
        run_classifier(backend, ModelId::M2, Stage::LowGrade, image, policy);
    r.disposition = low.label == 0 ? Disposition::Review12Months
                                   : Disposition::Review6Months;
    r.grades = low.label == 0 ? std::vector{Grade::R0, Grade::R1}
                              : std::vector{Grade::R2};
    r.trace.push_back(
        {Stage::LowGrade, low, std::string(to_string(r.disposition))});
  } else {
    r.trace.push_back({Stage::Referral, referral, "evaluate_m3"});
    const auto high =
        run_classifier(backend, ModelId::M3, Stage::HighGrade, image, policy);
    r.disposition = Disposition::ReferSpecialist;
    r.grades = {high.label == 0 ? Grade::R3 : Grade::R4};
    r.trace.push_back({Stage::HighGrade, high,
                       std::string(to_string(r.disposition)) + ":" +
                           std::string(to_string(r.grades.front()))});
  }
  return r;
}

ScreeningResult run_screening(const InferenceBackend& backend,
                              const ImageRef& image,
                              const ScreeningPolicy& policy,
                              MdProvider& md_provider, int prior_retakes) {
  const auto assessment = assess_quality(backend, image, policy);
  if (assessment.verdict.passed()) {
    return grade_image(backend, image, assessment, policy, prior_retakes);
  }
  const MdDecision decision =
      md_provider.decide({image.image_id, assessment.verdict, prior_retakes});
  return resolve_md_decision(image.image_id, assessment, decision, policy,
                             prior_retakes);
}

json to_json(const ScreeningResult& r) {
  json trace = json::array();
  for (const auto& s : r.trace) {
    json entry = {{"stage", to_string(s.stage)}, {"decision", s.decision}};
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, std::monostate>) {
            entry["output"] = nullptr;
          } else if constexpr (std::is_same_v<T, MdDecision>) {
            entry["output"] = {{"decision", to_string(o)}};
          } else {
            entry["output"] = to_json(o);
          }
        },
        s.output);
    trace.push_back(std::move(entry));
  }
  json failures = json::array();
  for (auto f : r.quality.failures) failures.push_back(to_string(f));
  json grades = json::array();
  for (auto g : r.grades) grades.push_back(to_string(g));
  json j = {{"image_id", r.image_id},
            {"prior_retakes", r.prior_retakes},
            {"trace", std::move(trace)},
            {"quality",
             {{"verdict", r.quality.passed() ? "pass" : "fail"},
              {"failures", std::move(failures)}}},
            {"disposition", to_string(r.disposition)},
            {"grades", std::move(grades)},
            {"retake_limit_exceeded", r.retake_limit_exceeded}};
  for (auto scheme : {ReferralScheme::RDR, ReferralScheme::ACR}) {
    const auto c = r.category(scheme);
    j["category"][std::string(to_string(scheme))] =
        c ? json(std::string(to_string(*c))) : json(nullptr);
  }
  return j;
}

ScreeningResult screening_result_from_json(const json& j) {
  try {
    ScreeningResult r;
    r.image_id = j.at("image_id").get<std::string>();
    r.prior_retakes = j.at("prior_retakes").get<int>();
    for (const auto& f : j.at("quality").at("failures")) {
      r.quality.failures.push_back(parse_gate_failure(f.get<std::string>()));
    }
    r.disposition = parse_disposition(j.at("disposition").get<std::string>());
    for (const auto& g : j.at("grades")) {
      r.grades.push_back(parse_grade(g.get<std::string>()));
    }
    r.retake_limit_exceeded = j.at("retake_limit_exceeded").get<bool>();
    for (const auto& s : j.at("trace")) {
      const Stage stage = parse_stage(s.at("stage").get<std::string>());
      StageRecord rec{stage, MdDecision::RetakeImage,
                      s.at("decision").get<std::string>()};
      const auto& out = s.at("output");
      if (stage == Stage::MdGate && out.is_null()) {
        rec.output = std::monostate{};
      } else if (stage == Stage::MdGate) {
        rec.output = parse_md_decision(out.at("decision").get<std::string>());
      } else if (stage == Stage::Anatomy) {
        // Stored outputs were validated when produced; re-read verbatim.
        rec.output = anatomy_output_from_json(out, 0.0);
      } else {
        rec.output = ClassifierOutput{out.at("label").get<int>(),
                                      out.at("score").get<double>()};
      }
      r.trace.push_back(std::move(rec));
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

}  // namespace raisdr
