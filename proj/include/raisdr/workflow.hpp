#pragma once

// Per-image decision flow: quality + anatomy gate, the on-site medical
// decision (MD) when the gate fails, then referral (M1) and grading (M2/M3).

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "raisdr/domain.hpp"
#include "raisdr/inference.hpp"

namespace raisdr {

enum class MdDecision : std::uint8_t { RetakeImage, ProceedUngradable };

enum class GateFailure : std::uint8_t {
  LowQuality,
  MissingMacula,
  MissingOpticNerve,
};

std::string_view to_string(MdDecision d);  // "retake" / "proceed_ungradable"
MdDecision parse_md_decision(std::string_view text);
std::string_view to_string(GateFailure f);
GateFailure parse_gate_failure(std::string_view text);

struct ScreeningPolicy {
  static constexpr int kRetakeCeiling = 5;

  double quality_threshold = 0.5;
  bool require_macula = true;
  bool require_optic_nerve = true;
  int max_retakes = 2;
  ModelThresholds thresholds;

  /// Throws Error(InvalidPolicy).
  void validate() const;

  friend bool operator==(const ScreeningPolicy&,
                         const ScreeningPolicy&) = default;
};

/// Empty `failures` means the image passed.
struct QualityVerdict {
  std::vector<GateFailure> failures;

  bool passed() const noexcept { return failures.empty(); }
  std::optional<GateFailure> reason() const {
    if (failures.empty()) return std::nullopt;
    return failures.front();
  }
  friend bool operator==(const QualityVerdict&,
                         const QualityVerdict&) = default;
};

QualityVerdict quality_gate(const ClassifierOutput& mq,
                            const AnatomyOutput& anatomy,
                            const ScreeningPolicy& policy);

enum class Stage : std::uint8_t {
  Quality,
  Anatomy,
  MdGate,
  Referral,
  LowGrade,
  HighGrade,
};

std::string_view to_string(Stage s);

struct StageRecord {
  Stage stage;
  /// monostate marks an MD gate that was not needed.
  std::variant<ClassifierOutput, AnatomyOutput, MdDecision, std::monostate>
      output;
  std::string decision;
  friend bool operator==(const StageRecord&, const StageRecord&) = default;
};

struct ScreeningResult {
  std::string image_id;
  /// Number of retakes of this image that preceded this capture.
  int prior_retakes = 0;
  std::vector<StageRecord> trace;
  QualityVerdict quality;
  Disposition disposition = Disposition::Retake;
  /// The grade (set) the models support: {R0,R1}, {R2}, {R3}, {R4}, or {R6}
  /// when referred as ungradable. Empty for Retake.
  std::vector<Grade> grades;
  bool retake_limit_exceeded = false;

  /// Category implied by the disposition; nullopt while a retake is pending.
  std::optional<ReferralCategory> category(ReferralScheme scheme) const;

  friend bool operator==(const ScreeningResult&,
                         const ScreeningResult&) = default;
};

nlohmann::json to_json(const ScreeningResult& r);
ScreeningResult screening_result_from_json(const nlohmann::json& j);

struct MdRequest {
  std::string image_id;
  QualityVerdict verdict;
  int prior_retakes = 0;
};

/// Source of the on-site medical decision (a console prompt or a preset).
class MdProvider {
 public:
  virtual ~MdProvider() = default;
  virtual MdDecision decide(const MdRequest& request) = 0;
};

/// Replays a fixed decision sequence; the last entry repeats once exhausted.
class PresetMdProvider final : public MdProvider {
 public:
  explicit PresetMdProvider(MdDecision always) : decisions_{always} {}
  explicit PresetMdProvider(std::vector<MdDecision> sequence);

  MdDecision decide(const MdRequest& request) override;
  const std::vector<MdRequest>& requests() const noexcept { return requests_; }

 private:
  std::vector<MdDecision> decisions_;
  std::size_t next_ = 0;
  std::vector<MdRequest> requests_;
};

/// Routes each model to its own backend, for deployments that serve the
/// models from different places.
class ModelRouter final : public InferenceBackend {
 public:
  void route(ModelId model, std::shared_ptr<const InferenceBackend> backend);

  ClassifierOutput classify(ModelId model,
                            const ImageRef& image) const override;
  AnatomyOutput detect_anatomy(const ImageRef& image) const override;

 private:
  const InferenceBackend& backend_for(ModelId model) const;
  std::map<ModelId, std::shared_ptr<const InferenceBackend>> routes_;
};

/// Output of the first half of a screening: MQ and MA plus the gate verdict.
struct QualityAssessment {
  ClassifierOutput mq;
  AnatomyOutput anatomy;
  QualityVerdict verdict;
  friend bool operator==(const QualityAssessment&,
                         const QualityAssessment&) = default;
};

// The three pieces below compose into run_screening. They are exposed so a
// service can pause between the gate and the human decision.

QualityAssessment assess_quality(const InferenceBackend& backend,
                                 const ImageRef& image,
                                 const ScreeningPolicy& policy);

/// Completes a screening whose gate failed. Retakes beyond
/// policy.max_retakes resolve to ReferUngradable.
ScreeningResult resolve_md_decision(const std::string& image_id,
                                    const QualityAssessment& assessment,
                                    MdDecision decision,
                                    const ScreeningPolicy& policy,
                                    int prior_retakes);

/// Completes a screening whose gate passed: M1 then M2 or M3.
ScreeningResult grade_image(const InferenceBackend& backend,
                            const ImageRef& image,
                            const QualityAssessment& assessment,
                            const ScreeningPolicy& policy, int prior_retakes);

ScreeningResult run_screening(const InferenceBackend& backend,
                              const ImageRef& image,
                              const ScreeningPolicy& policy,
                              MdProvider& md_provider, int prior_retakes = 0);

}  // namespace raisdr
