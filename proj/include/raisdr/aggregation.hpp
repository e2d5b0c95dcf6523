#pragma once

// Turns labeled images plus model predictions into evaluation units (images
// or patients) under a referral scheme, and counts them into a confusion
// matrix.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raisdr/cohort.hpp"
#include "raisdr/confusion.hpp"
#include "raisdr/domain.hpp"
#include "raisdr/workflow.hpp"

namespace raisdr {

enum class EvalUnit : std::uint8_t { PerImage, PerPatient };

std::string_view to_string(EvalUnit u);  // "image" / "patient"

struct AgeFilter {
  enum class Band : std::uint8_t { Below, AtOrAbove };
  int boundary = 60;
  Band band = Band::Below;

  bool admits(int age) const noexcept {
    return band == Band::Below ? age < boundary : age >= boundary;
  }
  friend bool operator==(const AgeFilter&, const AgeFilter&) = default;
};

/// "<60" / ">=60" style label of the band an age falls in.
std::string age_band_label(int age, int boundary);

/// Which units enter an evaluation. An unset filter admits everything.
struct ScenarioSpec {
  ReferralScheme scheme = ReferralScheme::RDR;
  EvalUnit unit = EvalUnit::PerPatient;
  std::optional<Projection> projection;
  std::optional<Sex> sex;
  std::optional<Laterality> laterality;
  std::optional<AgeFilter> age;

  /// e.g. "scheme=RDR,unit=patient,projection=A,sex=all,laterality=all,age=<60"
  std::string to_string() const;
  /// Inverse of to_string; omitted keys keep their defaults. "<=60" is read
  /// as the "<60" band. Throws Error(ValueError).
  static ScenarioSpec parse(std::string_view text);

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

/// What the system concluded about one image.
enum class PredictedClass : std::uint8_t { NonReferable, Referable, Ungradable };

std::string_view to_string(PredictedClass c);

struct ImagePrediction {
  PredictedClass predicted = PredictedClass::NonReferable;
  /// M1 referral score, when available.
  std::optional<double> score;
  friend bool operator==(const ImagePrediction&,
                         const ImagePrediction&) = default;
};

using PredictionSet = std::map<std::string, ImagePrediction, std::less<>>;

/// Reads `image_id,model,label,score` rows. An MQ label of 0 marks the image
/// ungradable; otherwise the M1 label decides. Other models are accepted and
/// ignored. Throws SchemaError, ValueError, DuplicateKey.
PredictionSet parse_predictions_csv(std::string_view text);
/// An unreadable file is reported as SchemaError (no predictions table).
PredictionSet load_predictions(const std::string& path);
std::string predictions_to_csv(const PredictionSet& predictions);

/// Retake results carry no prediction: throws Error(InvalidState).
PredictedClass predicted_class(const ScreeningResult& result);
ImagePrediction image_prediction(const ScreeningResult& result);

/// Referable if any image is; under RDR ungradable images are ignored and a
/// patient with nothing else is Excluded; under ACR ungradable is Referable.
/// R5 grades must be filtered out first. Throws EmptyInput on no grades.
ReferralCategory patient_truth(std::span<const Grade> grades,
                               ReferralScheme scheme);

/// Same combinator over predictions, with Ungradable in the role of R6.
ReferralCategory patient_prediction(std::span<const PredictedClass> predicted,
                                    ReferralScheme scheme);
ReferralCategory patient_prediction(std::span<const ScreeningResult> results,
                                    ReferralScheme scheme);

/// One evaluation unit with the attributes used for fairness slicing.
struct LabeledPair {
  std::string unit_id;
  ReferralCategory truth = ReferralCategory::NonReferable;
  ReferralCategory prediction = ReferralCategory::NonReferable;
  std::optional<double> score;
  Sex sex = Sex::Unknown;
  int age = 0;
  /// Unset for patient units spanning several projections / both eyes.
  std::optional<Projection> projection;
  std::optional<Laterality> laterality;
  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

/// Applies the scenario filters and builds one pair per surviving unit.
/// Units whose truth is Excluded are dropped. Under RDR a unit the system
/// only called ungradable counts as a NonReferable prediction. R5 images
/// are skipped. Throws MissingPrediction for an admitted image without one.
std::vector<LabeledPair> filter_scenario(const Cohort& cohort,
                                         const PredictionSet& predictions,
                                         const ScenarioSpec& scenario);

/// Throws Error(InvalidState) if an Excluded category remains.
ConfusionMatrix build_confusion(std::span<const LabeledPair> pairs);

/// `unit_id,truth,prediction,sex,age,projection,laterality,score`
std::string pairs_to_csv(std::span<const LabeledPair> pairs);
std::vector<LabeledPair> parse_pairs_csv(std::string_view text);

}  // namespace raisdr
