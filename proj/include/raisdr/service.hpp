#pragma once

// Screening service state: studies, two-step screenings (gate, then the
// on-site decision when the gate fails), append-only reviewer feedback and
// evaluation reports over registered datasets.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "raisdr/aggregation.hpp"
#include "raisdr/cohort.hpp"
#include "raisdr/preprocess.hpp"
#include "raisdr/store.hpp"
#include "raisdr/workflow.hpp"

namespace raisdr {

struct ServiceConfig {
  ScreeningPolicy policy;
  PreprocessConfig preprocess;
  std::optional<std::filesystem::path> store_dir;
  /// ISO-8601 UTC timestamps by default; tests may pin it.
  std::function<std::string()> clock;
  /// Defaults to random UUIDs.
  std::function<std::string()> id_generator;
};

struct ImageMetadata {
  std::string image_id;
  /// Key sent to the backend; defaults to image_id. Retakes of one image
  /// are separate captures.
  std::string capture_id;
};

enum class SubmitStatus : std::uint8_t { Complete, AwaitingMdDecision };

struct SubmitOutcome {
  SubmitStatus status = SubmitStatus::Complete;
  std::string image_id;
  int prior_retakes = 0;
  std::optional<ScreeningResult> result;       // Complete
  std::optional<QualityAssessment> assessment;  // AwaitingMdDecision
};

nlohmann::json to_json(const SubmitOutcome& outcome);
nlohmann::json to_json(const QualityAssessment& a);
QualityAssessment quality_assessment_from_json(const nlohmann::json& j);

struct FeedbackEntry {
  std::string feedback_id;
  std::string study_id;
  std::string image_id;
  std::string reviewer;
  /// "pass" or a gate failure name; empty when not suggested.
  std::string quality;
  Grade grade = Grade::R0;
  std::string note;
  std::string timestamp;
  friend bool operator==(const FeedbackEntry&, const FeedbackEntry&) = default;
};

nlohmann::json to_json(const FeedbackEntry& e);
/// Reads the client fields (study_id, image_id, reviewer, grade, quality,
/// note). Throws ValueError.
FeedbackEntry feedback_from_json(const nlohmann::json& j);

struct Dataset {
  Cohort cohort;
  PredictionSet predictions;
};

/// One completed screening as persisted, enough to recompute it.
struct StoredScreening {
  std::string study_id;
  std::string image_id;
  std::string capture_id;
  int prior_retakes = 0;
  std::optional<MdDecision> md_decision;
  ScreeningResult result;
};

/// Re-runs a stored screening against a (deterministic) backend.
ScreeningResult replay(const StoredScreening& stored,
                       const InferenceBackend& backend,
                       const ScreeningPolicy& policy);

class ScreeningService {
 public:
  static constexpr std::string_view kDefaultDataset = "per-patient-fixture";

  /// Replays the store, if any. Registers the per-patient replay fixture as
  /// the default dataset.
  ScreeningService(std::shared_ptr<const InferenceBackend> backend,
                   ServiceConfig config);
  ~ScreeningService();

  std::string create_study();
  /// Throws UnknownStudy.
  void close_study(const std::string& study_id);

  /// Throws UnknownStudy, StudyClosed, DecodeError, InvalidImage,
  /// NoFundusDetected, DuplicateImage (image already screened), InvalidState
  /// (decision pending) and backend errors. Nothing is stored on error.
  SubmitOutcome submit_image(const std::string& study_id,
                             std::span<const std::uint8_t> bytes,
                             ImageMetadata metadata);

  /// Throws UnknownStudy, UnknownImage, InvalidState (nothing pending).
  ScreeningResult md_decision(const std::string& study_id,
                              const std::string& image_id, MdDecision decision);

  nlohmann::json results(const std::string& study_id) const;

  /// Throws UnknownStudy / UnknownImage unless the image has a completed
  /// screening.
  FeedbackEntry submit_feedback(FeedbackEntry entry);
  std::vector<FeedbackEntry> feedback(const std::string& study_id = {},
                                      const std::string& image_id = {}) const;

  void add_dataset(const std::string& name, Dataset dataset);
  /// `scenario` as accepted by resolve_scenario. Throws ValueError for an
  /// unknown dataset plus any evaluation error.
  nlohmann::json evaluation_report(const std::string& scenario,
                                   const std::string& dataset) const;

  std::vector<StoredScreening> stored_screenings() const;

  /// Compacts the store.
  void flush();

  const ScreeningPolicy& policy() const noexcept { return config_.policy; }

 private:
  struct Pending {
    std::string capture_id;
    int prior_retakes = 0;
    QualityAssessment assessment;
  };
  struct ImageState {
    std::vector<StoredScreening> attempts;
    std::optional<Pending> pending;
  };
  struct Study {
    std::string study_id;
    std::string created_at;
    bool closed = false;
    std::vector<std::string> order;
    std::map<std::string, ImageState, std::less<>> images;
    mutable std::mutex mu;
  };

  void apply(const nlohmann::json& event);
  std::shared_ptr<Study> study(const std::string& study_id) const;
  ScreeningResult complete(Study& s, const std::string& image_id,
                           const std::string& capture_id, int prior_retakes,
                           std::optional<MdDecision> decision,
                           ScreeningResult result);

  std::shared_ptr<const InferenceBackend> backend_;
  ServiceConfig config_;
  EventStore store_;

  mutable std::mutex mu_;  // guards the maps below, never held across I/O
  std::map<std::string, std::shared_ptr<Study>, std::less<>> studies_;
  std::vector<FeedbackEntry> feedback_;
  std::map<std::string, std::shared_ptr<const Dataset>, std::less<>> datasets_;
};

}  // namespace raisdr
