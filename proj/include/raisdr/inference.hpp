#pragma once

// Uniform access to the five decision models. Two backends are provided: a
// manifest-driven stub for deterministic replay and an HTTP/JSON client for an
// external model server.

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

#include "json.hpp"

#include "raisdr/preprocess.hpp"

namespace raisdr {

/// MQ quality, MA anatomy, M1 referral, M2 low grade, M3 high grade.
enum class ModelId : std::uint8_t { MQ, MA, M1, M2, M3 };

inline constexpr std::array<ModelId, 5> kAllModels = {
    ModelId::MQ, ModelId::MA, ModelId::M1, ModelId::M2, ModelId::M3};

std::string_view to_string(ModelId m);
ModelId parse_model_id(std::string_view text);

struct ClassifierOutput {
  int label = 0;
  double score = 0.0;  // confidence for label 1
  friend bool operator==(const ClassifierOutput&,
                         const ClassifierOutput&) = default;
};

struct PixelBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct Detection {
  bool present = false;
  double score = 0.0;
  std::optional<PixelBox> box;
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct AnatomyOutput {
  Detection macula;
  Detection optic_nerve;
  friend bool operator==(const AnatomyOutput&, const AnatomyOutput&) = default;
};

/// Decision threshold per model; for MA it is the detection threshold.
class ModelThresholds {
 public:
  ModelThresholds() { values_.fill(0.5); }

  double of(ModelId m) const noexcept {
    return values_[static_cast<std::size_t>(m)];
  }
  /// Throws Error(InvalidPolicy) outside [0, 1].
  void set(ModelId m, double threshold);

  friend bool operator==(const ModelThresholds&,
                         const ModelThresholds&) = default;

 private:
  std::array<double, 5> values_{};
};

/// Throws Error(InvalidOutput) unless score is in [0,1] and the label equals
/// (score >= threshold).
void validate_output(const ClassifierOutput& out, double threshold);
/// Throws Error(InvalidOutput) unless scores are in [0,1] and every detection
/// flagged present carries score >= threshold.
void validate_output(const AnatomyOutput& out, double threshold);

/// Identifies the image being scored. The stub keys on `image_id`; the HTTP
/// backend additionally ships the standardized pixels when present.
struct ImageRef {
  std::string image_id;
  const StandardImage* image = nullptr;
};

class InferenceBackend {
 public:
  virtual ~InferenceBackend() = default;

  /// model must be one of MQ, M1, M2, M3.
  virtual ClassifierOutput classify(ModelId model,
                                    const ImageRef& image) const = 0;
  virtual AnatomyOutput detect_anatomy(const ImageRef& image) const = 0;
};

using ManifestOutput = std::variant<ClassifierOutput, AnatomyOutput>;

class BackendManifest {
 public:
  using Key = std::pair<std::string, ModelId>;

  /// Throws DuplicateKey for a repeated (image_id, model) and InvalidOutput
  /// when the output kind does not fit the model or violates its invariants.
  void insert(std::string image_id, ModelId model, ManifestOutput output,
              const ModelThresholds& thresholds = {});

  const ManifestOutput* find(std::string_view image_id, ModelId model) const;
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::map<Key, ManifestOutput>& entries() const noexcept {
    return entries_;
  }

  nlohmann::json to_json() const;

 private:
  std::map<Key, ManifestOutput> entries_;
};

/// Parses the manifest JSON array. Empty (or whitespace-only) text is an
/// empty manifest. Throws ParseError, DuplicateKey or InvalidOutput.
BackendManifest parse_manifest(std::string_view text,
                               const ModelThresholds& thresholds = {});
BackendManifest load_manifest(const std::filesystem::path& path,
                              const ModelThresholds& thresholds = {});

/// Immutable lookup table backend. Labels are re-derived from scores with
/// the configured thresholds, so adjusting a threshold takes effect without
/// editing the manifest.
class StubBackend final : public InferenceBackend {
 public:
  explicit StubBackend(BackendManifest manifest, ModelThresholds thresholds = {})
      : manifest_(std::move(manifest)), thresholds_(thresholds) {}

  ClassifierOutput classify(ModelId model,
                            const ImageRef& image) const override;
  AnatomyOutput detect_anatomy(const ImageRef& image) const override;

  const BackendManifest& manifest() const noexcept { return manifest_; }

 private:
  BackendManifest manifest_;
  ModelThresholds thresholds_;
};

struct HttpBackendOptions {
  std::chrono::milliseconds connect_timeout{2000};
  std::chrono::milliseconds read_timeout{10000};
};

/// Client for `POST /v1/infer`. Each call opens its own connection, so one
/// instance may serve concurrent screenings.
class HttpBackend final : public InferenceBackend {
 public:
  HttpBackend(std::string base_url, ModelThresholds thresholds = {},
              HttpBackendOptions options = {});

  ClassifierOutput classify(ModelId model,
                            const ImageRef& image) const override;
  AnatomyOutput detect_anatomy(const ImageRef& image) const override;

 private:
  nlohmann::json post_infer(ModelId model, const ImageRef& image) const;

  std::string base_url_;
  ModelThresholds thresholds_;
  HttpBackendOptions options_;
};

// Wire (de)serialization shared by the manifest, the HTTP client and the
// service. Missing labels/present flags are derived from the threshold.
nlohmann::json to_json(const ClassifierOutput& out);
nlohmann::json to_json(const AnatomyOutput& out);
ClassifierOutput classifier_output_from_json(const nlohmann::json& j,
                                             double threshold);
AnatomyOutput anatomy_output_from_json(const nlohmann::json& j,
                                       double threshold);

}  // namespace raisdr
