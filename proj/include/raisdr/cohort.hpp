#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "raisdr/domain.hpp"

namespace raisdr {

using GraderGrades = std::array<Grade, 3>;

struct Consensus {
  Grade grade;
  /// Set when all three graders disagreed and the tie-break rule decided.
  bool tie_break = false;
  friend bool operator==(const Consensus&, const Consensus&) = default;
};

/// Majority grade of three graders; with no majority, the most severe
/// gradable grade among them (flagged as a tie-break).
Consensus consensus_grade(const GraderGrades& grades);

struct PatientRecord {
  static constexpr int kMinAge = 18;

  std::string patient_id;
  int age = kMinAge;
  Sex sex = Sex::Unknown;
  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

struct ImageRecord {
  std::string image_id;
  std::string patient_id;
  Laterality laterality = Laterality::Left;
  Projection projection = Projection::A;
  GraderGrades grader_grades{};
  Consensus consensus{Grade::R0, false};
  std::string image_path;
  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// A validated set of patients and their labeled images. Immutable once
/// built; construction goes through add_patient/add_image.
class Cohort {
 public:
  static constexpr std::size_t kMaxImagesPerPatient = 4;

  /// Throws ValueError (age under 18, repeated patient id).
  void add_patient(PatientRecord patient);
  /// Computes the consensus. Throws OrphanImage for an unknown patient and
  /// DuplicateImage for a repeated image id or (patient, eye, projection).
  void add_image(ImageRecord image);

  const std::vector<PatientRecord>& patients() const noexcept {
    return patients_;
  }
  const std::vector<ImageRecord>& images() const noexcept { return images_; }
  const PatientRecord* find_patient(std::string_view patient_id) const;
  const ImageRecord* find_image(std::string_view image_id) const;
  /// Indices into images(), in insertion order.
  const std::vector<std::size_t>& images_of(std::string_view patient_id) const;

  std::string provenance;

  friend bool operator==(const Cohort& a, const Cohort& b) {
    return a.patients_ == b.patients_ && a.images_ == b.images_;
  }

 private:
  std::vector<PatientRecord> patients_;
  std::vector<ImageRecord> images_;
  std::map<std::string, std::size_t, std::less<>> patient_index_;
  std::map<std::string, std::size_t, std::less<>> image_index_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> by_patient_;
};

/// Column order of the cohort CSV.
inline constexpr std::array<std::string_view, 10> kCohortColumns = {
    "image_id",   "patient_id", "age",     "sex",     "laterality",
    "projection", "grader1",    "grader2", "grader3", "image_path"};

/// Reads the cohort CSV. Rows may leave age/sex empty when another row of
/// the same patient carries them. Throws SchemaError, DuplicateImage,
/// OrphanImage or ValueError.
Cohort parse_cohort_csv(std::string_view text);
Cohort load_cohort(const std::filesystem::path& path);
std::string to_csv(const Cohort& cohort);

/// Patient counts per consensus group; ungradable patients have R6 on every
/// image.
struct GroupCounts {
  std::int64_t r0_r1 = 0;
  std::int64_t r2 = 0;
  std::int64_t r3 = 0;
  std::int64_t r4 = 0;
  std::int64_t ungradable = 0;

  std::int64_t total() const noexcept {
    return r0_r1 + r2 + r3 + r4 + ungradable;
  }
  friend bool operator==(const GroupCounts&, const GroupCounts&) = default;
};

struct SyntheticParams {
  std::int64_t n_patients = 0;
  double female_fraction = 0.5;
  double age_mean = 60.0;
  double age_sd = 10.0;
  GroupCounts groups;

  /// Throws Error(InvalidParams).
  void validate() const;

  /// The validation cohort marginals: 1046 assessed patients, 65.7% female,
  /// age 60.4 (12.1), groups {679, 64, 28, 26, 249}. The ungradable count is
  /// derived as 1046 assessed minus 797 fully gradable.
  static SyntheticParams validation_cohort();

  nlohmann::json to_json() const;
  static SyntheticParams from_json(const nlohmann::json& j);
};

/// Seed-deterministic cohort with exactly the requested group and sex counts.
Cohort generate_synthetic(const SyntheticParams& params, std::uint64_t seed);

}  // namespace raisdr
