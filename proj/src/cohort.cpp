#include "raisdr/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "raisdr/csv.hpp"
#include "raisdr/error.hpp"

namespace raisdr {

Consensus consensus_grade(const GraderGrades& g) {
  if (g[0] == g[1] || g[0] == g[2]) return {g[0], false};
  if (g[1] == g[2]) return {g[1], false};
  // All three differ: most severe gradable grade. At most two of the three
  // can be ungradable (R5, R6), so one gradable grade always exists.
  std::optional<Grade> worst;
  for (Grade x : g) {
    if (is_gradable(x) && (!worst || *severity(x) > *severity(*worst))) {
      worst = x;
    }
  }
  return {*worst, true};
}

void Cohort::add_patient(PatientRecord patient) {
  if (patient.age < PatientRecord::kMinAge) {
    throw Error(ErrorCode::ValueError,
                "patient " + patient.patient_id + " is under 18");
  }
  if (patient_index_.contains(patient.patient_id)) {
    throw Error(ErrorCode::ValueError,
                "patient " + patient.patient_id + " listed twice");
  }
  patient_index_.emplace(patient.patient_id, patients_.size());
  patients_.push_back(std::move(patient));
}

void Cohort::add_image(ImageRecord image) {
  if (!patient_index_.contains(image.patient_id)) {
    throw Error(ErrorCode::OrphanImage,
                "image " + image.image_id + " references unknown patient " +
                    image.patient_id);
  }
  if (image_index_.contains(image.image_id)) {
    throw Error(ErrorCode::DuplicateImage,
                "image id " + image.image_id + " repeated");
  }
  auto& siblings = by_patient_[image.patient_id];
  for (std::size_t idx : siblings) {
    const auto& other = images_[idx];
    if (other.laterality == image.laterality &&
        other.projection == image.projection) {
      throw Error(ErrorCode::DuplicateImage,
                  "patient " + image.patient_id + " already has a " +
                      std::string(to_string(image.laterality)) + "/" +
                      std::string(to_string(image.projection)) + " image");
    }
  }
  image.consensus = consensus_grade(image.grader_grades);
  siblings.push_back(images_.size());
  image_index_.emplace(image.image_id, images_.size());
  images_.push_back(std::move(image));
}

const PatientRecord* Cohort::find_patient(std::string_view patient_id) const {
  const auto it = patient_index_.find(patient_id);
  return it == patient_index_.end() ? nullptr : &patients_[it->second];
}

const ImageRecord* Cohort::find_image(std::string_view image_id) const {
  const auto it = image_index_.find(image_id);
  return it == image_index_.end() ? nullptr : &images_[it->second];
}

const std::vector<std::size_t>& Cohort::images_of(
    std::string_view patient_id) const {
  static const std::vector<std::size_t> kNone;
  const auto it = by_patient_.find(patient_id);
  return it == by_patient_.end() ? kNone : it->second;
}

namespace {

int parse_age(const std::string& text, std::size_t line) {
  try {
    std::size_t used = 0;
    const int age = std::stoi(text, &used);
    if (used == text.size()) return age;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ValueError, "line " + std::to_string(line) +
                                         ": unparsable age '" + text + "'");
}

template <typename F>
auto at_line(std::size_t line, F&& parse) {
  try {
    return parse();
  } catch (const Error& e) {
    throw Error(e.code(), "line " + std::to_string(line) + ": " + e.detail());
  }
}

}  // namespace

Cohort parse_cohort_csv(std::string_view text) {
  const CsvTable table = parse_csv(text);
  const auto cols =
      table.require(std::span(kCohortColumns.data(), kCohortColumns.size() - 1));
  const auto path_col = table.column("image_path");
  enum { kImage, kPatient, kAge, kSex, kLat, kProj, kG1, kG2, kG3 };

  // First pass: demographics per patient, in order of first appearance.
  struct Demographics {
    std::optional<int> age;
    std::optional<Sex> sex;
  };
  std::vector<std::string> order;
  std::map<std::string, Demographics> demo;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.lines[r];
    const auto& pid = row[cols[kPatient]];
    if (pid.empty()) {
      throw Error(ErrorCode::ValueError,
                  "line " + std::to_string(line) + ": empty patient_id");
    }
    auto [it, fresh] = demo.try_emplace(pid);
    if (fresh) order.push_back(pid);
    if (!row[cols[kAge]].empty()) {
      const int age = parse_age(row[cols[kAge]], line);
      if (it->second.age && *it->second.age != age) {
        throw Error(ErrorCode::ValueError, "line " + std::to_string(line) +
                                               ": conflicting age for " + pid);
      }
      it->second.age = age;
    }
    if (!row[cols[kSex]].empty()) {
      const Sex sex = at_line(line, [&] { return parse_sex(row[cols[kSex]]); });
      if (it->second.sex && *it->second.sex != sex) {
        throw Error(ErrorCode::ValueError, "line " + std::to_string(line) +
                                               ": conflicting sex for " + pid);
      }
      it->second.sex = sex;
    }
  }

  Cohort cohort;
  for (const auto& pid : order) {
    const auto& d = demo.at(pid);
    if (!d.age) continue;  // images of this patient become orphans below
    cohort.add_patient({pid, *d.age, d.sex.value_or(Sex::Unknown)});
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    at_line(table.lines[r], [&] {
      ImageRecord img;
      img.image_id = row[cols[kImage]];
      if (img.image_id.empty()) {
        throw Error(ErrorCode::ValueError, "empty image_id");
      }
      img.patient_id = row[cols[kPatient]];
      img.laterality = parse_laterality(row[cols[kLat]]);
      img.projection = parse_projection(row[cols[kProj]]);
      img.grader_grades = {parse_grade(row[cols[kG1]]),
                           parse_grade(row[cols[kG2]]),
                           parse_grade(row[cols[kG3]])};
      if (path_col) img.image_path = row[*path_col];
      cohort.add_image(std::move(img));
      return 0;
    });
  }
  return cohort;
}

Cohort load_cohort(const std::filesystem::path& path) {
  Cohort c = parse_cohort_csv(read_text_file(path.string()));
  c.provenance = "loaded from " + path.string();
  return c;
}

std::string to_csv(const Cohort& cohort) {
  std::ostringstream out;
  for (std::size_t i = 0; i < kCohortColumns.size(); ++i) {
    out << (i ? "," : "") << kCohortColumns[i];
  }
  out << '\n';
  for (const auto& img : cohort.images()) {
    const auto* p = cohort.find_patient(img.patient_id);
    out << csv_field(img.image_id) << ',' << csv_field(img.patient_id) << ','
        << p->age << ',' << to_string(p->sex) << ','
        << to_string(img.laterality) << ',' << to_string(img.projection);
    for (Grade g : img.grader_grades) out << ',' << to_string(g);
    out << ',' << csv_field(img.image_path) << '\n';
  }
  return out.str();
}

void SyntheticParams::validate() const {
  const auto fail = [](const std::string& why) {
    throw Error(ErrorCode::InvalidParams, why);
  };
  if (n_patients < 0) fail("n_patients must be non-negative");
  if (groups.r0_r1 < 0 || groups.r2 < 0 || groups.r3 < 0 || groups.r4 < 0 ||
      groups.ungradable < 0) {
    fail("group counts must be non-negative");
  }
  if (groups.total() != n_patients) {
    fail("group counts sum to " + std::to_string(groups.total()) +
         ", expected " + std::to_string(n_patients));
  }
  if (!(female_fraction >= 0.0 && female_fraction <= 1.0)) {
    fail("female_fraction must lie in [0, 1]");
  }
  if (!(age_sd >= 0.0) || !std::isfinite(age_mean)) {
    fail("age distribution must have finite mean and sd >= 0");
  }
  if (age_sd == 0.0 && age_mean < PatientRecord::kMinAge) {
    fail("degenerate age distribution below 18");
  }
}

SyntheticParams SyntheticParams::validation_cohort() {
  SyntheticParams p;
  p.n_patients = 1046;
  p.female_fraction = 0.657;
  p.age_mean = 60.4;
  p.age_sd = 12.1;
  p.groups = {679, 64, 28, 26, 1046 - 797};
  return p;
}

nlohmann::json SyntheticParams::to_json() const {
  return {{"n_patients", n_patients},
          {"female_fraction", female_fraction},
          {"age_mean", age_mean},
          {"age_sd", age_sd},
          {"group_counts",
           {{"R0R1", groups.r0_r1},
            {"R2", groups.r2},
            {"R3", groups.r3},
            {"R4", groups.r4},
            {"ungradable", groups.ungradable}}}};
}

SyntheticParams SyntheticParams::from_json(const nlohmann::json& j) {
  try {
    SyntheticParams p;
    p.n_patients = j.at("n_patients").get<std::int64_t>();
    p.female_fraction = j.at("female_fraction").get<double>();
    p.age_mean = j.at("age_mean").get<double>();
    p.age_sd = j.at("age_sd").get<double>();
    const auto& g = j.at("group_counts");
    p.groups = {g.at("R0R1").get<std::int64_t>(), g.at("R2").get<std::int64_t>(),
                g.at("R3").get<std::int64_t>(), g.at("R4").get<std::int64_t>(),
                g.at("ungradable").get<std::int64_t>()};
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParams, e.what());
  }
}

namespace {

enum class Group { R0R1, R2, R3, R4, Ungradable };

template <typename T, typename Rng>
void shuffle(std::vector<T>& v, Rng& rng) {
  // Fisher-Yates with boost's portable integer distribution.
  for (std::size_t i = v.size(); i > 1; --i) {
    boost::random::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

// Truncated-normal ages by stratified inverse-CDF sampling: one uniform draw
// per equal-probability stratum above the truncation point, then shuffled.
// Each age is still marginally N(mean, sd) truncated at 18.
template <typename Rng>
std::vector<int> draw_ages(const SyntheticParams& p, Rng& rng) {
  const auto n = static_cast<std::size_t>(p.n_patients);
  std::vector<int> ages(n);
  if (p.age_sd == 0.0) {
    std::fill(ages.begin(), ages.end(),
              static_cast<int>(std::lround(p.age_mean)));
    return ages;
  }
  const boost::math::normal_distribution<double> normal(p.age_mean, p.age_sd);
  const double floor_p = boost::math::cdf(normal, PatientRecord::kMinAge);
  boost::random::uniform_01<double> unit;
  for (std::size_t i = 0; i < n; ++i) {
    double u = floor_p + (1.0 - floor_p) * ((i + unit(rng)) / n);
    u = std::clamp(u, floor_p + 1e-12, 1.0 - 1e-12);
    const double age = boost::math::quantile(normal, u);
    ages[i] = std::max(PatientRecord::kMinAge,
                       static_cast<int>(std::lround(age)));
  }
  shuffle(ages, rng);
  return ages;
}

}  // namespace

Cohort generate_synthetic(const SyntheticParams& params, std::uint64_t seed) {
  params.validate();
  boost::random::mt19937_64 rng(seed);
  const auto n = static_cast<std::size_t>(params.n_patients);

  std::vector<Group> groups;
  groups.reserve(n);
  const auto add = [&](Group g, std::int64_t count) {
    groups.insert(groups.end(), static_cast<std::size_t>(count), g);
  };
  add(Group::R0R1, params.groups.r0_r1);
  add(Group::R2, params.groups.r2);
  add(Group::R3, params.groups.r3);
  add(Group::R4, params.groups.r4);
  add(Group::Ungradable, params.groups.ungradable);
  shuffle(groups, rng);

  const auto females = static_cast<std::size_t>(
      std::llround(params.female_fraction * static_cast<double>(n)));
  std::vector<Sex> sexes(n, Sex::Male);
  std::fill_n(sexes.begin(), std::min(females, n), Sex::Female);
  shuffle(sexes, rng);

  const auto ages = draw_ages(params, rng);

  Cohort cohort;
  std::ostringstream note;
  note << "synthetic seed=" << seed << " params=" << params.to_json().dump();
  cohort.provenance = note.str();

  const int width = std::max<int>(4, std::to_string(n).size());
  for (std::size_t i = 0; i < n; ++i) {
    std::string pid = std::to_string(i + 1);
    pid = "P" + std::string(width - pid.size(), '0') + pid;
    cohort.add_patient({pid, ages[i], sexes[i]});

    // The index eye carries the patient's grade; the fellow eye is no more
    // severe. Ungradable patients are R6 throughout.
    Grade index_grade = Grade::R6;
    switch (groups[i]) {
      case Group::R0R1: {
        boost::random::uniform_int_distribution<int> coin(0, 1);
        index_grade = coin(rng) ? Grade::R1 : Grade::R0;
        break;
      }
      case Group::R2: index_grade = Grade::R2; break;
      case Group::R3: index_grade = Grade::R3; break;
      case Group::R4: index_grade = Grade::R4; break;
      case Group::Ungradable: break;
    }
    Grade fellow_grade = index_grade;
    if (is_gradable(index_grade)) {
      boost::random::uniform_int_distribution<int> pick(
          0, *severity(index_grade));
      fellow_grade = static_cast<Grade>(pick(rng));
    }
    boost::random::uniform_int_distribution<int> coin(0, 1);
    const Laterality index_eye = coin(rng) ? Laterality::Right : Laterality::Left;

    for (Laterality eye : {Laterality::Left, Laterality::Right}) {
      for (Projection proj : {Projection::A, Projection::B}) {
        ImageRecord img;
        img.image_id = pid + "-" + std::string(to_string(eye)) +
                       std::string(to_string(proj));
        img.patient_id = pid;
        img.laterality = eye;
        img.projection = proj;
        const Grade g = eye == index_eye ? index_grade : fellow_grade;
        img.grader_grades = {g, g, g};
        cohort.add_image(std::move(img));
      }
    }
  }
  return cohort;
}

}  // namespace raisdr
