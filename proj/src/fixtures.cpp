#include "raisdr/fixtures.hpp"

#include <charconv>
#include <sstream>

#include "raisdr/error.hpp"

namespace raisdr {

namespace {

constexpr auto RDR = ReferralScheme::RDR;
constexpr auto ACR = ReferralScheme::ACR;
constexpr auto Patient = EvalUnit::PerPatient;
constexpr auto Image = EvalUnit::PerImage;

// cm is {tp, tn, fp, fn}.
const std::array<PublishedRow, 8> kRows = {{
    {"per-patient", "proposed", RDR, Patient, {49, 715, 28, 5}, {98, 91, 96, 64, 99, 96}},
    {"per-patient", "eyeart", RDR, Patient, {53, 562, 181, 1}, {86, 98, 76, 23, 100, 77}},
    {"per-patient", "proposed", ACR, Patient, {270, 637, 106, 33}, {90, 89, 86, 72, 95, 87}},
    {"per-patient", "eyeart", ACR, Patient, {282, 562, 181, 21}, {85, 93, 76, 61, 96, 81}},
    {"per-image", "proposed", RDR, Image, {89, 1550, 58, 11}, {98, 89, 96, 61, 99, 96}},
    {"per-image", "eyeart", RDR, Image, {98, 1186, 422, 2}, {85, 98, 74, 19, 100, 75}},
    {"per-image", "proposed", ACR, Image, {410, 1428, 180, 60}, {92, 87, 89, 69, 96, 88}},
    {"per-image", "eyeart", ACR, Image, {437, 1186, 422, 33}, {84, 93, 74, 51, 97, 78}},
}};

}  // namespace

std::string PublishedRow::label() const {
  return std::string(table) + "/" + std::string(system) + "/" +
         std::string(to_string(scheme));
}

std::span<const PublishedRow> published_rows() { return kRows; }

std::array<std::optional<std::uint64_t>, 6> headline_cells(
    const MetricsReport& m) {
  const auto pct = [](const std::optional<Fraction>& f)
      -> std::optional<std::uint64_t> {
    if (!f) return std::nullopt;
    return f->percent();
  };
  return {pct(m.f1_negative), pct(m.sensitivity), pct(m.specificity),
          pct(m.ppv),         pct(m.npv),         pct(m.accuracy)};
}

std::vector<ReproductionRow> reproduce(std::span<const PublishedRow> rows) {
  std::vector<ReproductionRow> out;
  for (const auto& row : rows) {
    ReproductionRow r{row, compute_metrics(row.cm), {}};
    const auto got = headline_cells(r.metrics);
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i] != row.expected[i]) {
        std::ostringstream msg;
        msg << row.label() << ": " << kHeadlineCells[i] << " expected "
            << row.expected[i] << " got "
            << (got[i] ? std::to_string(*got[i]) : std::string("undefined"));
        r.mismatches.push_back(msg.str());
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

ConfusionMatrix parse_matrix_spec(std::string_view text) {
  ConfusionMatrix cm;
  bool seen[4] = {false, false, false, false};
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find(',', pos), text.size());
    const auto item = text.substr(pos, end - pos);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ValueError,
                  "matrix entry '" + std::string(item) + "' is not KEY=VALUE");
    }
    const auto key = item.substr(0, eq);
    const auto val = item.substr(eq + 1);
    std::uint64_t n = 0;
    const auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), n);
    if (ec != std::errc() || ptr != val.data() + val.size() || val.empty()) {
      throw Error(ErrorCode::ValueError,
                  "bad count '" + std::string(val) + "' for " + std::string(key));
    }
    int slot = -1;
    if (key == "TP") { cm.tp = n; slot = 0; }
    else if (key == "TN") { cm.tn = n; slot = 1; }
    else if (key == "FP") { cm.fp = n; slot = 2; }
    else if (key == "FN") { cm.fn = n; slot = 3; }
    if (slot < 0) {
      throw Error(ErrorCode::ValueError, "unknown cell '" + std::string(key) + "'");
    }
    if (seen[slot]) {
      throw Error(ErrorCode::ValueError, "cell " + std::string(key) + " repeated");
    }
    seen[slot] = true;
    pos = end + 1;
  }
  if (!(seen[0] && seen[1] && seen[2] && seen[3])) {
    throw Error(ErrorCode::ValueError, "matrix needs TP, TN, FP and FN");
  }
  return cm;
}

namespace {

enum class Outcome : std::uint8_t {
  TrueNegative,    // both eyes called non-referable
  FalsePositive,   // one eye called referable
  NegativeUngradableCall,  // one eye called ungradable, other non-referable
  TruePositive,
  FalseNegative,
  UngradableCaught,  // ungradable truth, called ungradable
  UngradableMissed,  // ungradable truth, called non-referable
};

struct Block {
  Outcome outcome;
  int count;
};

// RDR: TN 637+78, FP 28, FN 5, TP 49; ungradable patients are excluded.
// ACR: TN 637, FP 28+78, FN 5+28, TP 49+221.
constexpr std::array<Block, 7> kBlocks = {{
    {Outcome::TrueNegative, 637},
    {Outcome::FalsePositive, 28},
    {Outcome::NegativeUngradableCall, 78},
    {Outcome::TruePositive, 49},
    {Outcome::FalseNegative, 5},
    {Outcome::UngradableCaught, 221},
    {Outcome::UngradableMissed, 28},
}};

constexpr int kR3Patients = 28;  // of the 54 referable; the rest are R4

// Deterministic score in (lo, hi) spread by index.
double spread(int i, double lo, double hi) {
  const int k = (i * 37) % 97;
  return lo + (hi - lo) * (k + 1) / 98.0;
}

ClassifierOutput classifier(double score) {
  return {score >= 0.5 ? 1 : 0, score};
}

AnatomyOutput anatomy_present() {
  return {{true, 0.95, PixelBox{200, 200, 300, 300}},
          {true, 0.9, PixelBox{330, 220, 400, 290}}};
}

void add_gradable(ReplayFixture& f, const std::string& id, Grade truth,
                  PredictedClass call, int salt) {
  f.manifest.insert(id, ModelId::MQ, classifier(spread(salt, 0.7, 0.99)));
  f.manifest.insert(id, ModelId::MA, anatomy_present());
  double m1 = 0.0;
  if (call == PredictedClass::Referable) {
    m1 = spread(salt, 0.55, 0.99);
    f.manifest.insert(id, ModelId::M3,
                      classifier(truth == Grade::R4 ? spread(salt, 0.6, 0.95)
                                                    : spread(salt, 0.05, 0.4)));
  } else {
    m1 = spread(salt, 0.01, 0.45);
    f.manifest.insert(id, ModelId::M2,
                      classifier(truth == Grade::R2 ? spread(salt, 0.6, 0.95)
                                                    : spread(salt, 0.05, 0.4)));
  }
  f.manifest.insert(id, ModelId::M1, classifier(m1));
  f.predictions[id] = ImagePrediction{call, m1};
}

void add_ungradable(ReplayFixture& f, const std::string& id, int salt) {
  f.manifest.insert(id, ModelId::MQ, classifier(spread(salt, 0.02, 0.3)));
  f.manifest.insert(id, ModelId::MA, anatomy_present());
  f.predictions[id] = ImagePrediction{PredictedClass::Ungradable, std::nullopt};
}

ReplayFixture build_fixture() {
  ReplayFixture f;
  f.cohort.provenance = "per-patient replay fixture";
  int index = 0;
  int referable_seen = 0;
  for (const auto& block : kBlocks) {
    for (int k = 0; k < block.count; ++k, ++index) {
      std::string pid = std::to_string(index + 1);
      pid = "F" + std::string(4 - pid.size(), '0') + pid;
      // Roughly two thirds female, ages 25..84.
      const Sex sex = (index * 2) % 3 == 0 ? Sex::Male : Sex::Female;
      f.cohort.add_patient({pid, 25 + (index * 13) % 60, sex});

      Grade left = Grade::R0;
      Grade right = (index % 3 == 0) ? Grade::R1 : Grade::R0;
      PredictedClass left_call = PredictedClass::NonReferable;
      PredictedClass right_call = PredictedClass::NonReferable;
      switch (block.outcome) {
        case Outcome::TrueNegative:
          if (index % 10 == 0) left = Grade::R2;
          break;
        case Outcome::FalsePositive:
          left = Grade::R2;
          left_call = PredictedClass::Referable;
          break;
        case Outcome::NegativeUngradableCall:
          left_call = PredictedClass::Ungradable;
          break;
        case Outcome::TruePositive:
        case Outcome::FalseNegative:
          left = referable_seen++ < kR3Patients ? Grade::R3 : Grade::R4;
          if (block.outcome == Outcome::TruePositive) {
            left_call = PredictedClass::Referable;
          }
          break;
        case Outcome::UngradableCaught:
          left = right = Grade::R6;
          left_call = PredictedClass::Ungradable;
          break;
        case Outcome::UngradableMissed:
          left = right = Grade::R6;
          break;
      }

      const auto add = [&](Laterality eye, Projection proj, Grade g,
                           PredictedClass call, int salt) {
        ImageRecord img;
        img.image_id = pid + "-" + std::string(to_string(eye)) +
                       std::string(to_string(proj));
        img.patient_id = pid;
        img.laterality = eye;
        img.projection = proj;
        img.grader_grades = {g, g, g};
        if (call == PredictedClass::Ungradable) {
          add_ungradable(f, img.image_id, salt);
        } else {
          add_gradable(f, img.image_id, g, call, salt);
        }
        f.cohort.add_image(std::move(img));
      };
      add(Laterality::Left, Projection::A, left, left_call, index * 4);
      add(Laterality::Right, Projection::A, right, right_call, index * 4 + 1);

      // Optic-nerve views contradict the macula-centred calls.
      const Grade b_grade = is_gradable(left) ? Grade::R0 : Grade::R6;
      const PredictedClass b_call = block.outcome == Outcome::TrueNegative
                                        ? PredictedClass::Referable
                                        : PredictedClass::NonReferable;
      add(Laterality::Left, Projection::B, b_grade, b_call, index * 4 + 2);
      add(Laterality::Right, Projection::B, b_grade, b_call, index * 4 + 3);
    }
  }
  return f;
}

}  // namespace

const ReplayFixture& per_patient_fixture() {
  static const ReplayFixture fixture = build_fixture();
  return fixture;
}

}  // namespace raisdr
