#include "raisdr/aggregation.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "raisdr/csv.hpp"
#include "raisdr/error.hpp"

namespace raisdr {

std::string_view to_string(EvalUnit u) {
  return u == EvalUnit::PerImage ? "image" : "patient";
}

std::string age_band_label(int age, int boundary) {
  return (age < boundary ? "<" : ">=") + std::to_string(boundary);
}

std::string ScenarioSpec::to_string() const {
  std::ostringstream out;
  out << "scheme=" << raisdr::to_string(scheme)
      << ",unit=" << raisdr::to_string(unit) << ",projection="
      << (projection ? raisdr::to_string(*projection) : "all")
      << ",sex=" << (sex ? raisdr::to_string(*sex) : "all")
      << ",laterality=" << (laterality ? raisdr::to_string(*laterality) : "all")
      << ",age=";
  if (age) {
    out << (age->band == AgeFilter::Band::Below ? "<" : ">=") << age->boundary;
  } else {
    out << "all";
  }
  return out.str();
}

namespace {

int parse_int(std::string_view text) {
  int v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw Error(ErrorCode::ValueError,
                "not an integer: '" + std::string(text) + "'");
  }
  return v;
}

bool is_all(std::string_view v) { return v == "all" || v == "both" || v.empty(); }

}  // namespace

ScenarioSpec ScenarioSpec::parse(std::string_view text) {
  ScenarioSpec spec;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find(',', pos), text.size());
    const auto item = text.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ValueError,
                  "scenario item '" + std::string(item) + "' lacks '='");
    }
    const auto key = item.substr(0, eq);
    const auto value = item.substr(eq + 1);
    if (key == "scheme") {
      spec.scheme = parse_scheme(value);
    } else if (key == "unit") {
      if (value == "image" || value == "per_image") {
        spec.unit = EvalUnit::PerImage;
      } else if (value == "patient" || value == "per_patient") {
        spec.unit = EvalUnit::PerPatient;
      } else {
        throw Error(ErrorCode::ValueError,
                    "unit must be 'image' or 'patient'");
      }
    } else if (key == "projection") {
      spec.projection = is_all(value) || value == "AB"
                            ? std::nullopt
                            : std::optional(parse_projection(value));
    } else if (key == "sex") {
      spec.sex = is_all(value) ? std::nullopt : std::optional(parse_sex(value));
    } else if (key == "laterality") {
      spec.laterality =
          is_all(value) ? std::nullopt : std::optional(parse_laterality(value));
    } else if (key == "age") {
      if (is_all(value)) {
        spec.age.reset();
      } else if (value.starts_with(">=")) {
        spec.age = AgeFilter{parse_int(value.substr(2)), AgeFilter::Band::AtOrAbove};
      } else if (value.starts_with("<=")) {
        spec.age = AgeFilter{parse_int(value.substr(2)), AgeFilter::Band::Below};
      } else if (value.starts_with("<")) {
        spec.age = AgeFilter{parse_int(value.substr(1)), AgeFilter::Band::Below};
      } else {
        throw Error(ErrorCode::ValueError,
                    "age filter must be all, <N or >=N");
      }
    } else {
      throw Error(ErrorCode::ValueError,
                  "unknown scenario key '" + std::string(key) + "'");
    }
    if (end == text.size()) break;
  }
  return spec;
}

std::string_view to_string(PredictedClass c) {
  switch (c) {
    case PredictedClass::NonReferable: return "nonreferable";
    case PredictedClass::Referable: return "referable";
    case PredictedClass::Ungradable: return "ungradable";
  }
  return "?";
}

PredictionSet parse_predictions_csv(std::string_view text) {
  static constexpr std::array<std::string_view, 4> kColumns = {
      "image_id", "model", "label", "score"};
  const CsvTable table = parse_csv(text);
  const auto cols = table.require(kColumns);

  struct Partial {
    std::optional<ClassifierOutput> mq;
    std::optional<ClassifierOutput> m1;
    bool m1_scored = false;
  };
  std::map<std::string, Partial, std::less<>> partial;
  std::vector<std::string> order;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = "line " + std::to_string(table.lines[r]);
    const auto& id = row[cols[0]];
    if (id.empty()) throw Error(ErrorCode::ValueError, where + ": empty image_id");
    ModelId model;
    try {
      model = parse_model_id(row[cols[1]]);
    } catch (const Error& e) {
      throw Error(ErrorCode::ValueError, where + ": " + e.detail());
    }
    if (model != ModelId::MQ && model != ModelId::M1) continue;
    ClassifierOutput out;
    const auto& label = row[cols[2]];
    if (label != "0" && label != "1") {
      throw Error(ErrorCode::ValueError, where + ": label must be 0 or 1");
    }
    out.label = label == "1" ? 1 : 0;
    const auto& score_text = row[cols[3]];
    bool scored = false;
    if (!score_text.empty()) {
      try {
        std::size_t used = 0;
        out.score = std::stod(score_text, &used);
        if (used != score_text.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error(ErrorCode::ValueError,
                    where + ": unparsable score '" + score_text + "'");
      }
      if (!(out.score >= 0.0 && out.score <= 1.0)) {
        throw Error(ErrorCode::ValueError, where + ": score outside [0, 1]");
      }
      scored = true;
    }
    auto [it, fresh] = partial.try_emplace(id);
    if (fresh) order.push_back(id);
    auto& slot = model == ModelId::MQ ? it->second.mq : it->second.m1;
    if (slot) {
      throw Error(ErrorCode::DuplicateKey,
                  where + ": second " + std::string(to_string(model)) +
                      " row for " + id);
    }
    slot = out;
    if (model == ModelId::M1) it->second.m1_scored = scored;
  }

  PredictionSet set;
  for (const auto& id : order) {
    const auto& p = partial.at(id);
    ImagePrediction pred;
    if (p.m1 && p.m1_scored) pred.score = p.m1->score;
    if (p.mq && p.mq->label == 0) {
      pred.predicted = PredictedClass::Ungradable;
    } else if (p.m1) {
      pred.predicted = p.m1->label == 1 ? PredictedClass::Referable
                                        : PredictedClass::NonReferable;
    } else {
      throw Error(ErrorCode::ValueError,
                  "gradable image " + id + " has no M1 prediction");
    }
    set.emplace(id, pred);
  }
  return set;
}

PredictionSet load_predictions(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::SchemaError, "predictions table unavailable: " + e.detail());
  }
  return parse_predictions_csv(text);
}

std::string predictions_to_csv(const PredictionSet& predictions) {
  std::ostringstream out;
  out.precision(17);
  out << "image_id,model,label,score\n";
  for (const auto& [id, p] : predictions) {
    const bool ungradable = p.predicted == PredictedClass::Ungradable;
    out << csv_field(id) << ",MQ," << (ungradable ? 0 : 1) << ",\n";
    if (!ungradable || p.score) {
      out << csv_field(id) << ",M1,"
          << (p.predicted == PredictedClass::Referable ? 1 : 0) << ',';
      if (p.score) out << *p.score;
      out << '\n';
    }
  }
  return out.str();
}

PredictedClass predicted_class(const ScreeningResult& result) {
  switch (result.disposition) {
    case Disposition::Review12Months:
    case Disposition::Review6Months:
      return PredictedClass::NonReferable;
    case Disposition::ReferSpecialist:
      return PredictedClass::Referable;
    case Disposition::ReferUngradable:
      return PredictedClass::Ungradable;
    case Disposition::Retake:
      break;
  }
  throw Error(ErrorCode::InvalidState,
              "image " + result.image_id + " is awaiting a retake");
}

ImagePrediction image_prediction(const ScreeningResult& result) {
  ImagePrediction p{predicted_class(result), std::nullopt};
  for (const auto& stage : result.trace) {
    if (stage.stage == Stage::Referral) {
      p.score = std::get<ClassifierOutput>(stage.output).score;
    }
  }
  return p;
}

namespace {

enum class Item { NonReferable, Referable, Ungradable };

ReferralCategory combine(std::span<const Item> items, ReferralScheme scheme) {
  if (items.empty()) {
    throw Error(ErrorCode::EmptyInput, "no images to aggregate");
  }
  bool any_gradable = false;
  for (Item it : items) {
    if (it == Item::Referable) return ReferralCategory::Referable;
    if (it == Item::Ungradable && scheme == ReferralScheme::ACR) {
      return ReferralCategory::Referable;
    }
    any_gradable = any_gradable || it != Item::Ungradable;
  }
  return any_gradable ? ReferralCategory::NonReferable
                      : ReferralCategory::Excluded;
}

Item item_of(Grade g) {
  if (g == Grade::R5) {
    throw Error(ErrorCode::UnsupportedGrade,
                "R5 images must be filtered before aggregation");
  }
  if (g == Grade::R6) return Item::Ungradable;
  return referral_category(g, ReferralScheme::RDR) == ReferralCategory::Referable
             ? Item::Referable
             : Item::NonReferable;
}

Item item_of(PredictedClass c) {
  switch (c) {
    case PredictedClass::NonReferable: return Item::NonReferable;
    case PredictedClass::Referable: return Item::Referable;
    case PredictedClass::Ungradable: return Item::Ungradable;
  }
  return Item::Ungradable;
}

}  // namespace

ReferralCategory patient_truth(std::span<const Grade> grades,
                               ReferralScheme scheme) {
  std::vector<Item> items;
  for (Grade g : grades) items.push_back(item_of(g));
  return combine(items, scheme);
}

ReferralCategory patient_prediction(std::span<const PredictedClass> predicted,
                                    ReferralScheme scheme) {
  std::vector<Item> items;
  for (auto c : predicted) items.push_back(item_of(c));
  return combine(items, scheme);
}

ReferralCategory patient_prediction(std::span<const ScreeningResult> results,
                                    ReferralScheme scheme) {
  std::vector<PredictedClass> predicted;
  for (const auto& r : results) predicted.push_back(predicted_class(r));
  return patient_prediction(predicted, scheme);
}

namespace {

// Under RDR an all-ungradable prediction makes no DR referral claim.
ReferralCategory scored_prediction(ReferralCategory c) {
  return c == ReferralCategory::Excluded ? ReferralCategory::NonReferable : c;
}

// Ranking score of one image for ROC analysis under the scheme.
std::optional<double> image_score(const ImagePrediction& p,
                                  ReferralScheme scheme) {
  if (p.predicted == PredictedClass::Ungradable &&
      scheme == ReferralScheme::ACR) {
    return 1.0;
  }
  return p.score;
}

const ImagePrediction& prediction_for(const PredictionSet& predictions,
                                      const std::string& image_id) {
  const auto it = predictions.find(image_id);
  if (it == predictions.end()) {
    throw Error(ErrorCode::MissingPrediction,
                "no prediction for image " + image_id);
  }
  return it->second;
}

}  // namespace

std::vector<LabeledPair> filter_scenario(const Cohort& cohort,
                                         const PredictionSet& predictions,
                                         const ScenarioSpec& scenario) {
  const auto admits_patient = [&](const PatientRecord& p) {
    if (scenario.sex && p.sex != *scenario.sex) return false;
    if (scenario.age && !scenario.age->admits(p.age)) return false;
    return true;
  };
  const auto admits_image = [&](const ImageRecord& img) {
    if (img.consensus.grade == Grade::R5) return false;
    if (scenario.projection && img.projection != *scenario.projection) {
      return false;
    }
    if (scenario.laterality && img.laterality != *scenario.laterality) {
      return false;
    }
    return true;
  };

  std::vector<LabeledPair> pairs;
  for (const auto& patient : cohort.patients()) {
    if (!admits_patient(patient)) continue;
    std::vector<const ImageRecord*> images;
    for (std::size_t idx : cohort.images_of(patient.patient_id)) {
      const auto& img = cohort.images()[idx];
      if (admits_image(img)) images.push_back(&img);
    }
    if (images.empty()) continue;

    if (scenario.unit == EvalUnit::PerImage) {
      for (const auto* img : images) {
        const auto truth = referral_category(img->consensus.grade, scenario.scheme);
        if (truth == ReferralCategory::Excluded) continue;
        const auto& pred = prediction_for(predictions, img->image_id);
        const auto predicted = scored_prediction(
            patient_prediction(std::span(&pred.predicted, 1), scenario.scheme));
        pairs.push_back({img->image_id, truth, predicted,
                         image_score(pred, scenario.scheme), patient.sex,
                         patient.age, img->projection, img->laterality});
      }
      continue;
    }

    std::vector<Grade> grades;
    std::vector<PredictedClass> predicted;
    std::optional<double> score;
    bool all_scored = true;
    std::optional<Projection> projection = images.front()->projection;
    std::optional<Laterality> laterality = images.front()->laterality;
    for (const auto* img : images) {
      grades.push_back(img->consensus.grade);
      const auto& pred = prediction_for(predictions, img->image_id);
      predicted.push_back(pred.predicted);
      if (projection != img->projection) projection.reset();
      if (laterality != img->laterality) laterality.reset();
      // RDR ignores ungradable calls when ranking, as it does when deciding.
      if (scenario.scheme == ReferralScheme::RDR &&
          pred.predicted == PredictedClass::Ungradable) {
        continue;
      }
      if (const auto s = image_score(pred, scenario.scheme)) {
        score = std::max(score.value_or(0.0), *s);
      } else {
        all_scored = false;
      }
    }
    // Only ungradable calls under RDR: ranked lowest, like the decision.
    if (all_scored && !score) score = 0.0;
    const auto truth = patient_truth(grades, scenario.scheme);
    if (truth == ReferralCategory::Excluded) continue;
    pairs.push_back(
        {patient.patient_id, truth,
         scored_prediction(patient_prediction(predicted, scenario.scheme)),
         all_scored ? score : std::nullopt, patient.sex, patient.age,
         projection, laterality});
  }
  return pairs;
}

ConfusionMatrix build_confusion(std::span<const LabeledPair> pairs) {
  ConfusionMatrix cm;
  for (const auto& p : pairs) {
    if (p.truth == ReferralCategory::Excluded ||
        p.prediction == ReferralCategory::Excluded) {
      throw Error(ErrorCode::InvalidState,
                  "unit " + p.unit_id + " still carries an Excluded category");
    }
    const bool truth = p.truth == ReferralCategory::Referable;
    const bool pred = p.prediction == ReferralCategory::Referable;
    if (truth && pred) {
      ++cm.tp;
    } else if (truth) {
      ++cm.fn;
    } else if (pred) {
      ++cm.fp;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

std::string pairs_to_csv(std::span<const LabeledPair> pairs) {
  std::ostringstream out;
  out.precision(17);
  out << "unit_id,truth,prediction,sex,age,projection,laterality,score\n";
  for (const auto& p : pairs) {
    out << csv_field(p.unit_id) << ',' << to_string(p.truth) << ','
        << to_string(p.prediction) << ',' << to_string(p.sex) << ',' << p.age
        << ',' << (p.projection ? to_string(*p.projection) : "") << ','
        << (p.laterality ? to_string(*p.laterality) : "") << ',';
    if (p.score) out << *p.score;
    out << '\n';
  }
  return out.str();
}

std::vector<LabeledPair> parse_pairs_csv(std::string_view text) {
  static constexpr std::array<std::string_view, 7> kColumns = {
      "unit_id", "truth", "prediction", "sex", "age", "projection",
      "laterality"};
  const CsvTable table = parse_csv(text);
  const auto cols = table.require(kColumns);
  const auto score_col = table.column("score");
  std::vector<LabeledPair> pairs;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    try {
      LabeledPair p;
      p.unit_id = row[cols[0]];
      p.truth = parse_category(row[cols[1]]);
      p.prediction = parse_category(row[cols[2]]);
      p.sex = parse_sex(row[cols[3]]);
      p.age = parse_int(row[cols[4]]);
      if (!row[cols[5]].empty()) p.projection = parse_projection(row[cols[5]]);
      if (!row[cols[6]].empty()) p.laterality = parse_laterality(row[cols[6]]);
      if (score_col && !row[*score_col].empty()) {
        p.score = std::stod(row[*score_col]);
      }
      pairs.push_back(std::move(p));
    } catch (const Error& e) {
      throw Error(e.code(),
                  "line " + std::to_string(table.lines[r]) + ": " + e.detail());
    } catch (const std::exception&) {
      throw Error(ErrorCode::ValueError,
                  "line " + std::to_string(table.lines[r]) + ": bad score");
    }
  }
  return pairs;
}

}  // namespace raisdr
