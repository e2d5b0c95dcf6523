#include "raisdr/simulate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "raisdr/error.hpp"

namespace raisdr {

namespace {

double parse_number(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error(ErrorCode::InvalidParams,
                "bad number '" + std::string(text) + "'");
  }
  return v;
}

double parse_rate(std::string_view text) {
  double v = 0.0;
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const double den = parse_number(text.substr(slash + 1));
    if (den <= 0.0) throw Error(ErrorCode::InvalidParams, "zero denominator");
    v = parse_number(text.substr(0, slash)) / den;
  } else {
    v = parse_number(text);
  }
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(ErrorCode::InvalidParams,
                "flip rate '" + std::string(text) + "' outside [0, 1]");
  }
  return v;
}

// Picks exactly round(rate * n) items in a seed-determined order.
std::vector<std::string> choose(std::vector<std::string> ids, double rate,
                                boost::random::mt19937_64& rng) {
  const auto k = static_cast<std::size_t>(
      std::llround(rate * static_cast<double>(ids.size())));
  for (std::size_t i = ids.size(); i > 1; --i) {
    boost::random::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(ids[i - 1], ids[pick(rng)]);
  }
  ids.resize(std::min(k, ids.size()));
  std::sort(ids.begin(), ids.end());
  return ids;
}

ImagePrediction scored(PredictedClass c, boost::random::mt19937_64& rng) {
  boost::random::uniform_01<double> u;
  switch (c) {
    case PredictedClass::Referable: return {c, 0.5 + 0.5 * u(rng)};
    case PredictedClass::NonReferable: return {c, 0.499 * u(rng)};
    case PredictedClass::Ungradable: return {c, std::nullopt};
  }
  return {c, std::nullopt};
}

}  // namespace

FlipRates FlipRates::parse(std::string_view text) {
  FlipRates r;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = std::min(text.find(',', pos), text.size());
    const auto item = text.substr(pos, end - pos);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidParams,
                  "flip rate '" + std::string(item) + "' is not KIND=RATE");
    }
    const auto key = item.substr(0, eq);
    const double v = parse_rate(item.substr(eq + 1));
    if (key == "FN") r.fn = v;
    else if (key == "FP") r.fp = v;
    else if (key == "UG") r.ungradable = v;
    else throw Error(ErrorCode::InvalidParams,
                     "unknown flip kind '" + std::string(key) + "' (FN, FP, UG)");
    pos = end + 1;
  }
  return r;
}

PredictionSet oracle_predictions(const Cohort& cohort, std::uint64_t seed) {
  boost::random::mt19937_64 rng(seed);
  PredictionSet out;
  for (const auto& img : cohort.images()) {
    const Grade g = img.consensus.grade;
    PredictedClass c = PredictedClass::NonReferable;
    if (g == Grade::R6) c = PredictedClass::Ungradable;
    else if (g == Grade::R3 || g == Grade::R4) c = PredictedClass::Referable;
    out[img.image_id] = scored(c, rng);
  }
  return out;
}

SimulationResult simulate_predictions(const Cohort& cohort,
                                      const FlipRates& rates,
                                      std::uint64_t seed) {
  SimulationResult r;
  r.predictions = oracle_predictions(cohort, seed);
  boost::random::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<std::string> referable;
  std::vector<std::string> negative;
  std::vector<std::string> ungradable;
  for (const auto& p : cohort.patients()) {
    bool any_referable = false;
    bool any_gradable = false;
    for (std::size_t i : cohort.images_of(p.patient_id)) {
      const Grade g = cohort.images()[i].consensus.grade;
      any_referable |= g == Grade::R3 || g == Grade::R4;
      any_gradable |= is_gradable(g);
    }
    if (any_referable) referable.push_back(p.patient_id);
    else if (any_gradable) negative.push_back(p.patient_id);
    else ungradable.push_back(p.patient_id);
  }

  r.flipped_fn = choose(referable, rates.fn, rng);
  r.flipped_fp = choose(negative, rates.fp, rng);
  r.flipped_ungradable = choose(ungradable, rates.ungradable, rng);

  for (const auto& pid : r.flipped_fn) {
    for (std::size_t i : cohort.images_of(pid)) {
      auto& pred = r.predictions[cohort.images()[i].image_id];
      if (pred.predicted == PredictedClass::Referable) {
        pred = scored(PredictedClass::NonReferable, rng);
      }
    }
  }
  for (const auto& pid : r.flipped_fp) {
    for (std::size_t i : cohort.images_of(pid)) {
      const auto& img = cohort.images()[i];
      if (img.laterality == Laterality::Left && img.projection == Projection::A &&
          is_gradable(img.consensus.grade)) {
        r.predictions[img.image_id] = scored(PredictedClass::Referable, rng);
      }
    }
  }
  for (const auto& pid : r.flipped_ungradable) {
    for (std::size_t i : cohort.images_of(pid)) {
      r.predictions[cohort.images()[i].image_id] =
          scored(PredictedClass::NonReferable, rng);
    }
  }
  return r;
}

}  // namespace raisdr
