#pragma once

// Shared helpers for the test binaries: synthetic fundus images, stub
// manifests, and independent reference computations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "raisdr/fairness.hpp"
#include "raisdr/inference.hpp"
#include "raisdr/preprocess.hpp"

namespace testsupport {

/// Black frame with a uniform bright disc.
inline raisdr::RawImage disc_image(int width, int height, double cx, double cy,
                                   double radius,
                                   raisdr::Rgb color = {180, 90, 40}) {
  auto img = raisdr::RawImage::filled(width, height, {0, 0, 0});
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= radius * radius) img.set(x, y, color);
    }
  }
  return img;
}

/// Filled axis-aligned rectangle [x0,x1) x [y0,y1) on black.
inline raisdr::RawImage rect_image(int width, int height, int x0, int y0, int x1,
                                   int y1, raisdr::Rgb color = {200, 120, 60}) {
  auto img = raisdr::RawImage::filled(width, height, {0, 0, 0});
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) img.set(x, y, color);
  }
  return img;
}

/// Bounding box of pixels whose brightest channel exceeds `threshold`, by
/// exhaustive scan. Returns {x0,y0,x1,y1} or all -1 if none.
template <typename Image>
std::array<int, 4> bright_box(const Image& img, int width, int height,
                              int threshold) {
  std::array<int, 4> box{-1, -1, -1, -1};
  bool any = false;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto p = img.at(x, y);
      const int m = std::max({int(p.r), int(p.g), int(p.b)});
      if (m <= threshold) continue;
      if (!any) {
        box = {x, y, x + 1, y + 1};
        any = true;
      }
      box[0] = std::min(box[0], x);
      box[1] = std::min(box[1], y);
      box[2] = std::max(box[2], x + 1);
      box[3] = std::max(box[3], y + 1);
    }
  }
  return box;
}

/// Pairwise concordance: P(score_pos > score_neg) + 0.5 P(tie).
inline double mann_whitney(const std::vector<double>& scores,
                           const std::vector<int>& truths) {
  double concordant = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (truths[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truths[j] != 0) continue;
      pairs += 1;
      if (scores[i] > scores[j]) concordant += 1;
      else if (scores[i] == scores[j]) concordant += 0.5;
    }
  }
  return concordant / pairs;
}

/// Classifier outputs consistent with threshold 0.5.
inline raisdr::ClassifierOutput out(int label) {
  return {label, label ? 0.8 : 0.2};
}

inline raisdr::AnatomyOutput anatomy(bool macula, bool nerve) {
  return {{macula, macula ? 0.9 : 0.1, std::nullopt},
          {nerve, nerve ? 0.85 : 0.15, std::nullopt}};
}

/// Literal count-and-divide fairness figures over a record list.
struct FairnessOracle {
  std::optional<raisdr::Rational> di;
  std::optional<raisdr::Rational> eod_0;
  std::optional<raisdr::Rational> eod_1;
};

inline FairnessOracle fairness_oracle(const std::vector<raisdr::OutcomeRecord>& records,
                                      const std::set<std::string>& unpriv,
                                      const std::set<std::string>& priv) {
  using raisdr::Rational;
  struct Tally {
    std::int64_t n = 0, pos = 0, y1 = 0, y1r1 = 0, y0 = 0, y0r0 = 0;
  };
  Tally u, p;
  for (const auto& rec : records) {
    for (auto* t : {unpriv.count(rec.a) ? &u : nullptr, priv.count(rec.a) ? &p : nullptr}) {
      if (!t) continue;
      t->n += 1;
      t->pos += rec.r == 1;
      if (rec.y == 1) {
        t->y1 += 1;
        t->y1r1 += rec.r == 1;
      } else {
        t->y0 += 1;
        t->y0r0 += rec.r == 0;
      }
    }
  }
  FairnessOracle out;
  if (p.pos > 0) out.di = Rational(u.pos, u.n) / Rational(p.pos, p.n);
  if (u.y1 > 0 && p.y1 > 0) out.eod_1 = Rational(u.y1r1, u.y1) - Rational(p.y1r1, p.y1);
  if (u.y0 > 0 && p.y0 > 0) out.eod_0 = Rational(u.y0r0, u.y0) - Rational(p.y0r0, p.y0);
  return out;
}

/// Random records over attribute values {"a", "b", "c"} of length 1..max_n,
/// with each of "a" and "b" present at least once.
inline std::vector<raisdr::OutcomeRecord> random_records(std::mt19937_64& rng, int max_n) {
  std::uniform_int_distribution<int> len(2, max_n), bit(0, 1), attr(0, 2);
  std::uniform_real_distribution<double> bias(0.05, 0.95);
  const double pr = bias(rng), py = bias(rng);
  std::bernoulli_distribution rb(pr), yb(py);
  static const char* names[] = {"a", "b", "c"};
  std::vector<raisdr::OutcomeRecord> records(len(rng));
  for (auto& rec : records) rec = {rb(rng) ? 1 : 0, yb(rng) ? 1 : 0, names[attr(rng)]};
  records[0].a = "a";
  records[1].a = "b";
  return records;
}

}  // namespace testsupport
