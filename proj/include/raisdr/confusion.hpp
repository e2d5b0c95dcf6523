#pragma once

#include <cstdint>

namespace raisdr {

/// Binary confusion counts with Referable as the positive class.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  std::uint64_t positives() const noexcept { return tp + fn; }
  std::uint64_t negatives() const noexcept { return tn + fp; }

  /// Exchanges the roles of the two classes.
  ConfusionMatrix swapped() const noexcept { return {tn, tp, fn, fp}; }

  friend bool operator==(const ConfusionMatrix&,
                         const ConfusionMatrix&) = default;
};

}  // namespace raisdr
