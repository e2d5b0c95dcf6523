#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace raisdr {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
};

/// An 8-bit, 3-channel, row-major (RGBRGB...) image.
class RawImage {
 public:
  static constexpr int kMinSide = 64;

  /// Throws Error(InvalidImage) when either side is below kMinSide or the
  /// buffer does not hold exactly width*height*3 bytes.
  RawImage(int width, int height, std::vector<std::uint8_t> rgb);

  static RawImage filled(int width, int height, Rgb color);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const std::uint8_t> pixels() const noexcept { return rgb_; }

  Rgb at(int x, int y) const noexcept {
    const auto* p = &rgb_[offset(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) noexcept {
    auto* p = &rgb_[offset(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  friend bool operator==(const RawImage&, const RawImage&) = default;

 private:
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> rgb_;
};

/// Half-open pixel box [x0, x1) x [y0, y1).
struct FundusRegion {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  friend bool operator==(const FundusRegion&, const FundusRegion&) = default;
};

struct PreprocessConfig {
  /// Foreground when the brightest channel exceeds this fraction of 255.
  double background_threshold = 10.0 / 255.0;
  /// Bright components smaller than this fraction of the frame are dropped
  /// (glints, burned-in text).
  double min_component_fraction = 0.005;
  /// The surviving foreground must cover at least this fraction.
  double min_fundus_fraction = 0.01;
};

/// How a StandardImage was derived from its source.
struct Provenance {
  std::string source_id;
  FundusRegion region;
  /// Output pixels per source pixel; identical on both axes.
  double scale = 1.0;
  // Black padding, in source pixels, added to square the crop.
  int pad_left = 0;
  int pad_top = 0;
  int pad_right = 0;
  int pad_bottom = 0;

  /// Where the cropped fundus lands in the 512x512 output (rounded).
  FundusRegion content_box() const;

  /// `key=value` lines, one per field.
  std::string to_sidecar() const;
  static Provenance from_sidecar(const std::string& text);

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// The canonical 512x512x3 model input.
class StandardImage {
 public:
  static constexpr int kSide = 512;

  StandardImage(std::vector<std::uint8_t> rgb, Provenance provenance);

  std::span<const std::uint8_t> pixels() const noexcept { return rgb_; }
  const Provenance& provenance() const noexcept { return provenance_; }
  Rgb at(int x, int y) const noexcept {
    const auto* p = &rgb_[(static_cast<std::size_t>(y) * kSide + x) * 3];
    return {p[0], p[1], p[2]};
  }

  /// A copy of the pixels as a RawImage, e.g. to standardize again.
  RawImage to_raw() const;

 private:
  std::vector<std::uint8_t> rgb_;
  Provenance provenance_;
};

/// Tightest box around the bright components that survive the size filter.
/// Throws Error(NoFundusDetected) when nothing (or too little) survives.
FundusRegion detect_fundus_region(const RawImage& image,
                                  const PreprocessConfig& config = {});

/// Crop, pad symmetrically with black to a square, bilinear-resample to 512.
/// Throws Error(InvalidImage) if the region does not lie inside the image.
StandardImage standardize(const RawImage& image, const FundusRegion& region,
                          std::string source_id = {});

/// detect_fundus_region followed by standardize.
StandardImage preprocess(const RawImage& image, const PreprocessConfig& config,
                         std::string source_id = {});

}  // namespace raisdr
