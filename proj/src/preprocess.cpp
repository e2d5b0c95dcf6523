#include "raisdr/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "raisdr/error.hpp"

namespace raisdr {

RawImage::RawImage(int width, int height, std::vector<std::uint8_t> rgb)
    : width_(width), height_(height), rgb_(std::move(rgb)) {
  if (width < kMinSide || height < kMinSide) {
    throw Error(ErrorCode::InvalidImage,
                "image is " + std::to_string(width) + "x" +
                    std::to_string(height) + ", minimum side is " +
                    std::to_string(kMinSide));
  }
  if (rgb_.size() != static_cast<std::size_t>(width) * height * 3) {
    throw Error(ErrorCode::InvalidImage, "pixel buffer size mismatch");
  }
}

RawImage RawImage::filled(int width, int height, Rgb color) {
  std::vector<std::uint8_t> rgb(
      static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) * 3);
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    rgb[i] = color.r;
    rgb[i + 1] = color.g;
    rgb[i + 2] = color.b;
  }
  return RawImage(width, height, std::move(rgb));
}

FundusRegion Provenance::content_box() const {
  const auto at = [this](int source_px) {
    return static_cast<int>(std::lround(source_px * scale));
  };
  return {at(pad_left), at(pad_top), at(pad_left + region.width()),
          at(pad_top + region.height())};
}

std::string Provenance::to_sidecar() const {
  std::ostringstream out;
  out.precision(17);
  out << "source_id=" << source_id << '\n'
      << "region=" << region.x0 << ',' << region.y0 << ',' << region.x1 << ','
      << region.y1 << '\n'
      << "scale=" << scale << '\n'
      << "pad=" << pad_left << ',' << pad_top << ',' << pad_right << ','
      << pad_bottom << '\n';
  return out.str();
}

Provenance Provenance::from_sidecar(const std::string& text) {
  std::map<std::string, std::string> fields;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    fields[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto quad = [&](const std::string& key) {
    std::array<int, 4> v{};
    char sep = 0;
    std::istringstream s(fields.at(key));
    if (!(s >> v[0] >> sep >> v[1] >> sep >> v[2] >> sep >> v[3])) {
      throw Error(ErrorCode::ParseError, "bad sidecar field " + key);
    }
    return v;
  };
  try {
    Provenance p;
    p.source_id = fields.at("source_id");
    const auto r = quad("region");
    p.region = {r[0], r[1], r[2], r[3]};
    p.scale = std::stod(fields.at("scale"));
    const auto pad = quad("pad");
    p.pad_left = pad[0];
    p.pad_top = pad[1];
    p.pad_right = pad[2];
    p.pad_bottom = pad[3];
    return p;
  } catch (const std::out_of_range&) {
    throw Error(ErrorCode::ParseError, "incomplete provenance sidecar");
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::ParseError, "malformed provenance sidecar");
  }
}

StandardImage::StandardImage(std::vector<std::uint8_t> rgb,
                             Provenance provenance)
    : rgb_(std::move(rgb)), provenance_(std::move(provenance)) {
  if (rgb_.size() != static_cast<std::size_t>(kSide) * kSide * 3) {
    throw Error(ErrorCode::InvalidImage, "standard image must be 512x512x3");
  }
}

RawImage StandardImage::to_raw() const { return RawImage(kSide, kSide, rgb_); }

namespace {

struct Component {
  std::size_t area = 0;
  int x0 = std::numeric_limits<int>::max();
  int y0 = std::numeric_limits<int>::max();
  int x1 = -1;
  int y1 = -1;
};

// 8-connected components of the foreground mask, by breadth-first flood.
std::vector<Component> bright_components(const RawImage& image, int cutoff) {
  const int w = image.width();
  const int h = image.height();
  const auto px = image.pixels();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const int v = std::max({px[3 * i], px[3 * i + 1], px[3 * i + 2]});
    mask[i] = v > cutoff ? 1 : 0;
  }

  std::vector<Component> components;
  std::vector<int> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t seed = static_cast<std::size_t>(y) * w + x;
      if (mask[seed] != 1) continue;
      Component c;
      mask[seed] = 2;
      queue.assign(1, static_cast<int>(seed));
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const int idx = queue[head];
        const int cx = idx % w;
        const int cy = idx / w;
        ++c.area;
        c.x0 = std::min(c.x0, cx);
        c.x1 = std::max(c.x1, cx);
        c.y0 = std::min(c.y0, cy);
        c.y1 = std::max(c.y1, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          const int ny = cy + dy;
          if (ny < 0 || ny >= h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx;
            if (nx < 0 || nx >= w) continue;
            const std::size_t n = static_cast<std::size_t>(ny) * w + nx;
            if (mask[n] == 1) {
              mask[n] = 2;
              queue.push_back(static_cast<int>(n));
            }
          }
        }
      }
      components.push_back(c);
    }
  }
  return components;
}

}  // namespace

FundusRegion detect_fundus_region(const RawImage& image,
                                  const PreprocessConfig& config) {
  const double total =
      static_cast<double>(image.width()) * static_cast<double>(image.height());
  const int cutoff =
      static_cast<int>(std::floor(config.background_threshold * 255.0 + 1e-9));

  FundusRegion box{std::numeric_limits<int>::max(),
                   std::numeric_limits<int>::max(), -1, -1};
  std::size_t kept = 0;
  for (const auto& c : bright_components(image, cutoff)) {
    if (static_cast<double>(c.area) < config.min_component_fraction * total) {
      continue;
    }
    kept += c.area;
    box.x0 = std::min(box.x0, c.x0);
    box.y0 = std::min(box.y0, c.y0);
    box.x1 = std::max(box.x1, c.x1 + 1);
    box.y1 = std::max(box.y1, c.y1 + 1);
  }
  if (kept == 0) {
    throw Error(ErrorCode::NoFundusDetected, "no foreground above threshold");
  }
  if (static_cast<double>(kept) < config.min_fundus_fraction * total) {
    throw Error(ErrorCode::NoFundusDetected,
                "foreground covers less than " +
                    std::to_string(config.min_fundus_fraction * 100) +
                    "% of the frame");
  }
  return box;
}

namespace {

// Source taps for one output axis, in crop coordinates. An output pixel
// whose centre falls in the padding is black (lo < 0); content pixels
// interpolate only between crop pixels, so the edge never bleeds outward.
struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> axis_taps(int side, int pad, int extent) {
  constexpr int kOut = StandardImage::kSide;
  std::vector<Tap> taps(kOut);
  const double ratio = static_cast<double>(side) / kOut;
  for (int o = 0; o < kOut; ++o) {
    const double centre = (o + 0.5) * ratio - pad;
    if (centre < 0.0 || centre >= extent) {
      taps[o] = {-1, -1, 0.0};
      continue;
    }
    const double s = std::clamp(centre - 0.5, 0.0, static_cast<double>(extent - 1));
    const int lo = static_cast<int>(std::floor(s));
    taps[o] = {lo, std::min(lo + 1, extent - 1), s - lo};
  }
  return taps;
}

}  // namespace

StandardImage standardize(const RawImage& image, const FundusRegion& region,
                          std::string source_id) {
  if (region.x0 < 0 || region.y0 < 0 || region.x0 >= region.x1 ||
      region.y0 >= region.y1 || region.x1 > image.width() ||
      region.y1 > image.height()) {
    throw Error(ErrorCode::InvalidImage, "fundus region outside image");
  }
  constexpr int kOut = StandardImage::kSide;
  const int w = region.width();
  const int h = region.height();
  const int side = std::max(w, h);

  Provenance prov;
  prov.source_id = std::move(source_id);
  prov.region = region;
  prov.scale = static_cast<double>(kOut) / side;
  prov.pad_left = (side - w) / 2;
  prov.pad_right = side - w - prov.pad_left;
  prov.pad_top = (side - h) / 2;
  prov.pad_bottom = side - h - prov.pad_top;

  std::vector<std::uint8_t> out(static_cast<std::size_t>(kOut) * kOut * 3, 0);

  if (side == kOut) {
    // Unit scale: a plain copy into the padded frame.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const Rgb c = image.at(region.x0 + x, region.y0 + y);
        auto* p = &out[(static_cast<std::size_t>(y + prov.pad_top) * kOut +
                        x + prov.pad_left) * 3];
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
      }
    }
    return StandardImage(std::move(out), std::move(prov));
  }

  const auto xtaps = axis_taps(side, prov.pad_left, w);
  const auto ytaps = axis_taps(side, prov.pad_top, h);
  const auto src = image.pixels();
  const long stride = static_cast<long>(image.width()) * 3;
  std::vector<long> col_lo(kOut), col_hi(kOut);
  for (int o = 0; o < kOut; ++o) {
    col_lo[o] = static_cast<long>(region.x0 + xtaps[o].lo) * 3;
    col_hi[o] = static_cast<long>(region.x0 + xtaps[o].hi) * 3;
  }

  for (int oy = 0; oy < kOut; ++oy) {
    const Tap& ty = ytaps[oy];
    if (ty.lo < 0) continue;
    const long r0 = (region.y0 + ty.lo) * stride;
    const long r1 = (region.y0 + ty.hi) * stride;
    for (int ox = 0; ox < kOut; ++ox) {
      const Tap& tx = xtaps[ox];
      if (tx.lo < 0) continue;
      const long c0 = col_lo[ox];
      const long c1 = col_hi[ox];
      for (int ch = 0; ch < 3; ++ch) {
        const double top =
            src[r0 + c0 + ch] * (1.0 - tx.frac) + src[r0 + c1 + ch] * tx.frac;
        const double bottom =
            src[r1 + c0 + ch] * (1.0 - tx.frac) + src[r1 + c1 + ch] * tx.frac;
        const double v = top * (1.0 - ty.frac) + bottom * ty.frac;
        out[(static_cast<std::size_t>(oy) * kOut + ox) * 3 + ch] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return StandardImage(std::move(out), std::move(prov));
}

StandardImage preprocess(const RawImage& image, const PreprocessConfig& config,
                         std::string source_id) {
  return standardize(image, detect_fundus_region(image, config),
                     std::move(source_id));
}

}  // namespace raisdr
