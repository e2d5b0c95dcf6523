#include "raisdr/image_io.hpp"

#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "raisdr/error.hpp"

namespace raisdr {
namespace {

std::vector<std::uint8_t> encode_rgb_png(int width, int height,
                                         std::span<const std::uint8_t> rgb) {
  cv::Mat bgr(height, width, CV_8UC3);
  for (int y = 0; y < height; ++y) {
    auto* row = bgr.ptr<std::uint8_t>(y);
    const auto* src = &rgb[static_cast<std::size_t>(y) * width * 3];
    for (int x = 0; x < width; ++x) {
      row[3 * x] = src[3 * x + 2];
      row[3 * x + 1] = src[3 * x + 1];
      row[3 * x + 2] = src[3 * x];
    }
  }
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", bgr, out)) {
    throw Error(ErrorCode::IoError, "PNG encoding failed");
  }
  return out;
}

}  // namespace

RawImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error(ErrorCode::DecodeError, "empty image data");
  cv::Mat bgr;
  try {
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1,
                      const_cast<std::uint8_t*>(bytes.data()));
    bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::DecodeError, e.what());
  }
  if (bgr.empty() || bgr.type() != CV_8UC3) {
    throw Error(ErrorCode::DecodeError, "not a decodable PNG or JPEG image");
  }
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(bgr.rows) *
                                bgr.cols * 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<std::uint8_t>(y);
    auto* dst = &rgb[static_cast<std::size_t>(y) * bgr.cols * 3];
    for (int x = 0; x < bgr.cols; ++x) {
      dst[3 * x] = row[3 * x + 2];
      dst[3 * x + 1] = row[3 * x + 1];
      dst[3 * x + 2] = row[3 * x];
    }
  }
  return RawImage(bgr.cols, bgr.rows, std::move(rgb));
}

RawImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

std::vector<std::uint8_t> encode_png(const RawImage& image) {
  return encode_rgb_png(image.width(), image.height(), image.pixels());
}

std::vector<std::uint8_t> encode_png(const StandardImage& image) {
  return encode_rgb_png(StandardImage::kSide, StandardImage::kSide,
                        image.pixels());
}

void write_standard_image(const std::filesystem::path& path,
                          const StandardImage& image) {
  const auto png = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(png.data()),
            static_cast<std::streamsize>(png.size()));
  std::ofstream sidecar(path.string() + ".provenance");
  sidecar << image.provenance().to_sidecar();
  if (!out || !sidecar) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
}

}  // namespace raisdr
