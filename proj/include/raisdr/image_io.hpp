#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "raisdr/preprocess.hpp"

namespace raisdr {

/// Decodes PNG or JPEG bytes. Throws Error(DecodeError) on corrupt input.
RawImage decode_image(std::span<const std::uint8_t> bytes);
RawImage read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const RawImage& image);
std::vector<std::uint8_t> encode_png(const StandardImage& image);

/// Writes `path` as PNG and `path` + ".provenance" as the sidecar record.
void write_standard_image(const std::filesystem::path& path,
                          const StandardImage& image);

}  // namespace raisdr
