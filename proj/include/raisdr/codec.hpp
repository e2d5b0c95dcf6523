#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace raisdr {

std::string base64_encode(std::span<const std::uint8_t> bytes);

/// Throws Error(DecodeError) on malformed input. Whitespace is ignored.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace raisdr
