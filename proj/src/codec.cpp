#include "raisdr/codec.hpp"

#include <algorithm>
#include <cctype>

#include <openssl/evp.h>

#include "raisdr/error.hpp"

namespace raisdr {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  std::copy_if(text.begin(), text.end(), std::back_inserter(clean),
               [](unsigned char c) { return !std::isspace(c); });
  if (clean.size() % 4 != 0) {
    throw Error(ErrorCode::DecodeError, "base64 length not a multiple of 4");
  }
  std::vector<std::uint8_t> out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(
      out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
      static_cast<int>(clean.size()));
  if (n < 0) throw Error(ErrorCode::DecodeError, "malformed base64");
  // EVP_DecodeBlock keeps the bytes produced by '=' padding.
  std::size_t padding = 0;
  if (!clean.empty() && clean.back() == '=') ++padding;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

}  // namespace raisdr
