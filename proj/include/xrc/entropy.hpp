#pragma once

#include <cstdint>
#include <vector>

namespace xrc {

/// Lossless entropy stage over raw bytes. Streams are standard zlib
/// (RFC 1950) deflate, so any external deflate implementation can decode
/// them. Empty input yields a valid stream decoding to empty.
std::vector<std::uint8_t> entropy_encode(const std::uint8_t* data, std::size_t size);
std::vector<std::uint8_t> entropy_decode(const std::uint8_t* data, std::size_t size);

inline std::vector<std::uint8_t> entropy_encode(const std::vector<std::uint8_t>& b) {
  return entropy_encode(b.data(), b.size());
}
inline std::vector<std::uint8_t> entropy_decode(const std::vector<std::uint8_t>& b) {
  return entropy_decode(b.data(), b.size());
}

}  // namespace xrc
