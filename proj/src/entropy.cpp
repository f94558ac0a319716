#include "xrc/entropy.hpp"

#include <zlib.h>

#include "xrc/tensor.hpp"

namespace xrc {

std::vector<std::uint8_t> entropy_encode(const std::uint8_t* data,
                                         std::size_t size) {
  uLongf bound = compressBound(static_cast<uLong>(size));
  std::vector<std::uint8_t> out(bound);
  const int rc = compress2(out.data(), &bound, data,
                           static_cast<uLong>(size), Z_BEST_COMPRESSION);
  if (rc != Z_OK) fail("entropy_encode: zlib error ", rc);
  out.resize(bound);
  return out;
}

std::vector<std::uint8_t> entropy_decode(const std::uint8_t* data,
                                         std::size_t size) {
  z_stream strm{};
  if (inflateInit(&strm) != Z_OK) fail("entropy_decode: inflateInit failed");

  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 15];
  strm.next_in = const_cast<Bytef*>(data);
  strm.avail_in = static_cast<uInt>(size);

  int rc = Z_OK;
  do {
    strm.next_out = chunk;
    strm.avail_out = sizeof(chunk);
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END && rc != Z_BUF_ERROR) {
      const auto offset = strm.total_in;
      inflateEnd(&strm);
      fail("entropy_decode: corrupt stream at byte offset ", offset,
           " (zlib error ", rc, ")");
    }
    out.insert(out.end(), chunk, chunk + (sizeof(chunk) - strm.avail_out));
    if (rc == Z_BUF_ERROR && strm.avail_in == 0) {
      const auto offset = strm.total_in;
      inflateEnd(&strm);
      fail("entropy_decode: truncated stream at byte offset ", offset);
    }
  } while (rc != Z_STREAM_END);

  const bool trailing = strm.avail_in != 0;
  const auto offset = strm.total_in;
  inflateEnd(&strm);
  if (trailing) {
    fail("entropy_decode: trailing garbage after stream end at byte offset ",
         offset);
  }
  return out;
}

}  // namespace xrc
