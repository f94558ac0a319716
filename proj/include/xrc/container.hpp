#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "xrc/codec.hpp"
#include "xrc/image.hpp"

namespace xrc {

/// On-disk compressed image. Layout (little endian):
///   magic "XRC1" | version u8 | height u32 | width u32 | tile size u16 |
///   beta u16 | quantizer bits u8 | tile count u16 | model checksum (32
///   bytes, SHA-256 of the checkpoint file) | per tile: q_min f64,
///   q_scale f64, payload length u32, deflate-compressed code bytes.
/// height/width are the original dims; images not divisible by the tile
/// size are padded with replicated edge pixels before tiling, and the
/// decoder crops back.
struct TileRecord {
  double q_min = 0.0;
  double q_scale = 1.0;
  std::vector<std::uint8_t> payload;
};

struct Container {
  std::uint8_t version = 1;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint16_t tile_size = 0;
  std::uint16_t beta = 0;
  std::uint8_t quantizer_bits = 8;
  std::array<std::uint8_t, 32> model_checksum{};
  std::vector<TileRecord> tiles;  // row-major grid order

  i64 grid_rows() const {
    return (static_cast<i64>(height) + tile_size - 1) / tile_size;
  }
  i64 grid_cols() const {
    return (static_cast<i64>(width) + tile_size - 1) / tile_size;
  }
};

std::vector<std::uint8_t> serialize_container(const Container& c);
Container parse_container(const std::vector<std::uint8_t>& bytes);

Container compress_image(const ImageU8& img, const CodecParams<double>& params,
                         const CodecConfig& cfg,
                         const std::array<std::uint8_t, 32>& model_checksum);
ImageU8 decompress_image(const Container& c, const CodecParams<double>& params,
                         const CodecConfig& cfg);

struct CompressStats {
  i64 input_bytes = 0;
  i64 container_bytes = 0;
  i64 tile_count = 0;
  double nominal_ratio = 0.0;
  double effective_ratio = 0.0;
};

CompressStats compress_file(const std::filesystem::path& input_image,
                            const std::filesystem::path& checkpoint_path,
                            const std::filesystem::path& output_container);
void decompress_file(const std::filesystem::path& input_container,
                     const std::filesystem::path& checkpoint_path,
                     const std::filesystem::path& output_image);

/// Worker count for per-tile parallelism: XRC_THREADS when set (>= 1),
/// otherwise the hardware concurrency.
int tile_worker_count(i64 tiles);

}  // namespace xrc
