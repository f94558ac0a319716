#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "xrc/codec.hpp"

namespace xrc {

/// Checkpoint file layout (all little endian):
///   magic "XRCW" | version u8 | config (9 x u32: patch_size, beta,
///   front_width, rnn_widths[3], decoder_width, steps, quantizer_bits) |
///   parameters as f32 in CodecParams visit order | crc32 u32 over the
///   config + parameter bytes.
struct Checkpoint {
  CodecConfig config;
  CodecParams<double> params;
};

void save_checkpoint(const std::filesystem::path& path, const CodecConfig& config,
                     const CodecParams<double>& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes);

/// SHA-256 digest; identifies the model a container was written with.
std::array<std::uint8_t, 32> sha256_bytes(const std::uint8_t* data, std::size_t size);
std::array<std::uint8_t, 32> sha256_file(const std::filesystem::path& path);

}  // namespace xrc
