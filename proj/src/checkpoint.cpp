#include "xrc/checkpoint.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <fstream>

#include "xrc/wire.hpp"

namespace xrc {

namespace {

constexpr char kMagic[4] = {'X', 'R', 'C', 'W'};
constexpr std::uint8_t kVersion = 1;

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, data, static_cast<uInt>(size)));
}

void write_config(ByteWriter& w, const CodecConfig& c) {
  w.u32(static_cast<std::uint32_t>(c.patch_size));
  w.u32(static_cast<std::uint32_t>(c.beta));
  w.u32(static_cast<std::uint32_t>(c.front_width));
  for (i64 rw : c.rnn_widths) w.u32(static_cast<std::uint32_t>(rw));
  w.u32(static_cast<std::uint32_t>(c.decoder_width));
  w.u32(static_cast<std::uint32_t>(c.steps));
  w.u32(static_cast<std::uint32_t>(c.quantizer_bits));
}

CodecConfig read_config(ByteReader& r) {
  CodecConfig c;
  c.patch_size = r.u32();
  c.beta = r.u32();
  c.front_width = r.u32();
  for (auto& rw : c.rnn_widths) rw = r.u32();
  c.decoder_width = r.u32();
  c.steps = r.u32();
  c.quantizer_bits = r.u32();
  c.validate();
  return c;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail("cannot open ", path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (in.gcount() != size) fail("short read from ", path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write ", path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail("write failed for ", path.string());
}

void save_checkpoint(const std::filesystem::path& path, const CodecConfig& config,
                     const CodecParams<double>& params) {
  config.validate();
  ByteWriter payload;
  write_config(payload, config);
  params.visit([&](const std::string&, const Tensor<double>& t) {
    for (i64 i = 0; i < t.numel(); ++i) {
      payload.f32(static_cast<float>(t.data()[i]));
    }
  });

  ByteWriter out;
  out.raw(reinterpret_cast<const std::uint8_t*>(kMagic), 4);
  out.u8(kVersion);
  out.raw(payload.bytes.data(), payload.bytes.size());
  out.u32(crc32_of(payload.bytes.data(), payload.bytes.size()));
  write_file_bytes(path, out.bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  ByteReader r(bytes.data(), bytes.size(), "checkpoint");
  const std::uint8_t* magic = r.raw(4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    fail("checkpoint: ", path.string(), " has wrong magic");
  }
  const std::uint8_t version = r.u8();
  if (version != kVersion) {
    fail("checkpoint: unsupported version ", static_cast<int>(version));
  }
  if (bytes.size() < 4 + 1 + 4) fail("checkpoint: ", path.string(), " truncated");
  const std::size_t payload_size = bytes.size() - 4 - 1 - 4;
  const std::uint32_t want_crc = crc32_of(bytes.data() + 5, payload_size);

  Checkpoint ckpt;
  ckpt.config = read_config(r);
  // Parameter layout is fully determined by the config; the seed is
  // irrelevant because every value is overwritten.
  ckpt.params = build_model<double>(ckpt.config, 0);
  ckpt.params.visit([&](const std::string&, Tensor<double>& t) {
    for (i64 i = 0; i < t.numel(); ++i) {
      t.data()[i] = static_cast<double>(r.f32());
    }
  });
  const std::uint32_t stored_crc = r.u32();
  r.expect_end();
  if (stored_crc != want_crc) {
    fail("checkpoint: ", path.string(), " checksum mismatch (stored ",
         stored_crc, ", computed ", want_crc, ")");
  }
  return ckpt;
}

std::array<std::uint8_t, 32> sha256_bytes(const std::uint8_t* data,
                                          std::size_t size) {
  std::array<std::uint8_t, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != digest.size()) {
    fail("sha256: digest computation failed");
  }
  return digest;
}

std::array<std::uint8_t, 32> sha256_file(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  return sha256_bytes(bytes.data(), bytes.size());
}

}  // namespace xrc
