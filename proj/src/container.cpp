#include "xrc/container.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "xrc/checkpoint.hpp"
#include "xrc/entropy.hpp"
#include "xrc/tiling.hpp"
#include "xrc/wire.hpp"

namespace xrc {

namespace {

constexpr char kMagic[4] = {'X', 'R', 'C', '1'};
constexpr std::uint8_t kVersion = 1;

/// Runs fn(i) for i in [0, n) across workers; exceptions are rethrown on
/// the calling thread.
template <typename F>
void parallel_for(i64 n, int workers, F&& fn) {
  if (workers <= 1 || n <= 1) {
    for (i64 i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<i64> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const i64 i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const int count = static_cast<int>(std::min<i64>(workers, n));
  threads.reserve(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

int tile_worker_count(i64 tiles) {
  if (const char* env = std::getenv("XRC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<int>(std::min<i64>(v, tiles));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min<i64>(hw == 0 ? 1 : hw, tiles));
}

std::vector<std::uint8_t> serialize_container(const Container& c) {
  if (c.tiles.size() != static_cast<std::size_t>(c.grid_rows() * c.grid_cols())) {
    fail("container: ", c.tiles.size(), " tiles but grid is ", c.grid_rows(),
         "x", c.grid_cols());
  }
  if (c.tiles.size() > 0xffff) fail("container: too many tiles (", c.tiles.size(), ")");
  ByteWriter w;
  w.raw(reinterpret_cast<const std::uint8_t*>(kMagic), 4);
  w.u8(c.version);
  w.u32(c.height);
  w.u32(c.width);
  w.u16(c.tile_size);
  w.u16(c.beta);
  w.u8(c.quantizer_bits);
  w.u16(static_cast<std::uint16_t>(c.tiles.size()));
  w.raw(c.model_checksum.data(), c.model_checksum.size());
  for (const TileRecord& t : c.tiles) {
    w.f64(t.q_min);
    w.f64(t.q_scale);
    w.u32(static_cast<std::uint32_t>(t.payload.size()));
    w.raw(t.payload.data(), t.payload.size());
  }
  return w.bytes;
}

Container parse_container(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes.data(), bytes.size(), "container");
  const std::uint8_t* magic = r.raw(4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    fail("container: bad magic, not an XRC1 file");
  }
  Container c;
  c.version = r.u8();
  if (c.version != kVersion) {
    fail("container: unsupported version ", static_cast<int>(c.version));
  }
  c.height = r.u32();
  c.width = r.u32();
  c.tile_size = r.u16();
  c.beta = r.u16();
  c.quantizer_bits = r.u8();
  const std::uint16_t tile_count = r.u16();
  const std::uint8_t* digest = r.raw(c.model_checksum.size());
  std::memcpy(c.model_checksum.data(), digest, c.model_checksum.size());
  if (c.height == 0 || c.width == 0 || c.tile_size == 0) {
    fail("container: zero dimension in header (", c.height, "x", c.width,
         ", tile ", c.tile_size, ")");
  }
  if (tile_count != c.grid_rows() * c.grid_cols()) {
    fail("container: header states ", tile_count, " tiles, grid needs ",
         c.grid_rows() * c.grid_cols());
  }
  c.tiles.resize(tile_count);
  for (TileRecord& t : c.tiles) {
    t.q_min = r.f64();
    t.q_scale = r.f64();
    const std::uint32_t len = r.u32();
    const std::uint8_t* payload = r.raw(len);
    t.payload.assign(payload, payload + len);
  }
  r.expect_end();
  return c;
}

Container compress_image(const ImageU8& img, const CodecParams<double>& params,
                         const CodecConfig& cfg,
                         const std::array<std::uint8_t, 32>& model_checksum) {
  cfg.validate();
  if (img.height < 1 || img.width < 1) fail("compress: empty image");
  const i64 n = cfg.patch_size;
  const ImageU8 padded = pad_to_multiple(img, n);
  const TileGrid grid = tile_image(padded, n);

  Container c;
  c.height = static_cast<std::uint32_t>(img.height);
  c.width = static_cast<std::uint32_t>(img.width);
  c.tile_size = static_cast<std::uint16_t>(n);
  c.beta = static_cast<std::uint16_t>(cfg.beta);
  c.quantizer_bits = static_cast<std::uint8_t>(cfg.quantizer_bits);
  c.model_checksum = model_checksum;
  c.tiles.resize(grid.tiles.size());

  parallel_for(static_cast<i64>(grid.tiles.size()),
               tile_worker_count(static_cast<i64>(grid.tiles.size())),
               [&](i64 i) {
                 const auto t = image_to_tensor<double>(grid.tiles[static_cast<std::size_t>(i)]);
                 const Tensor<double> latent = encode(t, params, cfg);
                 const QuantizedLatent q =
                     quantize(latent, static_cast<int>(cfg.quantizer_bits));
                 TileRecord& rec = c.tiles[static_cast<std::size_t>(i)];
                 rec.q_min = q.q_min;
                 rec.q_scale = q.q_scale;
                 rec.payload = entropy_encode(pack_codes(q));
               });
  return c;
}

ImageU8 decompress_image(const Container& c, const CodecParams<double>& params,
                         const CodecConfig& cfg) {
  cfg.validate();
  if (c.tile_size != cfg.patch_size) {
    fail("decompress: container tile size ", c.tile_size,
         " does not match model patch size ", cfg.patch_size);
  }
  if (c.beta != cfg.beta) {
    fail("decompress: container beta ", c.beta, " does not match model beta ",
         cfg.beta);
  }
  if (c.quantizer_bits != cfg.quantizer_bits) {
    fail("decompress: container quantizer bits ", static_cast<int>(c.quantizer_bits),
         " does not match model setting ", cfg.quantizer_bits);
  }
  TileGrid grid;
  grid.rows = c.grid_rows();
  grid.cols = c.grid_cols();
  grid.tile_size = c.tile_size;
  grid.tiles.resize(c.tiles.size());

  const i64 pq = cfg.latent_dim();
  parallel_for(static_cast<i64>(c.tiles.size()),
               tile_worker_count(static_cast<i64>(c.tiles.size())),
               [&](i64 i) {
                 const TileRecord& rec = c.tiles[static_cast<std::size_t>(i)];
                 QuantizedLatent q;
                 q.shape = Shape{1, cfg.beta, pq, pq};
                 q.bits = static_cast<int>(c.quantizer_bits);
                 q.q_min = rec.q_min;
                 q.q_scale = rec.q_scale;
                 unpack_codes(entropy_decode(rec.payload), q);
                 const Tensor<double> latent = dequantize<double>(q);
                 const Tensor<double> out = decode(latent, params, cfg);
                 grid.tiles[static_cast<std::size_t>(i)] = tensor_to_image(out);
               });

  ImageU8 padded = untile(grid);
  if (padded.height == static_cast<i64>(c.height) &&
      padded.width == static_cast<i64>(c.width)) {
    return padded;
  }
  return crop(padded, 0, 0, static_cast<i64>(c.height), static_cast<i64>(c.width));
}

CompressStats compress_file(const std::filesystem::path& input_image,
                            const std::filesystem::path& checkpoint_path,
                            const std::filesystem::path& output_container) {
  const ImageU8 img = read_pgm(input_image);
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const auto digest = sha256_file(checkpoint_path);
  const Container c = compress_image(img, ckpt.params, ckpt.config, digest);
  const std::vector<std::uint8_t> bytes = serialize_container(c);
  write_file_bytes(output_container, bytes);

  CompressStats stats;
  stats.input_bytes = img.height * img.width;
  stats.container_bytes = static_cast<i64>(bytes.size());
  stats.tile_count = static_cast<i64>(c.tiles.size());
  stats.nominal_ratio = compression_ratio(ckpt.config);
  stats.effective_ratio = static_cast<double>(stats.input_bytes) /
                          static_cast<double>(stats.container_bytes);
  return stats;
}

void decompress_file(const std::filesystem::path& input_container,
                     const std::filesystem::path& checkpoint_path,
                     const std::filesystem::path& output_image) {
  const Container c = parse_container(read_file_bytes(input_container));
  const auto digest = sha256_file(checkpoint_path);
  if (digest != c.model_checksum) {
    fail("decompress: model checksum mismatch; ", input_container.string(),
         " was not written with checkpoint ", checkpoint_path.string());
  }
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const ImageU8 img = decompress_image(c, ckpt.params, ckpt.config);
  write_pgm(output_image, img);
}

}  // namespace xrc
