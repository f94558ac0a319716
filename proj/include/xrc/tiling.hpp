#pragma once

#include <vector>

#include "xrc/image.hpp"

namespace xrc {

/// Row-major partition of an image into non-overlapping n x n patches.
/// Every pixel lands in exactly one tile.
struct TileGrid {
  i64 rows = 0;
  i64 cols = 0;
  i64 tile_size = 0;
  std::vector<ImageU8> tiles;  // row-major, rows * cols entries
};

inline TileGrid tile_image(const ImageU8& img, i64 n) {
  if (n < 1) fail("tile_image: tile size must be >= 1, got ", n);
  if (img.height % n != 0 || img.width % n != 0) {
    fail("tile_image: image ", img.height, "x", img.width,
         " not divisible by tile size ", n,
         "; pad to a multiple first (replicate-edge)");
  }
  TileGrid grid;
  grid.rows = img.height / n;
  grid.cols = img.width / n;
  grid.tile_size = n;
  grid.tiles.reserve(static_cast<std::size_t>(grid.rows * grid.cols));
  for (i64 r = 0; r < grid.rows; ++r) {
    for (i64 c = 0; c < grid.cols; ++c) {
      grid.tiles.push_back(crop(img, r * n, c * n, n, n));
    }
  }
  return grid;
}

inline ImageU8 untile(const TileGrid& grid) {
  if (grid.tiles.size() != static_cast<std::size_t>(grid.rows * grid.cols)) {
    fail("untile: grid has ", grid.tiles.size(), " tiles, expected ",
         grid.rows * grid.cols);
  }
  const i64 n = grid.tile_size;
  ImageU8 img;
  img.height = grid.rows * n;
  img.width = grid.cols * n;
  img.pixels.resize(static_cast<std::size_t>(img.height * img.width));
  for (i64 r = 0; r < grid.rows; ++r) {
    for (i64 c = 0; c < grid.cols; ++c) {
      const ImageU8& tile = grid.tiles[static_cast<std::size_t>(r * grid.cols + c)];
      if (tile.height != n || tile.width != n) {
        fail("untile: tile (", r, ", ", c, ") is ", tile.height, "x",
             tile.width, ", expected ", n, "x", n);
      }
      for (i64 y = 0; y < n; ++y) {
        std::copy_n(tile.pixels.begin() + y * n, n,
                    img.pixels.begin() + (r * n + y) * img.width + c * n);
      }
    }
  }
  return img;
}

}  // namespace xrc
