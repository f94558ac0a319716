#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "xrc/tensor.hpp"

namespace xrc {

/// 8-bit grayscale image, row-major.
struct ImageU8 {
  i64 height = 0;
  i64 width = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(i64 y, i64 x) const {
    return pixels[static_cast<std::size_t>(y * width + x)];
  }
  std::uint8_t& at(i64 y, i64 x) {
    return pixels[static_cast<std::size_t>(y * width + x)];
  }
};

/// Binary PGM (P5), maxval 255. Comments in the header are accepted.
ImageU8 read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const ImageU8& img);

ImageU8 crop(const ImageU8& img, i64 y, i64 x, i64 h, i64 w);

/// Extends to the next multiple of n in each dim by replicating edge
/// pixels. Returns the input unchanged when already aligned.
ImageU8 pad_to_multiple(const ImageU8& img, i64 n);

/// Pixel values scaled by 1/255 into (1, 1, h, w).
template <typename T>
Tensor<T> image_to_tensor(const ImageU8& img) {
  Tensor<T> t({1, 1, img.height, img.width});
  for (i64 i = 0; i < t.numel(); ++i) {
    t.data()[i] = static_cast<T>(img.pixels[static_cast<std::size_t>(i)]) / T(255);
  }
  return t;
}

/// Rounds [0, 1] values back to 8-bit, clamping out-of-range inputs.
template <typename T>
ImageU8 tensor_to_image(const Tensor<T>& t) {
  if (t.shape().n != 1 || t.shape().c != 1) {
    fail("tensor_to_image: expected shape (1, 1, h, w), got ", t.shape().str());
  }
  ImageU8 img;
  img.height = t.shape().h;
  img.width = t.shape().w;
  img.pixels.resize(static_cast<std::size_t>(t.numel()));
  for (i64 i = 0; i < t.numel(); ++i) {
    double v = static_cast<double>(t.data()[i]) * 255.0;
    v = std::min(255.0, std::max(0.0, v));
    img.pixels[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(std::lround(v));
  }
  return img;
}

}  // namespace xrc
