#include "xrc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace xrc {

namespace {

// Bilinearly upsampled random grid, values in [0, 1].
std::vector<double> value_noise(i64 size, i64 cells, Rng& rng) {
  const i64 g = cells + 1;
  std::vector<double> grid(static_cast<std::size_t>(g * g));
  for (double& v : grid) v = rng.uniform();
  std::vector<double> out(static_cast<std::size_t>(size * size));
  const double step = static_cast<double>(cells) / static_cast<double>(size);
  for (i64 y = 0; y < size; ++y) {
    const double fy = y * step;
    const i64 y0 = std::min<i64>(static_cast<i64>(fy), cells - 1);
    const double ty = fy - static_cast<double>(y0);
    for (i64 x = 0; x < size; ++x) {
      const double fx = x * step;
      const i64 x0 = std::min<i64>(static_cast<i64>(fx), cells - 1);
      const double tx = fx - static_cast<double>(x0);
      const double a = grid[static_cast<std::size_t>(y0 * g + x0)];
      const double b = grid[static_cast<std::size_t>(y0 * g + x0 + 1)];
      const double c = grid[static_cast<std::size_t>((y0 + 1) * g + x0)];
      const double d = grid[static_cast<std::size_t>((y0 + 1) * g + x0 + 1)];
      out[static_cast<std::size_t>(y * size + x)] =
          (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
    }
  }
  return out;
}

double smoothstep(double lo, double hi, double v) {
  const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

ImageU8 synthetic_image(i64 size, Rng& rng) {
  if (size < 4) fail("synthetic_image: size must be >= 4, got ", size);
  std::vector<double> acc(static_cast<std::size_t>(size * size), 0.45);

  double amp = 0.22;
  for (i64 cells : {4, 8, 16}) {
    if (cells >= size) break;
    const std::vector<double> noise = value_noise(size, cells, rng);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      acc[i] += amp * (noise[i] - 0.5);
    }
    amp *= 0.5;
  }

  const i64 n_ellipses = 2 + rng.uniform_int(3);
  for (i64 e = 0; e < n_ellipses; ++e) {
    const double cy = rng.uniform(0.15, 0.85) * size;
    const double cx = rng.uniform(0.15, 0.85) * size;
    const double ra = rng.uniform(0.08, 0.3) * size;
    const double rb = rng.uniform(0.08, 0.3) * size;
    const double theta = rng.uniform(0.0, 3.14159265358979323846);
    const double gain = rng.uniform(0.12, 0.3) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (i64 y = 0; y < size; ++y) {
      for (i64 x = 0; x < size; ++x) {
        const double dy = static_cast<double>(y) - cy;
        const double dx = static_cast<double>(x) - cx;
        const double u = (dx * ct + dy * st) / ra;
        const double v = (-dx * st + dy * ct) / rb;
        const double q = u * u + v * v;
        if (q < 1.44) {
          acc[static_cast<std::size_t>(y * size + x)] +=
              gain * smoothstep(1.2, 0.8, q);
        }
      }
    }
  }

  const i64 n_lines = 1 + rng.uniform_int(3);
  for (i64 l = 0; l < n_lines; ++l) {
    const double y0 = rng.uniform() * size, x0 = rng.uniform() * size;
    const double y1 = rng.uniform() * size, x1 = rng.uniform() * size;
    const double thick = rng.uniform(1.0, 2.5);
    const double gain = rng.uniform(0.1, 0.22) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const double vy = y1 - y0, vx = x1 - x0;
    const double len2 = std::max(vy * vy + vx * vx, 1e-9);
    for (i64 y = 0; y < size; ++y) {
      for (i64 x = 0; x < size; ++x) {
        const double t = std::clamp(
            ((y - y0) * vy + (x - x0) * vx) / len2, 0.0, 1.0);
        const double dy = y - (y0 + t * vy);
        const double dx = x - (x0 + t * vx);
        const double dist = std::sqrt(dy * dy + dx * dx);
        if (dist < thick + 1.0) {
          acc[static_cast<std::size_t>(y * size + x)] +=
              gain * smoothstep(thick + 1.0, thick - 0.5, dist);
        }
      }
    }
  }

  ImageU8 img;
  img.height = size;
  img.width = size;
  img.pixels.resize(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double v = std::clamp(acc[i], 0.0, 1.0) * 255.0;
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(v));
  }
  return img;
}

CorpusIndex make_synthetic_corpus(const std::filesystem::path& dir,
                                  const SyntheticSpec& spec) {
  if (spec.count < 1) fail("synthetic corpus: count must be >= 1");
  if (spec.patients < 1) fail("synthetic corpus: patients must be >= 1");
  std::filesystem::create_directories(dir);
  Rng rng(spec.seed);

  CorpusIndex index;
  index.base_dir = dir;
  for (i64 i = 0; i < spec.count; ++i) {
    const i64 patient = i % spec.patients;
    Rng img_rng = rng.fork(static_cast<std::uint64_t>(i));
    const ImageU8 img = synthetic_image(spec.size, img_rng);
    CorpusEntry e;
    e.path = concat("img_", i, ".pgm");
    e.patient = concat("p", patient);
    switch (patient % 4) {
      case 0:
      case 1: e.split = Split::train; break;
      case 2: e.split = Split::val; break;
      default: e.split = Split::test; break;
    }
    write_pgm(dir / e.path, img);
    index.entries.push_back(std::move(e));
  }
  save_corpus_index(dir / "index.tsv", index);
  return index;
}

}  // namespace xrc
