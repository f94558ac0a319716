#include "xrc/image.hpp"

#include <cctype>
#include <fstream>

namespace xrc {

namespace {

// Reads one whitespace-delimited token, skipping '#' comments to end of
// line. Consumes the single whitespace byte that terminates the token, as
// the PGM header requires before pixel data.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (!std::isspace(ch)) break;
  }
  if (ch == EOF) fail("pgm: truncated header in ", path.string());
  std::string tok;
  while (ch != EOF && !std::isspace(ch)) {
    tok.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  return tok;
}

i64 parse_dim(const std::string& tok, const char* what,
              const std::filesystem::path& path) {
  i64 v = 0;
  for (char c : tok) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      fail("pgm: bad ", what, " '", tok, "' in ", path.string());
    }
    v = v * 10 + (c - '0');
    if (v > (i64{1} << 30)) fail("pgm: ", what, " out of range in ", path.string());
  }
  return v;
}

}  // namespace

ImageU8 read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("pgm: cannot open ", path.string());
  std::string magic = next_token(in, path);
  if (magic != "P5") {
    fail("pgm: ", path.string(), " is not binary PGM (magic '", magic, "')");
  }
  ImageU8 img;
  img.width = parse_dim(next_token(in, path), "width", path);
  img.height = parse_dim(next_token(in, path), "height", path);
  const i64 maxval = parse_dim(next_token(in, path), "maxval", path);
  if (img.width < 1 || img.height < 1) {
    fail("pgm: non-positive dimensions in ", path.string());
  }
  if (maxval != 255) {
    fail("pgm: only maxval 255 supported, ", path.string(), " has ", maxval);
  }
  img.pixels.resize(static_cast<std::size_t>(img.width * img.height));
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    fail("pgm: truncated pixel data in ", path.string(), " (got ", in.gcount(),
         " of ", img.pixels.size(), " bytes)");
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const ImageU8& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("pgm: cannot write ", path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) fail("pgm: write failed for ", path.string());
}

ImageU8 crop(const ImageU8& img, i64 y, i64 x, i64 h, i64 w) {
  if (y < 0 || x < 0 || y + h > img.height || x + w > img.width) {
    fail("crop: window ", h, "x", w, " at (", y, ", ", x,
         ") exceeds image ", img.height, "x", img.width);
  }
  ImageU8 out;
  out.height = h;
  out.width = w;
  out.pixels.resize(static_cast<std::size_t>(h * w));
  for (i64 r = 0; r < h; ++r) {
    std::copy_n(img.pixels.begin() + (y + r) * img.width + x, w,
                out.pixels.begin() + r * w);
  }
  return out;
}

ImageU8 pad_to_multiple(const ImageU8& img, i64 n) {
  if (n < 1) fail("pad_to_multiple: n must be >= 1, got ", n);
  const i64 h = (img.height + n - 1) / n * n;
  const i64 w = (img.width + n - 1) / n * n;
  if (h == img.height && w == img.width) return img;
  ImageU8 out;
  out.height = h;
  out.width = w;
  out.pixels.resize(static_cast<std::size_t>(h * w));
  for (i64 y = 0; y < h; ++y) {
    const i64 sy = std::min(y, img.height - 1);
    for (i64 x = 0; x < w; ++x) {
      out.at(y, x) = img.at(sy, std::min(x, img.width - 1));
    }
  }
  return out;
}

}  // namespace xrc
