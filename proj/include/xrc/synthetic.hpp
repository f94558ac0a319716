#pragma once

#include <filesystem>

#include "xrc/corpus.hpp"
#include "xrc/image.hpp"
#include "xrc/rng.hpp"

namespace xrc {

/// One synthetic grayscale image: smooth multi-scale value noise plus a
/// few soft ellipses and line segments, loosely shaped like radiograph
/// content so desk-scale runs never need external data.
ImageU8 synthetic_image(i64 size, Rng& rng);

struct SyntheticSpec {
  i64 count = 8;
  i64 size = 256;
  i64 patients = 4;  // split assignment cycles train, train, val, test
  std::uint64_t seed = 1;
};

/// Writes PGM files plus an index.tsv into dir and returns the loaded
/// index. Patient ids cycle over images; splits are patient-disjoint by
/// construction.
CorpusIndex make_synthetic_corpus(const std::filesystem::path& dir,
                                  const SyntheticSpec& spec);

}  // namespace xrc
