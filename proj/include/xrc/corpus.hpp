#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "xrc/image.hpp"
#include "xrc/rng.hpp"
#include "xrc/tensor.hpp"

namespace xrc {

enum class Split { train, val, test };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct CorpusEntry {
  std::string path;  // relative to the index file directory
  std::string patient;
  Split split = Split::train;
};

/// Index file: one record per line, tab separated:
///   relative-image-path <TAB> patient-id <TAB> split
/// Patient ids must not appear in more than one split.
struct CorpusIndex {
  std::filesystem::path base_dir;
  std::vector<CorpusEntry> entries;

  std::filesystem::path resolve(const CorpusEntry& e) const {
    return base_dir / e.path;
  }
};

CorpusIndex load_corpus_index(const std::filesystem::path& index_path);
void save_corpus_index(const std::filesystem::path& index_path,
                       const CorpusIndex& index);

/// Fails when a patient id is assigned to two splits.
void validate_patient_disjoint(const CorpusIndex& index);

struct Crop {
  std::string source;
  i64 y = 0;
  i64 x = 0;
  ImageU8 patch;
};

/// Uniformly random n x n crops from images of one split. Images smaller
/// than the crop are skipped with a one-time warning on stderr. Caches
/// decoded images across calls.
class CropSampler {
 public:
  explicit CropSampler(const CorpusIndex& index);

  std::vector<Crop> sample(Split split, i64 n, i64 count, Rng& rng);
  bool split_usable(Split split, i64 n);

 private:
  const ImageU8& load(std::size_t entry_idx);
  std::vector<std::size_t> usable_entries(Split split, i64 n);

  const CorpusIndex& index_;
  std::vector<ImageU8> cache_;
  std::vector<bool> loaded_;
  std::vector<bool> warned_small_;
};

/// One-shot convenience over a fresh sampler, deterministic per seed.
std::vector<Crop> sample_crops(const CorpusIndex& index, Split split, i64 n,
                               i64 count, std::uint64_t seed);

/// Stacks n x n crops into a (count, 1, n, n) batch scaled to [0, 1].
Tensor<double> crops_to_batch(const std::vector<Crop>& crops);

}  // namespace xrc
