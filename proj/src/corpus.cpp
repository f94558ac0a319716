#include "xrc/corpus.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace xrc {

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  fail("unknown split '", name, "' (expected train, val or test)");
}

CorpusIndex load_corpus_index(const std::filesystem::path& index_path) {
  std::ifstream in(index_path);
  if (!in) fail("corpus: cannot open index ", index_path.string());
  CorpusIndex index;
  index.base_dir = index_path.parent_path();
  std::string line;
  i64 line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    CorpusEntry e;
    std::string split_tag;
    if (!std::getline(ls, e.path, '\t') || !std::getline(ls, e.patient, '\t') ||
        !std::getline(ls, split_tag)) {
      fail("corpus: malformed record at ", index_path.string(), ":", line_no,
           " (expected path<TAB>patient<TAB>split)");
    }
    e.split = parse_split(split_tag);
    index.entries.push_back(std::move(e));
  }
  validate_patient_disjoint(index);
  return index;
}

void save_corpus_index(const std::filesystem::path& index_path,
                       const CorpusIndex& index) {
  std::ofstream out(index_path);
  if (!out) fail("corpus: cannot write index ", index_path.string());
  for (const CorpusEntry& e : index.entries) {
    out << e.path << "\t" << e.patient << "\t" << split_name(e.split) << "\n";
  }
  if (!out) fail("corpus: write failed for ", index_path.string());
}

void validate_patient_disjoint(const CorpusIndex& index) {
  std::map<std::string, Split> assignment;
  for (const CorpusEntry& e : index.entries) {
    auto [it, inserted] = assignment.emplace(e.patient, e.split);
    if (!inserted && it->second != e.split) {
      fail("corpus: patient '", e.patient, "' appears in both ",
           split_name(it->second), " and ", split_name(e.split));
    }
  }
}

CropSampler::CropSampler(const CorpusIndex& index)
    : index_(index),
      cache_(index.entries.size()),
      loaded_(index.entries.size(), false),
      warned_small_(index.entries.size(), false) {}

const ImageU8& CropSampler::load(std::size_t entry_idx) {
  if (!loaded_[entry_idx]) {
    cache_[entry_idx] = read_pgm(index_.resolve(index_.entries[entry_idx]));
    loaded_[entry_idx] = true;
  }
  return cache_[entry_idx];
}

std::vector<std::size_t> CropSampler::usable_entries(Split split, i64 n) {
  std::vector<std::size_t> usable;
  bool any_in_split = false;
  for (std::size_t i = 0; i < index_.entries.size(); ++i) {
    if (index_.entries[i].split != split) continue;
    any_in_split = true;
    const ImageU8& img = load(i);
    if (img.height < n || img.width < n) {
      if (!warned_small_[i]) {
        std::cerr << "warning: skipping " << index_.entries[i].path << " ("
                  << img.height << "x" << img.width << " < crop " << n << ")\n";
        warned_small_[i] = true;
      }
      continue;
    }
    usable.push_back(i);
  }
  if (!any_in_split) {
    fail("sample_crops: split '", split_name(split), "' is empty");
  }
  if (usable.empty()) {
    fail("sample_crops: no image in split '", split_name(split),
         "' is at least ", n, "x", n);
  }
  return usable;
}

bool CropSampler::split_usable(Split split, i64 n) {
  for (std::size_t i = 0; i < index_.entries.size(); ++i) {
    if (index_.entries[i].split != split) continue;
    const ImageU8& img = load(i);
    if (img.height >= n && img.width >= n) return true;
  }
  return false;
}

std::vector<Crop> CropSampler::sample(Split split, i64 n, i64 count, Rng& rng) {
  if (n < 1) fail("sample_crops: crop size must be >= 1, got ", n);
  if (count < 1) fail("sample_crops: count must be >= 1, got ", count);
  const std::vector<std::size_t> usable = usable_entries(split, n);
  std::vector<Crop> crops;
  crops.reserve(static_cast<std::size_t>(count));
  for (i64 k = 0; k < count; ++k) {
    const std::size_t idx = usable[static_cast<std::size_t>(
        rng.uniform_int(static_cast<i64>(usable.size())))];
    const ImageU8& img = load(idx);
    Crop c;
    c.source = index_.entries[idx].path;
    c.y = rng.uniform_int(img.height - n + 1);
    c.x = rng.uniform_int(img.width - n + 1);
    c.patch = crop(img, c.y, c.x, n, n);
    crops.push_back(std::move(c));
  }
  return crops;
}

std::vector<Crop> sample_crops(const CorpusIndex& index, Split split, i64 n,
                               i64 count, std::uint64_t seed) {
  CropSampler sampler(index);
  Rng rng(seed);
  return sampler.sample(split, n, count, rng);
}

Tensor<double> crops_to_batch(const std::vector<Crop>& crops) {
  if (crops.empty()) fail("crops_to_batch: empty batch");
  const i64 n = crops[0].patch.height;
  Tensor<double> batch({static_cast<i64>(crops.size()), 1, n, n});
  for (std::size_t b = 0; b < crops.size(); ++b) {
    const ImageU8& p = crops[b].patch;
    if (p.height != n || p.width != n) {
      fail("crops_to_batch: mixed crop sizes ", p.height, "x", p.width,
           " vs ", n, "x", n);
    }
    double* dst = batch.data() + static_cast<i64>(b) * n * n;
    for (i64 i = 0; i < n * n; ++i) {
      dst[i] = static_cast<double>(p.pixels[static_cast<std::size_t>(i)]) / 255.0;
    }
  }
  return batch;
}

}  // namespace xrc
