#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xmodal/data.hpp"
#include "xmodal/image.hpp"
#include "xmodal/rng.hpp"
#include "xmodal/text_encoding.hpp"

namespace xmodal {

inline constexpr int kSynthShapes = 4;
inline constexpr int kSynthColors = 8;
inline constexpr int kSynthSizes = 2;
inline constexpr int kSynthCombinations = kSynthShapes * kSynthColors * kSynthSizes;

struct SynthAttributes {
  int shape = 0;
  int color = 0;
  int size = 0;

  std::string shape_word() const;
  std::string color_word() const;
  std::string size_word() const;
  bool operator==(const SynthAttributes&) const = default;
};

struct SynthOptions {
  int n_groups = 32;
  int images_per_group = 1;
  std::uint64_t seed = 42;
  int image_side = 64;
  int word_dim = 128;
};

// Procedural paired corpus: one shape per image on a plain background,
// five template captions per image naming its size, color and shape.
struct SynthCorpus {
  std::vector<std::string> image_ids;
  std::vector<int> groups;              // per image
  std::vector<RgbImage> images;
  std::vector<SynthAttributes> group_attributes;  // per group
  std::vector<CaptionRecord> captions;  // 5 per image, image order
  WordEmbeddingTable vocabulary;
};

// Throws DataError when n_groups is outside [2, 64] or images_per_group < 1.
SynthCorpus synth_dataset(const SynthOptions& options);

RgbImage render_shape(const SynthAttributes& attrs, int side, Rng& rng);

// Writes images/ (PPM), captions.tsv, vocab.vec and manifest.tsv.
void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir);

// manifest.tsv rows: "image_id<TAB>group<TAB>description".
struct ManifestEntry {
  std::string image_id;
  int group = 0;
};
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

}  // namespace xmodal
