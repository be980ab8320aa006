#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/image.hpp"
#include "xmodal/tensor.hpp"

namespace xmodal {

inline constexpr int kCaptionsPerImage = 5;

struct CaptionRecord {
  std::string image_id;
  int caption_index = 0;  // [0, 5)
  std::string text;

  bool operator==(const CaptionRecord&) const = default;
};

// "image_name#k<TAB>caption" per line. Errors name the offending line.
std::vector<CaptionRecord> parse_captions(std::string_view text);
std::vector<CaptionRecord> load_captions(const std::filesystem::path& path);
std::string format_captions(std::span<const CaptionRecord> records);

// Distinct image ids in order of first appearance.
std::vector<std::string> distinct_images(std::span<const CaptionRecord> records);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// Seeded uniform choice of test_count images for test; the rest train.
// Both lists keep first-appearance order.
DatasetSplit split(std::span<const CaptionRecord> records, std::size_t test_count, std::uint64_t seed);

// Holds out one seeded-chosen image from every group that has at least two,
// so each test image's group is also represented in training.
DatasetSplit split_per_group(std::span<const std::string> image_ids, std::span<const int> groups,
                             std::uint64_t seed);

enum class AugmentationMode { standard, config2 };

AugmentationMode parse_augmentation_mode(std::string_view name);
std::string_view to_string(AugmentationMode mode);

struct AugmentationConfig {
  AugmentationMode mode = AugmentationMode::standard;
  int crop_side = 57;
  int input_side = 64;  // every instance is resized to this side

  bool hflip() const { return mode == AugmentationMode::config2; }
};

struct TrainingInstance {
  RgbImage input;  // input_side x input_side
  int class_id = 0;
  Modality modality = Modality::image;
};

// standard: image + 5 encoded captions (6 instances).
// config2: image, its mirror, the 5 captions and 5 crops of side crop_side
// (caption k cropped at the top-left, top-right, bottom-left, bottom-right
// and center for k = 0..4), all resized to input_side (12 instances).
std::vector<TrainingInstance> augment(const RgbImage& image, std::span<const RgbImage> encoded_captions,
                                      const AugmentationConfig& config, int group_id);

}  // namespace xmodal
