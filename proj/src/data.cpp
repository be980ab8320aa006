#include "xmodal/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "xmodal/errors.hpp"
#include "xmodal/rng.hpp"

namespace xmodal {

std::vector<CaptionRecord> parse_captions(std::string_view text) {
  std::vector<CaptionRecord> records;
  std::set<std::pair<std::string, int>> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const auto where = "line " + std::to_string(line_no) + ": ";
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) throw DataError(where + "missing tab separator");
    const std::string_view key = line.substr(0, tab);
    const std::size_t hash = key.rfind('#');
    if (hash == std::string_view::npos || hash == 0) {
      throw DataError(where + "key must look like image_name#k");
    }
    const std::string_view index_text = key.substr(hash + 1);
    int k = -1;
    const auto [ptr, ec] = std::from_chars(index_text.data(), index_text.data() + index_text.size(), k);
    if (index_text.empty() || ec != std::errc{} || ptr != index_text.data() + index_text.size()) {
      throw DataError(where + "caption index '" + std::string(index_text) + "' is not an integer");
    }
    if (k < 0 || k >= kCaptionsPerImage) {
      throw DataError(where + "caption index " + std::to_string(k) + " outside [0, 5)");
    }
    CaptionRecord rec{std::string(key.substr(0, hash)), k, std::string(line.substr(tab + 1))};
    if (!seen.emplace(rec.image_id, k).second) {
      throw DataError(where + "duplicate caption key " + std::string(key));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<CaptionRecord> load_captions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_captions(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_captions(std::span<const CaptionRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += r.image_id + "#" + std::to_string(r.caption_index) + "\t" + r.text + "\n";
  }
  return out;
}

std::vector<std::string> distinct_images(std::span<const CaptionRecord> records) {
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (seen.insert(r.image_id).second) ids.push_back(r.image_id);
  }
  return ids;
}

DatasetSplit split(std::span<const CaptionRecord> records, std::size_t test_count, std::uint64_t seed) {
  const auto ids = distinct_images(records);
  if (test_count > 0 && ids.size() <= test_count) {
    throw DataError("need more than " + std::to_string(test_count) + " images to split, have " +
                    std::to_string(ids.size()));
  }
  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(std::span(order));
  std::vector<bool> is_test(ids.size(), false);
  for (std::size_t i = 0; i < test_count; ++i) is_test[order[i]] = true;

  DatasetSplit out;
  for (std::size_t i = 0; i < ids.size(); ++i) (is_test[i] ? out.test : out.train).push_back(ids[i]);
  return out;
}

DatasetSplit split_per_group(std::span<const std::string> image_ids, std::span<const int> groups,
                             std::uint64_t seed) {
  if (image_ids.size() != groups.size()) throw DataError("image/group list length mismatch");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);
  Rng rng(derive_seed(seed, "split"));
  std::vector<bool> is_test(image_ids.size(), false);
  for (const auto& [group, rows] : members) {
    if (rows.size() < 2) continue;
    is_test[rows[rng.index(rows.size())]] = true;
  }
  DatasetSplit out;
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    (is_test[i] ? out.test : out.train).push_back(image_ids[i]);
  }
  return out;
}

AugmentationMode parse_augmentation_mode(std::string_view name) {
  if (name == "standard") return AugmentationMode::standard;
  if (name == "config2") return AugmentationMode::config2;
  throw UsageError("unknown augmentation mode '" + std::string(name) + "' (standard|config2)");
}

std::string_view to_string(AugmentationMode mode) {
  return mode == AugmentationMode::standard ? "standard" : "config2";
}

std::vector<TrainingInstance> augment(const RgbImage& image, std::span<const RgbImage> encoded_captions,
                                      const AugmentationConfig& config, int group_id) {
  if (encoded_captions.size() != kCaptionsPerImage) {
    throw DataError("augment expects exactly 5 encoded captions, got " +
                    std::to_string(encoded_captions.size()));
  }
  const int side = config.input_side;
  std::vector<TrainingInstance> out;
  out.push_back({resize_bilinear(image, side), group_id, Modality::image});
  if (config.hflip()) out.push_back({resize_bilinear(hflip(image), side), group_id, Modality::image});
  for (const auto& text : encoded_captions) {
    out.push_back({resize_bilinear(text, side), group_id, Modality::text});
  }
  if (config.mode == AugmentationMode::config2) {
    for (std::size_t k = 0; k < encoded_captions.size(); ++k) {
      const auto& text = encoded_captions[k];
      const int cs = config.crop_side;
      if (cs < 1 || cs > text.width || cs > text.height) {
        throw DataError("crop_side " + std::to_string(cs) + " exceeds the encoded canvas");
      }
      const int right = text.width - cs;
      const int bottom = text.height - cs;
      const int xs[] = {0, right, 0, right, right / 2};
      const int ys[] = {0, 0, bottom, bottom, bottom / 2};
      out.push_back({resize_bilinear(crop(text, xs[k], ys[k], cs, cs), side), group_id, Modality::text});
    }
  }
  return out;
}

}  // namespace xmodal
