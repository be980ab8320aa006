#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xmodal/image.hpp"

namespace xmodal {

// Vocabulary-to-vector map. Row order is load order.
class WordEmbeddingTable {
public:
  WordEmbeddingTable(std::vector<std::string> tokens, std::vector<double> vectors, int dim);

  int dim() const { return dim_; }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::optional<std::size_t> find(std::string_view token) const;
  std::span<const double> row(std::size_t index) const;

private:
  std::vector<std::string> tokens_;
  std::vector<double> vectors_;  // size() x dim_
  std::unordered_map<std::string, std::size_t> vocab_;
  int dim_;
};

// Text format: header "V d", then "token v1 ... vd" per line.
WordEmbeddingTable load_embedding_table(const std::filesystem::path& path);
WordEmbeddingTable parse_embedding_table(std::string_view text);
std::string format_embedding_table(const WordEmbeddingTable& table);

enum class OovPolicy { skip, hashed_fallback };

OovPolicy parse_oov_policy(std::string_view name);
std::string_view to_string(OovPolicy policy);

struct EncodingSpec {
  int canvas_width = 64;
  int canvas_height = 64;
  int superpixel_scale = 1;
  double value_min = -1.0;
  double value_max = 1.0;
  OovPolicy oov_policy = OovPolicy::skip;

  // Throws DataError on a violated invariant.
  void validate() const;
};

// Lowercase alphanumeric runs, in order.
std::vector<std::string> tokenize(std::string_view text);

std::uint8_t quantize_component(double c, const EncodingSpec& spec);

// Square block of logical pixels for one word vector.
struct WordBlock {
  int side = 0;
  int filled = 0;                   // ceil(d / 3)
  std::vector<std::uint8_t> rgb;    // side * side * 3, row-major
};

int word_block_side(int dim);
WordBlock encode_word(std::span<const double> vec, const EncodingSpec& spec);

// Deterministic pseudo-vector for out-of-vocabulary tokens.
std::vector<double> hashed_fallback_vector(std::string_view token, int dim, const EncodingSpec& spec);

struct EncodeResult {
  RgbImage image;
  int words_drawn = 0;
  int oov_skipped = 0;
  int truncated = 0;  // words dropped because the canvas ran out of rows
};

EncodeResult encode_text(std::span<const std::string> tokens, const WordEmbeddingTable& table,
                         const EncodingSpec& spec);

RgbImage crop_encoded(const RgbImage& image, int crop_w, int crop_h, int offset_x, int offset_y);

}  // namespace xmodal
