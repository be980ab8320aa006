#include "xmodal/text_encoding.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "xmodal/errors.hpp"
#include "xmodal/rng.hpp"

namespace xmodal {

WordEmbeddingTable::WordEmbeddingTable(std::vector<std::string> tokens, std::vector<double> vectors,
                                       int dim)
    : tokens_(std::move(tokens)), vectors_(std::move(vectors)), dim_(dim) {
  if (dim_ < 1) throw DataError("embedding dimension must be >= 1");
  if (tokens_.empty()) throw DataError("embedding table needs at least one token");
  if (vectors_.size() != tokens_.size() * static_cast<std::size_t>(dim_)) {
    throw DataError("embedding matrix size does not match V x d");
  }
  for (double v : vectors_) {
    if (!std::isfinite(v)) throw DataError("non-finite embedding component");
  }
  vocab_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw DataError("empty token in embedding table");
    if (!vocab_.emplace(tokens_[i], i).second) {
      throw DataError("duplicate token '" + tokens_[i] + "'");
    }
  }
}

std::optional<std::size_t> WordEmbeddingTable::find(std::string_view token) const {
  const auto it = vocab_.find(std::string(token));
  if (it == vocab_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> WordEmbeddingTable::row(std::size_t index) const {
  return {vectors_.data() + index * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s, int line_no) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError("line " + std::to_string(line_no) + ": cannot parse number '" +
                    std::string(s) + "'");
  }
  return value;
}

}  // namespace

WordEmbeddingTable parse_embedding_table(std::string_view text) {
  std::vector<std::string> tokens;
  std::vector<double> vectors;
  std::unordered_map<std::string, int> seen;
  long declared_rows = -1;
  int dim = 0;
  int line_no = 0;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;

    if (declared_rows < 0) {
      if (fields.size() != 2) throw DataError("line 1: header must be 'V d'");
      declared_rows = parse_number<long>(fields[0], line_no);
      dim = parse_number<int>(fields[1], line_no);
      if (declared_rows < 1 || dim < 1) throw DataError("line 1: V and d must be positive");
      continue;
    }
    if (static_cast<int>(fields.size()) != dim + 1) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                      " components, found " + std::to_string(fields.size() - 1));
    }
    std::string token(fields[0]);
    if (const auto [it, inserted] = seen.emplace(token, line_no); !inserted) {
      throw DataError("line " + std::to_string(line_no) + ": duplicate token '" + token +
                      "' (first seen on line " + std::to_string(it->second) + ")");
    }
    for (int k = 0; k < dim; ++k) {
      const double v = parse_number<double>(fields[k + 1], line_no);
      if (!std::isfinite(v)) {
        throw DataError("line " + std::to_string(line_no) + ": non-finite component");
      }
      vectors.push_back(v);
    }
    tokens.push_back(std::move(token));
  }
  if (declared_rows < 0) throw DataError("empty embedding table file");
  if (static_cast<long>(tokens.size()) != declared_rows) {
    throw DataError("header declares " + std::to_string(declared_rows) + " rows, found " +
                    std::to_string(tokens.size()));
  }
  return WordEmbeddingTable(std::move(tokens), std::move(vectors), dim);
}

WordEmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_embedding_table(ss.str());
}

std::string format_embedding_table(const WordEmbeddingTable& table) {
  std::string out = std::to_string(table.size()) + " " + std::to_string(table.dim()) + "\n";
  char buf[64];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += table.tokens()[i];
    for (double v : table.row(i)) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out += ' ';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

OovPolicy parse_oov_policy(std::string_view name) {
  if (name == "skip") return OovPolicy::skip;
  if (name == "hashed_fallback") return OovPolicy::hashed_fallback;
  throw UsageError("unknown OOV policy '" + std::string(name) + "'");
}

std::string_view to_string(OovPolicy policy) {
  return policy == OovPolicy::skip ? "skip" : "hashed_fallback";
}

void EncodingSpec::validate() const {
  if (superpixel_scale < 1) throw DataError("superpixel scale must be >= 1");
  if (canvas_width < 1 || canvas_height < 1) throw DataError("canvas extents must be positive");
  if (canvas_width % superpixel_scale != 0 || canvas_height % superpixel_scale != 0) {
    throw DataError("canvas extents must be multiples of the superpixel scale");
  }
  if (!(value_min < value_max)) throw DataError("value_min must be below value_max");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint8_t quantize_component(double c, const EncodingSpec& spec) {
  const double clamped = std::clamp(c, spec.value_min, spec.value_max);
  const double scaled = 255.0 * (clamped - spec.value_min) / (spec.value_max - spec.value_min);
  // std::round rounds half away from zero.
  return static_cast<std::uint8_t>(std::clamp(std::round(scaled), 0.0, 255.0));
}

int word_block_side(int dim) {
  const int pixels = (dim + 2) / 3;
  int side = 0;
  while (side * side < pixels) ++side;
  return side;
}

WordBlock encode_word(std::span<const double> vec, const EncodingSpec& spec) {
  const int dim = static_cast<int>(vec.size());
  WordBlock block;
  block.filled = (dim + 2) / 3;
  block.side = word_block_side(dim);
  block.rgb.assign(static_cast<std::size_t>(block.side) * block.side * 3, 0);
  for (int k = 0; k < block.filled * 3; ++k) {
    // Zero padding for the final triple, quantized like any other component.
    const double c = k < dim ? vec[k] : 0.0;
    block.rgb[k] = quantize_component(c, spec);
  }
  return block;
}

std::vector<double> hashed_fallback_vector(std::string_view token, int dim, const EncodingSpec& spec) {
  std::uint64_t state = fnv1a64(token);
  std::vector<double> vec(static_cast<std::size_t>(dim));
  for (auto& v : vec) {
    state = splitmix64(state);
    const double u = static_cast<double>(state >> 11) * 0x1.0p-53;
    v = spec.value_min + (spec.value_max - spec.value_min) * u;
  }
  return vec;
}

EncodeResult encode_text(std::span<const std::string> tokens, const WordEmbeddingTable& table,
                         const EncodingSpec& spec) {
  spec.validate();
  const int s = spec.superpixel_scale;
  const int side = word_block_side(table.dim());
  const int block_px = side * s;
  if (block_px > spec.canvas_width || block_px > spec.canvas_height) {
    throw DataError("canvas too small for a single " + std::to_string(block_px) + "px word block");
  }

  EncodeResult result;
  result.image = RgbImage(spec.canvas_width, spec.canvas_height);
  int cursor_x = 0;
  int cursor_y = 0;
  const int pitch = (side + 1) * s;  // block plus one logical pixel of gap

  for (std::size_t t = 0; t < tokens.size(); ++t) {
    std::vector<double> fallback;
    std::span<const double> vec;
    if (const auto row = table.find(tokens[t])) {
      vec = table.row(*row);
    } else if (spec.oov_policy == OovPolicy::hashed_fallback) {
      fallback = hashed_fallback_vector(tokens[t], table.dim(), spec);
      vec = fallback;
    } else {
      ++result.oov_skipped;
      continue;
    }

    if (cursor_x + block_px > spec.canvas_width) {
      cursor_x = 0;
      cursor_y += pitch;
    }
    if (cursor_y + block_px > spec.canvas_height) {
      // Count every remaining drawable word as truncated.
      for (std::size_t r = t; r < tokens.size(); ++r) {
        if (table.find(tokens[r]) || spec.oov_policy == OovPolicy::hashed_fallback) {
          ++result.truncated;
        } else {
          ++result.oov_skipped;
        }
      }
      break;
    }

    const WordBlock block = encode_word(vec, spec);
    for (int by = 0; by < side; ++by) {
      for (int bx = 0; bx < side; ++bx) {
        const auto* src = &block.rgb[(static_cast<std::size_t>(by) * side + bx) * 3];
        for (int dy = 0; dy < s; ++dy) {
          for (int dx = 0; dx < s; ++dx) {
            result.image.set(cursor_x + bx * s + dx, cursor_y + by * s + dy, src[0], src[1], src[2]);
          }
        }
      }
    }
    ++result.words_drawn;
    cursor_x += pitch;
  }
  return result;
}

RgbImage crop_encoded(const RgbImage& image, int crop_w, int crop_h, int offset_x, int offset_y) {
  return crop(image, offset_x, offset_y, crop_w, crop_h);
}

}  // namespace xmodal
