#include "xmodal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "xmodal/errors.hpp"

namespace xmodal {

namespace {

constexpr const char* kShapeWords[kSynthShapes] = {"circle", "square", "triangle", "cross"};
constexpr const char* kColorWords[kSynthColors] = {"red",    "green",  "blue",  "yellow",
                                                   "purple", "orange", "white", "cyan"};
constexpr const char* kSizeWords[kSynthSizes] = {"small", "large"};
constexpr std::uint8_t kColorRgb[kSynthColors][3] = {
    {220, 40, 40},  {40, 180, 60},   {50, 80, 220},   {230, 210, 40},
    {150, 60, 190}, {240, 140, 30},  {235, 235, 235}, {40, 200, 210}};

// {size} {color} {shape} placeholders are S, C and H.
constexpr const char* kTemplates[] = {
    "a S C H",
    "a C H that is S",
    "there is a S C H on the background",
    "the picture shows one S H colored C",
    "a H in C which looks S",
    "one C H of S size",
    "an image of a S C H",
    "a plain background with a S C H",
};
constexpr int kTemplateCount = static_cast<int>(std::size(kTemplates));

std::string fill_template(const char* tmpl, const SynthAttributes& a) {
  std::string out;
  for (const char* p = tmpl; *p != '\0'; ++p) {
    const bool standalone = (p == tmpl || p[-1] == ' ') && (p[1] == ' ' || p[1] == '\0');
    if (standalone && *p == 'S') {
      out += a.size_word();
    } else if (standalone && *p == 'C') {
      out += a.color_word();
    } else if (standalone && *p == 'H') {
      out += a.shape_word();
    } else {
      out += *p;
    }
  }
  return out;
}

std::string padded(int value, int width) {
  std::string s = std::to_string(value);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

bool inside(int shape, double dx, double dy, double r) {
  switch (shape) {
    case 0:  // circle
      return dx * dx + dy * dy <= r * r;
    case 1:  // square
      return std::abs(dx) <= 0.85 * r && std::abs(dy) <= 0.85 * r;
    case 2:  // upward triangle, apex at -r, base at 0.7r
      return dy >= -r && dy <= 0.7 * r && std::abs(dx) <= r * (dy + r) / (1.7 * r);
    default:  // cross
      return (std::abs(dx) <= r && std::abs(dy) <= 0.3 * r) ||
             (std::abs(dy) <= r && std::abs(dx) <= 0.3 * r);
  }
}

}  // namespace

std::string SynthAttributes::shape_word() const { return kShapeWords[shape]; }
std::string SynthAttributes::color_word() const { return kColorWords[color]; }
std::string SynthAttributes::size_word() const { return kSizeWords[size]; }

RgbImage render_shape(const SynthAttributes& attrs, int side, Rng& rng) {
  const auto bg = static_cast<std::uint8_t>(20 + rng.index(41));
  RgbImage img(side, side);
  std::fill(img.data.begin(), img.data.end(), bg);

  const double r = side * (attrs.size == 0 ? 0.16 : 0.32);
  const double room = std::max(0.0, side / 2.0 - r - 1.0);
  const double jitter = std::min(room, 0.12 * side);
  const double cx = (side - 1) / 2.0 + rng.uniform(-jitter, jitter);
  const double cy = (side - 1) / 2.0 + rng.uniform(-jitter, jitter);
  std::uint8_t rgb[3];
  for (int c = 0; c < 3; ++c) {
    const int v = kColorRgb[attrs.color][c] + static_cast<int>(rng.index(31)) - 15;
    rgb[c] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
  }
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      if (inside(attrs.shape, x - cx, y - cy, r)) img.set(x, y, rgb[0], rgb[1], rgb[2]);
    }
  }
  return img;
}

SynthCorpus synth_dataset(const SynthOptions& options) {
  if (options.n_groups < 2) throw DataError("synthetic corpus needs at least 2 groups");
  if (options.n_groups > kSynthCombinations) {
    throw DataError("n_groups " + std::to_string(options.n_groups) + " exceeds the " +
                    std::to_string(kSynthCombinations) + " distinct attribute combinations");
  }
  if (options.images_per_group < 1) throw DataError("images_per_group must be >= 1");
  if (options.image_side < 8) throw DataError("image_side must be >= 8");
  if (options.word_dim < 1) throw DataError("word_dim must be >= 1");

  Rng rng(derive_seed(options.seed, "synth"));
  std::vector<int> combos(kSynthCombinations);
  std::iota(combos.begin(), combos.end(), 0);
  rng.shuffle(std::span(combos));

  std::vector<SynthAttributes> attributes;
  for (int g = 0; g < options.n_groups; ++g) {
    const int c = combos[static_cast<std::size_t>(g)];
    attributes.push_back({c % kSynthShapes, (c / kSynthShapes) % kSynthColors,
                          c / (kSynthShapes * kSynthColors)});
  }

  std::vector<std::string> ids;
  std::vector<int> groups;
  std::vector<RgbImage> images;
  std::vector<CaptionRecord> captions;
  for (int g = 0; g < options.n_groups; ++g) {
    for (int k = 0; k < options.images_per_group; ++k) {
      const std::string id = "synth_" + padded(g, 2) + "_" + std::to_string(k) + ".ppm";
      ids.push_back(id);
      groups.push_back(g);
      images.push_back(render_shape(attributes[static_cast<std::size_t>(g)], options.image_side, rng));
      std::vector<int> order(kTemplateCount);
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(std::span(order));
      for (int c = 0; c < kCaptionsPerImage; ++c) {
        captions.push_back({id, c, fill_template(kTemplates[order[static_cast<std::size_t>(c)]],
                                                 attributes[static_cast<std::size_t>(g)])});
      }
    }
  }

  // Vocabulary covers every word any template can produce, sorted.
  std::set<std::string> words;
  for (const char* t : kTemplates) {
    for (auto& w : tokenize(t)) {
      if (w != "s" && w != "c" && w != "h") words.insert(w);
    }
  }
  for (const char* w : kShapeWords) words.insert(w);
  for (const char* w : kColorWords) words.insert(w);
  for (const char* w : kSizeWords) words.insert(w);
  std::vector<std::string> tokens(words.begin(), words.end());
  std::vector<double> vectors;
  Rng vocab_rng(derive_seed(options.seed, "synth.vocab"));
  for (std::size_t i = 0; i < tokens.size() * static_cast<std::size_t>(options.word_dim); ++i) {
    vectors.push_back(vocab_rng.uniform(-1.0, 1.0));
  }

  return SynthCorpus{std::move(ids),      std::move(groups),   std::move(images),
                     std::move(attributes), std::move(captions),
                     WordEmbeddingTable(std::move(tokens), std::move(vectors), options.word_dim)};
}

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  for (std::size_t i = 0; i < corpus.images.size(); ++i) {
    write_ppm(dir / "images" / corpus.image_ids[i], corpus.images[i]);
  }
  auto write_text = [](const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
  };
  write_text(dir / "captions.tsv", format_captions(corpus.captions));
  write_text(dir / "vocab.vec", format_embedding_table(corpus.vocabulary));
  std::string manifest;
  for (std::size_t i = 0; i < corpus.image_ids.size(); ++i) {
    const auto& a = corpus.group_attributes[static_cast<std::size_t>(corpus.groups[i])];
    manifest += corpus.image_ids[i] + "\t" + std::to_string(corpus.groups[i]) + "\t" + a.size_word() +
                " " + a.color_word() + " " + a.shape_word() + "\n";
  }
  write_text(dir / "manifest.tsv", manifest);
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": missing tab");
    }
    const auto tab2 = line.find('\t', tab + 1);
    const std::string group_text = line.substr(tab + 1, tab2 == std::string::npos ? std::string::npos : tab2 - tab - 1);
    try {
      out.push_back({line.substr(0, tab), std::stoi(group_text)});
    } catch (const std::logic_error&) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": bad group id");
    }
  }
  return out;
}

}  // namespace xmodal
