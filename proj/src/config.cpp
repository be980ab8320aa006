#include "xmodal/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "xmodal/errors.hpp"

extern char** environ;

namespace xmodal {

namespace {

const std::vector<ConfigKey> kKeys = {
    {"seed", "42", "master seed; split/init/shuffle/synth streams derive from it"},
    // corpus
    {"corpus", "corpus", "corpus directory (images/, captions.tsv, vocab.vec, manifest.tsv)"},
    {"groups", "32", "synth: number of image-caption groups (<= 64)"},
    {"images_per_group", "1", "synth: renderings per group"},
    {"image_side", "64", "synth: rendered image side in pixels"},
    {"word_dim", "128", "synth: word-vector dimension d"},
    // text encoding
    {"captions", "", "caption file (default <corpus>/captions.tsv)"},
    {"vocab", "", "word-embedding table (default <corpus>/vocab.vec)"},
    {"encoded", "", "encoded-caption directory (default <corpus>/encoded)"},
    {"canvas_width", "64", "encoded canvas width in pixels"},
    {"canvas_height", "64", "encoded canvas height in pixels"},
    {"superpixel", "1", "pixels per logical word pixel (s x s)"},
    {"value_min", "-1", "lower quantization bound"},
    {"value_max", "1", "upper quantization bound"},
    {"oov_policy", "skip", "out-of-vocabulary tokens: skip | hashed_fallback"},
    {"png", "false", "encode: also write PNG copies for inspection"},
    // network and training
    {"input_side", "64", "network input side in pixels"},
    {"conv", "8p,16p", "conv stack: output channels, 'p' adds 2x2 max pooling"},
    {"embedding_dim", "128", "joint embedding dimension D"},
    {"lambda", "0.1", "center-loss weight"},
    {"normalize", "false", "L2-normalize embeddings"},
    {"alpha", "0.5", "center update rate in (0, 1]"},
    {"lr", "0.001", "Adam learning rate"},
    {"beta1", "0.9", "Adam beta1"},
    {"beta2", "0.999", "Adam beta2"},
    {"eps", "1e-8", "Adam epsilon"},
    {"batch_size", "45", "mini-batch size"},
    {"epochs", "60", "training epochs"},
    {"augmentation", "standard", "standard | config2"},
    {"crop_side", "57", "config2 crop side on the encoded canvas"},
    {"split", "random", "test selection: random (test_count images) | per_group (one per group)"},
    {"test_count", "8", "held-out images for split=random"},
    {"checkpoint", "model.ckpt", "checkpoint path"},
    {"resume", "", "train: checkpoint to continue from"},
    {"stats", "stats.csv", "per-epoch training statistics CSV"},
    // evaluation
    {"subset", "test", "embed: test | train | all"},
    {"embeddings", "embeddings.txt", "embedding file"},
    {"ks", "1,5,10", "recall cutoffs"},
    {"recall_csv", "recall.csv", "recall CSV output"},
    {"projection_csv", "projection.csv", "2D projection CSV output"},
};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

template <typename T>
T parse_as(std::string_view key, const std::string& text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw UsageError("key '" + std::string(key) + "': cannot parse '" + text + "'");
  }
  return v;
}

}  // namespace

std::span<const ConfigKey> config_keys() { return kKeys; }

const ConfigKey* find_config_key(std::string_view name) {
  for (const auto& k : kKeys) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_[k.name] = k.default_value;
}

void RunConfig::set(std::string_view key, std::string value) {
  if (find_config_key(key) == nullptr) throw UsageError("unknown config key '" + std::string(key) + "'");
  values_[std::string(key)] = std::move(value);
}

void RunConfig::load_text(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw UsageError(std::string(origin) + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (find_config_key(key) == nullptr) {
      throw UsageError(std::string(origin) + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    set(key, trim(std::string_view(body).substr(eq + 1)));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

void RunConfig::apply_environment(std::span<const std::string> entries) {
  constexpr std::string_view prefix = "XMODAL_";
  for (const auto& entry : entries) {
    if (!entry.starts_with(prefix)) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = entry.substr(prefix.size(), eq - prefix.size());
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (find_config_key(key) == nullptr) {
      throw UsageError("unknown environment override " + entry.substr(0, eq));
    }
    set(key, entry.substr(eq + 1));
  }
}

void RunConfig::apply_process_environment() {
  std::vector<std::string> entries;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) entries.emplace_back(*e);
  apply_environment(entries);
}

const std::string& RunConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + std::string(key) + "'");
  return it->second;
}

std::int64_t RunConfig::get_int(std::string_view key) const { return parse_as<std::int64_t>(key, get(key)); }

std::uint64_t RunConfig::get_u64(std::string_view key) const {
  return parse_as<std::uint64_t>(key, get(key));
}

double RunConfig::get_double(std::string_view key) const { return parse_as<double>(key, get(key)); }

bool RunConfig::get_bool(std::string_view key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("key '" + std::string(key) + "': expected a boolean, got '" + v + "'");
}

std::vector<std::size_t> RunConfig::get_size_list(std::string_view key) const {
  std::vector<std::size_t> out;
  const auto& v = get(key);
  std::size_t pos = 0;
  while (pos <= v.size()) {
    std::size_t end = v.find(',', pos);
    if (end == std::string::npos) end = v.size();
    out.push_back(parse_as<std::size_t>(key, trim(std::string_view(v).substr(pos, end - pos))));
    pos = end + 1;
  }
  return out;
}

}  // namespace xmodal
