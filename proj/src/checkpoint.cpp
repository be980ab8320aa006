#include "xmodal/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "xmodal/errors.hpp"

namespace xmodal {

namespace {

constexpr char kMagic[8] = {'X', 'M', 'O', 'D', 'A', 'L', 'C', 'K'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFFu);
}

void put_string(std::string& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

void put_tensor(std::string& out, std::string_view name, std::span<const std::size_t> shape,
                std::span<const double> values) {
  put_string(out, name);
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (auto e : shape) put_u32(out, static_cast<std::uint32_t>(e));
  for (double v : values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class Reader {
public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void magic() {
    need(sizeof(kMagic));
    if (std::memcmp(bytes_.data() + pos_, kMagic, sizeof(kMagic)) != 0) {
      throw DataError("not an xmodal checkpoint (bad magic)");
    }
    pos_ += sizeof(kMagic);
  }
  bool done() const { return pos_ == bytes_.size(); }

private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError("truncated checkpoint");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

struct RawTensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

template <typename T>
T number(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw DataError("checkpoint config lacks '" + key + "'");
  T v{};
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError("checkpoint config has bad value for '" + key + "'");
  }
  return v;
}

}  // namespace

std::string serialize_checkpoint(const TrainResult& state) {
  const auto& cfg = state.net.config();
  std::string config_text;
  config_text += "input_side=" + std::to_string(cfg.input_side) + "\n";
  config_text += "conv=" + format_conv_specs(cfg.conv_specs) + "\n";
  config_text += "embedding_dim=" + std::to_string(cfg.embedding_dim) + "\n";
  config_text += "num_classes=" + std::to_string(cfg.num_classes) + "\n";
  config_text += "lambda_center=" + fmt_double(cfg.lambda_center) + "\n";
  config_text += "normalize_embeddings=" + std::to_string(cfg.normalize_embeddings ? 1 : 0) + "\n";
  config_text += "seed=" + std::to_string(cfg.seed) + "\n";
  config_text += "center_alpha=" + fmt_double(state.centers.alpha) + "\n";
  config_text += "adam_step=" + std::to_string(state.adam.step) + "\n";
  config_text += "epochs_done=" + std::to_string(state.epochs_done) + "\n";

  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kCheckpointVersion);
  put_string(out, config_text);

  const auto params = state.net.parameters();
  const bool has_adam = state.adam.m.size() == params.size();
  put_u32(out, static_cast<std::uint32_t>(params.size() * (has_adam ? 3 : 1) + 1));
  for (const auto& p : params) put_tensor(out, p.name, p.shape, p.values);
  const std::size_t cshape[] = {state.centers.centers.rows, state.centers.centers.cols};
  put_tensor(out, "centers", cshape, state.centers.centers.values);
  if (has_adam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      put_tensor(out, "adam.m." + params[i].name, params[i].shape, state.adam.m[i]);
      put_tensor(out, "adam.v." + params[i].name, params[i].shape, state.adam.v[i]);
    }
  }
  return out;
}

TrainResult deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  in.magic();
  if (const auto version = in.u32(); version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto kv = parse_kv(in.str());

  NetworkConfig cfg;
  cfg.input_side = number<int>(kv, "input_side");
  cfg.conv_specs = parse_conv_specs(kv.at("conv"));
  cfg.embedding_dim = number<int>(kv, "embedding_dim");
  cfg.num_classes = number<int>(kv, "num_classes");
  cfg.lambda_center = number<double>(kv, "lambda_center");
  cfg.normalize_embeddings = number<int>(kv, "normalize_embeddings") != 0;
  cfg.seed = number<std::uint64_t>(kv, "seed");

  std::map<std::string, RawTensor> tensors;
  const auto count = in.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = in.str();
    RawTensor raw;
    const auto rank = in.u32();
    for (std::uint32_t r = 0; r < rank; ++r) raw.shape.push_back(in.u32());
    const std::size_t n = Tensor::element_count(raw.shape);
    raw.values.resize(n);
    for (auto& v : raw.values) v = static_cast<double>(std::bit_cast<float>(in.u32()));
    tensors.emplace(std::move(name), std::move(raw));
  }
  if (!in.done()) throw DataError("trailing bytes after checkpoint tensors");

  auto take = [&](const std::string& name, std::span<const std::size_t> shape) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint lacks tensor '" + name + "'");
    if (!std::equal(shape.begin(), shape.end(), it->second.shape.begin(), it->second.shape.end())) {
      throw DataError("checkpoint tensor '" + name + "' has the wrong shape");
    }
    return it->second.values;
  };

  TrainResult state{EmbeddingNet(cfg),
                    CenterTable(static_cast<std::size_t>(cfg.num_classes),
                                static_cast<std::size_t>(cfg.embedding_dim),
                                number<double>(kv, "center_alpha")),
                    {},
                    number<int>(kv, "epochs_done"),
                    {}};
  for (auto& p : state.net.parameters()) p.values = take(p.name, p.shape);
  const std::size_t cshape[] = {state.centers.centers.rows, state.centers.centers.cols};
  state.centers.centers.values = take("centers", cshape);

  state.adam = AdamState::zeros_like(state.net.parameters());
  state.adam.step = number<std::int64_t>(kv, "adam_step");
  const auto params = state.net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tensors.contains("adam.m." + params[i].name)) {
      state.adam.m[i] = take("adam.m." + params[i].name, params[i].shape);
      state.adam.v[i] = take("adam.v." + params[i].name, params[i].shape);
    }
  }
  return state;
}

void save_checkpoint(const std::filesystem::path& path, const TrainResult& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const auto bytes = serialize_checkpoint(state);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

TrainResult load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace xmodal
