#include "xmodal/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "xmodal/checkpoint.hpp"
#include "xmodal/data.hpp"
#include "xmodal/errors.hpp"
#include "xmodal/projection.hpp"
#include "xmodal/retrieval.hpp"
#include "xmodal/synth.hpp"
#include "xmodal/text_encoding.hpp"
#include "xmodal/trainer.hpp"

namespace fs = std::filesystem;

namespace xmodal {

namespace {

fs::path path_or(const RunConfig& cfg, std::string_view key, const fs::path& fallback) {
  const auto& v = cfg.get(key);
  return v.empty() ? fallback : fs::path(v);
}

fs::path corpus_dir(const RunConfig& cfg) { return cfg.get("corpus"); }
fs::path encoded_dir(const RunConfig& cfg) { return path_or(cfg, "encoded", corpus_dir(cfg) / "encoded"); }

fs::path encoded_file(const fs::path& dir, const std::string& image_id, int k) {
  return dir / (image_id + "." + std::to_string(k) + ".ppm");
}

int as_int(const RunConfig& cfg, std::string_view key) {
  const auto v = cfg.get_int(key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw UsageError("key '" + std::string(key) + "' out of range");
  }
  return static_cast<int>(v);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

EncodingSpec encoding_spec(const RunConfig& cfg) {
  EncodingSpec spec;
  spec.canvas_width = as_int(cfg, "canvas_width");
  spec.canvas_height = as_int(cfg, "canvas_height");
  spec.superpixel_scale = as_int(cfg, "superpixel");
  spec.value_min = cfg.get_double("value_min");
  spec.value_max = cfg.get_double("value_max");
  spec.oov_policy = parse_oov_policy(cfg.get("oov_policy"));
  spec.validate();
  return spec;
}

struct CorpusInfo {
  std::vector<CaptionRecord> captions;
  std::vector<std::string> image_ids;  // first-appearance order
  std::map<std::string, int> group_of;
};

CorpusInfo load_corpus(const RunConfig& cfg) {
  CorpusInfo info;
  info.captions = load_captions(path_or(cfg, "captions", corpus_dir(cfg) / "captions.tsv"));
  info.image_ids = distinct_images(info.captions);
  const fs::path manifest = corpus_dir(cfg) / "manifest.tsv";
  if (fs::exists(manifest)) {
    for (const auto& e : load_manifest(manifest)) info.group_of[e.image_id] = e.group;
  }
  for (std::size_t i = 0; i < info.image_ids.size(); ++i) {
    const auto& id = info.image_ids[i];
    if (!info.group_of.contains(id)) {
      if (fs::exists(manifest)) throw DataError("image '" + id + "' missing from manifest.tsv");
      info.group_of[id] = static_cast<int>(i);
    }
  }
  return info;
}

DatasetSplit make_split(const RunConfig& cfg, const CorpusInfo& info) {
  const auto seed = cfg.get_u64("seed");
  const auto& mode = cfg.get("split");
  if (mode == "random") {
    const auto count = cfg.get_int("test_count");
    if (count < 0) throw UsageError("test_count must be >= 0");
    return split(info.captions, static_cast<std::size_t>(count), seed);
  }
  if (mode == "per_group") {
    std::vector<int> groups;
    for (const auto& id : info.image_ids) groups.push_back(info.group_of.at(id));
    return split_per_group(info.image_ids, groups, seed);
  }
  throw UsageError("unknown split mode '" + mode + "' (random|per_group)");
}

std::vector<RgbImage> load_encoded_captions(const fs::path& dir, const std::string& image_id) {
  std::vector<RgbImage> out;
  for (int k = 0; k < kCaptionsPerImage; ++k) {
    const auto path = encoded_file(dir, image_id, k);
    if (!fs::exists(path)) {
      throw DataError("missing encoded caption " + path.string() + " (run 'encode' first)");
    }
    out.push_back(read_ppm(path));
  }
  return out;
}

NetworkConfig network_config(const RunConfig& cfg, int num_classes) {
  NetworkConfig net;
  net.input_side = as_int(cfg, "input_side");
  net.conv_specs = parse_conv_specs(cfg.get("conv"));
  net.embedding_dim = as_int(cfg, "embedding_dim");
  net.num_classes = num_classes;
  net.lambda_center = cfg.get_double("lambda");
  net.normalize_embeddings = cfg.get_bool("normalize");
  net.seed = cfg.get_u64("seed");
  net.validate();
  return net;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.epochs = as_int(cfg, "epochs");
  tc.batch_size = as_int(cfg, "batch_size");
  tc.center_alpha = cfg.get_double("alpha");
  tc.adam.lr = cfg.get_double("lr");
  tc.adam.beta1 = cfg.get_double("beta1");
  tc.adam.beta2 = cfg.get_double("beta2");
  tc.adam.eps = cfg.get_double("eps");
  if (tc.epochs < 0) throw UsageError("epochs must be >= 0");
  if (tc.batch_size < 1) throw UsageError("batch_size must be >= 1");
  return tc;
}

}  // namespace

void cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  SynthOptions opt;
  opt.n_groups = as_int(cfg, "groups");
  opt.images_per_group = as_int(cfg, "images_per_group");
  opt.seed = cfg.get_u64("seed");
  opt.image_side = as_int(cfg, "image_side");
  opt.word_dim = as_int(cfg, "word_dim");
  const auto corpus = synth_dataset(opt);
  write_corpus(corpus, corpus_dir(cfg));
  out << "wrote " << corpus.images.size() << " images and " << corpus.captions.size()
      << " captions to " << corpus_dir(cfg).string() << "\n";
}

void cmd_encode(const RunConfig& cfg, std::ostream& out, std::ostream& diag) {
  const auto spec = encoding_spec(cfg);
  const auto table = load_embedding_table(path_or(cfg, "vocab", corpus_dir(cfg) / "vocab.vec"));
  const auto captions = load_captions(path_or(cfg, "captions", corpus_dir(cfg) / "captions.tsv"));
  const bool png = cfg.get_bool("png");
  const fs::path dir = encoded_dir(cfg);
  fs::create_directories(dir);

  int truncated_total = 0;
  for (const auto& rec : captions) {
    const auto tokens = tokenize(rec.text);
    const auto result = encode_text(tokens, table, spec);
    const auto path = encoded_file(dir, rec.image_id, rec.caption_index);
    write_ppm(path, result.image);
    if (png) write_png(fs::path(path).replace_extension(".png"), result.image);
    if (result.words_drawn == 0 && result.oov_skipped > 0) {
      diag << "warning: " << rec.image_id << "#" << rec.caption_index
           << ": every token is out of vocabulary; canvas is blank\n";
    }
    if (result.truncated > 0) {
      diag << "warning: " << rec.image_id << "#" << rec.caption_index << ": " << result.truncated
           << " word(s) did not fit on the canvas\n";
      truncated_total += result.truncated;
    }
  }
  out << "encoded " << captions.size() << " captions into " << dir.string();
  if (truncated_total > 0) out << " (" << truncated_total << " words truncated)";
  out << "\n";
}

void cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto info = load_corpus(cfg);
  const auto parts = make_split(cfg, info);
  if (parts.train.empty()) throw DataError("training split is empty");

  std::set<int> train_groups;
  for (const auto& id : parts.train) train_groups.insert(info.group_of.at(id));
  std::map<int, int> class_of;
  for (int g : train_groups) class_of.emplace(g, static_cast<int>(class_of.size()));

  const auto net_cfg = network_config(cfg, static_cast<int>(class_of.size()));
  const auto tc = train_config(cfg);
  AugmentationConfig aug;
  aug.mode = parse_augmentation_mode(cfg.get("augmentation"));
  aug.crop_side = as_int(cfg, "crop_side");
  aug.input_side = net_cfg.input_side;

  std::vector<TrainingInstance> dataset;
  const fs::path images_dir = corpus_dir(cfg) / "images";
  const fs::path enc_dir = encoded_dir(cfg);
  for (const auto& id : parts.train) {
    const auto image = read_image(images_dir / id);
    const auto texts = load_encoded_captions(enc_dir, id);
    auto instances = augment(image, texts, aug, class_of.at(info.group_of.at(id)));
    std::move(instances.begin(), instances.end(), std::back_inserter(dataset));
  }

  auto report = [&out](const EpochStats& s) {
    out << "epoch " << s.epoch << "  loss " << s.total_loss << "  ce " << s.ce_loss << "  center "
        << s.center_loss << "  (" << static_cast<long>(s.wall_ms) << " ms)\n";
  };

  TrainResult state = [&] {
    const auto& resume = cfg.get("resume");
    if (resume.empty()) return train(dataset, net_cfg, tc, report);
    TrainResult resumed = load_checkpoint(resume);
    if (resumed.net.config().num_classes != net_cfg.num_classes ||
        resumed.net.config().input_side != net_cfg.input_side) {
      throw DataError("checkpoint " + resume + " does not match this corpus/config");
    }
    train_more(resumed, dataset, tc, report);
    return resumed;
  }();

  save_checkpoint(cfg.get("checkpoint"), state);
  write_text(cfg.get("stats"), format_stats_csv(state.stats));
  out << "trained on " << dataset.size() << " instances (" << parts.train.size() << " images, "
      << class_of.size() << " classes); checkpoint " << cfg.get("checkpoint") << "\n";
}

void cmd_embed(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto state = load_checkpoint(cfg.get("checkpoint"));
  const auto info = load_corpus(cfg);
  const auto& subset = cfg.get("subset");
  std::vector<std::string> chosen;
  if (subset == "all") {
    chosen = info.image_ids;
  } else if (subset == "test" || subset == "train") {
    auto parts = make_split(cfg, info);
    chosen = subset == "test" ? std::move(parts.test) : std::move(parts.train);
  } else {
    throw UsageError("unknown subset '" + subset + "' (test|train|all)");
  }
  if (chosen.empty()) throw DataError("the '" + subset + "' subset has no images");

  const fs::path images_dir = corpus_dir(cfg) / "images";
  const fs::path enc_dir = encoded_dir(cfg);
  std::vector<RgbImage> inputs;
  std::vector<std::string> ids;
  std::vector<Modality> tags;
  std::vector<int> groups;
  for (const auto& id : chosen) {
    const int group = info.group_of.at(id);
    inputs.push_back(read_image(images_dir / id));
    ids.push_back(id);
    tags.push_back(Modality::image);
    groups.push_back(group);
    auto texts = load_encoded_captions(enc_dir, id);
    for (int k = 0; k < kCaptionsPerImage; ++k) {
      inputs.push_back(std::move(texts[static_cast<std::size_t>(k)]));
      ids.push_back(id + "#" + std::to_string(k));
      tags.push_back(Modality::text);
      groups.push_back(group);
    }
  }
  Matrix embeddings = embed_images(state.net, inputs);
  const EmbeddingIndex index(std::move(embeddings), std::move(ids), std::move(tags), std::move(groups));
  write_embedding_file(cfg.get("embeddings"), index);
  out << "embedded " << chosen.size() << " images and " << chosen.size() * kCaptionsPerImage
      << " captions (D=" << index.dim() << ") into " << cfg.get("embeddings") << "\n";
}

void cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const auto index = read_embedding_file(cfg.get("embeddings"));
  const auto ks = cfg.get_size_list("ks");
  for (auto k : ks) {
    if (k < 1) throw UsageError("every K must be >= 1");
  }
  const auto images = index.select(Modality::image);
  const auto texts = index.select(Modality::text);
  const auto [i2s, s2i] = evaluate_bidirectional(images, texts, ks);
  const RecallTable tables[] = {i2s, s2i};
  write_text(cfg.get("recall_csv"), format_recall_csv(tables));
  out << format_recall_table(i2s, s2i, "xmodal");
}

void cmd_project(const RunConfig& cfg, std::ostream& out, std::ostream& diag) {
  const auto index = read_embedding_file(cfg.get("embeddings"));
  PowerIterationOptions opt;
  opt.seed = cfg.get_u64("seed");
  const auto proj = project_2d(index.items(), opt);
  if (proj.zero_variance) diag << "warning: embeddings have zero variance; all coordinates are 0\n";
  std::string csv = "id,modality,group,x,y\n";
  for (std::size_t i = 0; i < index.size(); ++i) {
    csv += index.id(i) + "," + std::string(to_string(index.modality(i))) + "," +
           std::to_string(index.group(i)) + "," + shortest(proj.coords(i, 0)) + "," +
           shortest(proj.coords(i, 1)) + "\n";
  }
  write_text(cfg.get("projection_csv"), csv);
  out << "projected " << index.size() << " rows (top eigenvalues " << proj.eigenvalues[0] << ", "
      << proj.eigenvalues[1] << ") into " << cfg.get("projection_csv") << "\n";
}

namespace {

struct Subcommand {
  const char* name;
  const char* description;
  std::vector<std::string> keys;
  const char* out_key;  // target of --out
  void (*run)(const RunConfig&, std::ostream&, std::ostream&);
};

const std::vector<Subcommand>& subcommands() {
  static const std::vector<Subcommand> table = {
      {"synth", "generate a synthetic paired image/caption corpus",
       {"seed", "corpus", "groups", "images_per_group", "image_side", "word_dim"}, "corpus", cmd_synth},
      {"encode", "render captions into encoded-text PPM images",
       {"corpus", "captions", "vocab", "encoded", "canvas_width", "canvas_height", "superpixel",
        "value_min", "value_max", "oov_policy", "png"},
       "encoded", cmd_encode},
      {"train", "train the shared embedding network",
       {"seed", "corpus", "captions", "encoded", "input_side", "conv", "embedding_dim", "lambda",
        "normalize", "alpha", "lr", "beta1", "beta2", "eps", "batch_size", "epochs", "augmentation",
        "crop_side", "split", "test_count", "checkpoint", "resume", "stats"},
       "checkpoint", cmd_train},
      {"embed", "extract embeddings for a corpus subset",
       {"seed", "corpus", "captions", "encoded", "checkpoint", "split", "test_count", "subset", "embeddings"},
       "embeddings", cmd_embed},
      {"eval", "bidirectional Recall@K over an embedding file", {"embeddings", "ks", "recall_csv"},
       "recall_csv", cmd_eval},
      {"project", "2D PCA projection of an embedding file", {"seed", "embeddings", "projection_csv"},
       "projection_csv", cmd_project},
  };
  return table;
}

std::string dashed(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& diag) {
  CLI::App app{"Single-network cross-modal retrieval toolkit"};
  app.require_subcommand(1);

  struct Bound {
    CLI::App* app;
    const Subcommand* cmd;
    std::map<std::string, std::pair<CLI::Option*, std::string>> options;
    CLI::Option* out_opt = nullptr;
    std::string out_value;
    CLI::Option* config_opt = nullptr;
    std::string config_path;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& cmd : subcommands()) {
    auto b = std::make_unique<Bound>();
    b->cmd = &cmd;
    b->app = app.add_subcommand(cmd.name, cmd.description);
    b->config_opt = b->app->add_option("--config", b->config_path, "flat 'key = value' config file");
    for (const auto& key : cmd.keys) {
      const ConfigKey* spec = find_config_key(key);
      auto& slot = b->options[key];
      std::string names = "--" + dashed(key);
      if (dashed(key) != key) names += ",--" + key;
      slot.first = b->app->add_option(names, slot.second, spec->help)->default_str(spec->default_value);
    }
    b->out_opt = b->app->add_option("--out", b->out_value, std::string("alias for --") + dashed(cmd.out_key));
    bound.push_back(std::move(b));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const auto& b : bound) {
      if (b->app->parsed()) target = b->app;
    }
    out << target->help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    diag << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    for (const auto& b : bound) {
      if (!b->app->parsed()) continue;
      RunConfig cfg;
      if (b->config_opt->count() > 0) cfg.load_file(b->config_path);
      cfg.apply_process_environment();
      if (b->out_opt->count() > 0) cfg.set(b->cmd->out_key, b->out_value);
      for (const auto& [key, slot] : b->options) {
        if (slot.first->count() > 0) cfg.set(key, slot.second);
      }
      b->cmd->run(cfg, out, diag);
      return kExitOk;
    }
    return kExitUsage;
  } catch (const UsageError& e) {
    diag << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    diag << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    diag << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace xmodal
