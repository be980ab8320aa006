#include "xmodal/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "xmodal/errors.hpp"
#include "xmodal/rng.hpp"

namespace xmodal {

Batch make_batch(std::span<const TrainingInstance> instances, std::span<const std::size_t> rows,
                 int input_side) {
  const auto side = static_cast<std::size_t>(input_side);
  const std::size_t plane = side * side;
  Batch batch;
  batch.inputs = Tensor("input", {rows.size(), 3, side, side});
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto& inst = instances[rows[b]];
    if (inst.input.width != input_side || inst.input.height != input_side) {
      throw DataError("training instance is " + std::to_string(inst.input.width) + "x" +
                      std::to_string(inst.input.height) + ", network expects side " +
                      std::to_string(input_side));
    }
    double* dst = batch.inputs.values.data() + b * 3 * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      for (std::size_t c = 0; c < 3; ++c) dst[c * plane + p] = inst.input.data[p * 3 + c] / 255.0 - 0.5;
    }
    batch.labels.push_back(inst.class_id);
    batch.modality.push_back(inst.modality);
  }
  return batch;
}

namespace {

void require_finite(const Matrix& m, const char* name) {
  for (double v : m.values) {
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite values in ") + name);
  }
}

}  // namespace

void train_more(TrainResult& state, std::span<const TrainingInstance> dataset,
                const TrainConfig& train_config, const EpochCallback& on_epoch) {
  const NetworkConfig& config = state.net.config();
  if (dataset.empty()) throw DataError("training set is empty");
  if (train_config.batch_size < 1) throw DataError("batch_size must be >= 1");
  for (const auto& inst : dataset) {
    if (inst.class_id < 0 || inst.class_id >= config.num_classes) {
      throw DataError("class id " + std::to_string(inst.class_id) + " outside [0, " +
                      std::to_string(config.num_classes) + ")");
    }
  }

  const std::uint64_t shuffle_seed = derive_seed(config.seed, "shuffle");
  std::vector<std::size_t> order(dataset.size());
  const auto bs = static_cast<std::size_t>(train_config.batch_size);

  for (int e = 0; e < train_config.epochs; ++e) {
    const auto start = std::chrono::steady_clock::now();
    const int epoch = state.epochs_done + 1;
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(shuffle_seed + static_cast<std::uint64_t>(epoch));
    rng.shuffle(std::span(order));

    double total = 0.0, ce = 0.0, center = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += bs) {
      const std::size_t end = std::min(order.size(), begin + bs);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Batch batch = make_batch(dataset, rows, config.input_side);

      ForwardResult fw = forward(state.net, batch);
      require_finite(fw.embeddings, "embeddings");
      require_finite(fw.logits, "logits");
      const LossResult loss =
          total_loss(fw.logits, fw.embeddings, batch.labels, state.centers, config.lambda_center);
      if (!std::isfinite(loss.total)) throw NumericalError("non-finite loss");
      const auto grads = backward(state.net, fw.cache, loss.d_embeddings, loss.d_logits);
      if (const auto bad = first_non_finite(grads); !bad.empty()) {
        throw NumericalError("non-finite gradient in " + bad);
      }
      adam_step(state.net.parameters(), grads, state.adam, state.adam.step + 1, train_config.adam);
      if (const auto bad = first_non_finite(state.net.parameters()); !bad.empty()) {
        throw NumericalError("non-finite parameter " + bad);
      }
      update_centers(state.centers, fw.embeddings, batch.labels);
      require_finite(state.centers.centers, "centers");

      const auto weight = static_cast<double>(rows.size());
      total += loss.total * weight;
      ce += loss.cross_entropy * weight;
      center += loss.center * weight;
    }

    const auto n = static_cast<double>(dataset.size());
    EpochStats s;
    s.epoch = epoch;
    s.total_loss = total / n;
    s.ce_loss = ce / n;
    s.center_loss = center / n;
    s.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    state.stats.push_back(s);
    state.epochs_done = epoch;
    if (on_epoch) on_epoch(s);
  }
}

TrainResult train(std::span<const TrainingInstance> dataset, const NetworkConfig& config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch) {
  if (dataset.empty()) throw DataError("training set is empty");
  TrainResult state{init_network(config),
                    CenterTable(static_cast<std::size_t>(config.num_classes),
                                static_cast<std::size_t>(config.embedding_dim), train_config.center_alpha),
                    {},
                    0,
                    {}};
  state.adam = AdamState::zeros_like(state.net.parameters());
  train_more(state, dataset, train_config, on_epoch);
  return state;
}

Matrix embed_images(const EmbeddingNet& net, std::span<const RgbImage> images, int chunk) {
  const int side = net.config().input_side;
  Matrix out(images.size(), static_cast<std::size_t>(net.config().embedding_dim));
  std::vector<TrainingInstance> staged;
  for (std::size_t begin = 0; begin < images.size(); begin += static_cast<std::size_t>(chunk)) {
    const std::size_t end = std::min(images.size(), begin + static_cast<std::size_t>(chunk));
    staged.clear();
    for (std::size_t i = begin; i < end; ++i) {
      staged.push_back({resize_bilinear(images[i], side), 0, Modality::image});
    }
    std::vector<std::size_t> rows(staged.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const ForwardResult fw = forward(net, make_batch(staged, rows, side));
    for (std::size_t i = 0; i < staged.size(); ++i) {
      const auto src = fw.embeddings.row(i);
      std::copy(src.begin(), src.end(), out.row(begin + i).begin());
    }
  }
  return out;
}

std::string format_stats_csv(std::span<const EpochStats> stats) {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,total_loss,ce_loss,center_loss,wall_ms\n";
  for (const auto& s : stats) {
    out << s.epoch << ',' << s.total_loss << ',' << s.ce_loss << ',' << s.center_loss << ','
        << s.wall_ms << '\n';
  }
  return out.str();
}

}  // namespace xmodal
