#pragma once

#include <functional>
#include <span>
#include <vector>

#include "xmodal/data.hpp"
#include "xmodal/loss.hpp"
#include "xmodal/network.hpp"
#include "xmodal/optimizer.hpp"

namespace xmodal {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 45;
  double center_alpha = 0.5;
  AdamConfig adam;
};

struct EpochStats {
  int epoch = 0;
  double total_loss = 0.0;
  double ce_loss = 0.0;
  double center_loss = 0.0;  // mean per sample, before lambda
  double wall_ms = 0.0;
};

struct TrainResult {
  EmbeddingNet net;
  CenterTable centers;
  AdamState adam;
  int epochs_done = 0;
  std::vector<EpochStats> stats;  // epochs run in this process
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Packs instances into a batch tensor with pixels mapped to [-0.5, 0.5].
Batch make_batch(std::span<const TrainingInstance> instances, std::span<const std::size_t> rows,
                 int input_side);

// Shuffled mini-batch loop: forward, total_loss, backward, adam_step,
// update_centers. Throws NumericalError naming the first non-finite tensor.
TrainResult train(std::span<const TrainingInstance> dataset, const NetworkConfig& config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

// Continues training from an existing state (for resumed checkpoints).
void train_more(TrainResult& state, std::span<const TrainingInstance> dataset,
                const TrainConfig& train_config, const EpochCallback& on_epoch = {});

// Embeds images in fixed-size chunks; rows match input order.
Matrix embed_images(const EmbeddingNet& net, std::span<const RgbImage> images, int chunk = 64);

std::string format_stats_csv(std::span<const EpochStats> stats);

}  // namespace xmodal
