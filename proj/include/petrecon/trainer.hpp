#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "petrecon/adam.hpp"
#include "petrecon/network.hpp"

namespace petrecon::nn {

/// One 5-channel low-count input stack (1, 5, h, w) and its high-count label (1, 1, h, w).
struct TrainingPair {
  Tensor input;
  Tensor label;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  AdamConfig adam;
  double lr_decay = 1.0;  // learning rate multiplier applied after every epoch
  bool augment = true;    // random 90-degree rotations, flips and shifts
  int max_shift = 4;      // voxels
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainResult {
  NetworkWeights weights;
  std::vector<double> loss_history;  // mean mini-batch loss per epoch
};

/// Random rigid transform applied identically to a pair: rotation by
/// `quarter_turns` * 90 degrees, optional flips, then an integer shift with
/// replicate fill.
struct Augmentation {
  int quarter_turns = 0;
  bool flip_x = false;
  bool flip_y = false;
  int shift_x = 0;
  int shift_y = 0;
};
Tensor augment(const Tensor& t, const Augmentation& a);

/// Power of two closest to 1 / mean(label intensities).
double choose_input_scale(const std::vector<TrainingPair>& pairs);

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Shuffled mini-batch Adam on the mean squared error. Starts from
/// `init` when given, otherwise from init_weights(config, seed) with an
/// automatically chosen input scale.
TrainResult train(const std::vector<TrainingPair>& pairs, const NetworkConfig& config, const TrainConfig& cfg,
                  const NetworkWeights* init = nullptr, const EpochCallback& on_epoch = {});

}  // namespace petrecon::nn
