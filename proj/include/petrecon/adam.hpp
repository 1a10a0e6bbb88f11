#pragma once

#include <vector>

#include "petrecon/network.hpp"

namespace petrecon::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// Moment accumulators shaped like the weight blocks.
struct AdamState {
  AdamConfig config;
  long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

AdamState make_adam(const NetworkWeights& w, const AdamConfig& config = {});

/// Bias-corrected Adam update of every trainable block. Non-trainable blocks
/// (batch-norm running statistics) are left alone.
void adam_step(AdamState& state, NetworkWeights& w, const std::vector<std::vector<double>>& grads);

}  // namespace petrecon::nn
