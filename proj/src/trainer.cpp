#include "petrecon/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "petrecon/random.hpp"

namespace petrecon::nn {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (max_shift < 0) throw ConfigError("max_shift must be >= 0");
  adam.validate();
}

Tensor augment(const Tensor& t, const Augmentation& a) {
  const Shape s = t.shape();
  const int turns = ((a.quarter_turns % 4) + 4) % 4;
  if (turns % 2 == 1 && s.h != s.w) throw DimensionError("quarter-turn rotation needs square planes");
  Tensor out(s);
  const int h = s.h;
  const int w = s.w;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          // Inverse map from output pixel to source pixel: undo shift, flips, then rotation.
          int sy = std::clamp(y - a.shift_y, 0, h - 1);
          int sx = std::clamp(x - a.shift_x, 0, w - 1);
          if (a.flip_x) sx = w - 1 - sx;
          if (a.flip_y) sy = h - 1 - sy;
          int ry = sy;
          int rx = sx;
          for (int k = 0; k < turns; ++k) {
            const int ty = rx;
            const int tx = w - 1 - ry;
            ry = ty;
            rx = tx;
          }
          out.at(n, c, y, x) = t.at(n, c, ry, rx);
        }
      }
    }
  }
  return out;
}

double choose_input_scale(const std::vector<TrainingPair>& pairs) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& p : pairs) {
    for (double v : p.label.values()) total += v;
    count += p.label.numel();
  }
  const double m = count ? total / static_cast<double>(count) : 0.0;
  if (!(m > 0.0) || !std::isfinite(m)) return 1.0;
  return std::ldexp(1.0, static_cast<int>(std::lround(-std::log2(m))));
}

namespace {

Tensor stack(const std::vector<const Tensor*>& items) {
  const Shape s0 = items.front()->shape();
  Tensor out(Shape{static_cast<int>(items.size()), s0.c, s0.h, s0.w});
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!(items[i]->shape() == s0)) throw DimensionError("training pairs must share a shape");
    std::copy(items[i]->values().begin(), items[i]->values().end(), out.item(static_cast<int>(i)).begin());
  }
  return out;
}

}  // namespace

TrainResult train(const std::vector<TrainingPair>& pairs, const NetworkConfig& config, const TrainConfig& cfg,
                  const NetworkWeights* init, const EpochCallback& on_epoch) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("training set is empty");
  for (const auto& p : pairs) {
    const Shape si = p.input.shape();
    const Shape sl = p.label.shape();
    if (si.n != 1 || sl.n != 1 || sl.c != 1 || si.h != sl.h || si.w != sl.w) {
      throw DimensionError("training pair input/label shapes disagree");
    }
  }

  TrainResult result;
  if (init) {
    if (!(init->config == config)) throw ConfigError("initial weights do not match the network configuration");
    result.weights = *init;
  } else {
    result.weights = init_weights(config, derive_seed(cfg.seed, {0x1417}));
    result.weights.input_scale = choose_input_scale(pairs);
  }
  NetworkWeights& w = result.weights;
  AdamState adam = make_adam(w, cfg.adam);
  std::mt19937_64 rng(derive_seed(cfg.seed, {0x5eed}));
  const bool square = pairs.front().input.shape().h == pairs.front().input.shape().w;

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Tensor> inputs;
      std::vector<Tensor> labels;
      inputs.reserve(end - start);
      labels.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const auto& p = pairs[order[i]];
        if (cfg.augment) {
          Augmentation a;
          a.quarter_turns = square ? static_cast<int>(rng() % 4) : 2 * static_cast<int>(rng() % 2);
          a.flip_x = rng() % 2;
          a.flip_y = rng() % 2;
          const auto span = static_cast<std::uint64_t>(2 * cfg.max_shift + 1);
          a.shift_x = static_cast<int>(rng() % span) - cfg.max_shift;
          a.shift_y = static_cast<int>(rng() % span) - cfg.max_shift;
          inputs.push_back(augment(p.input, a));
          labels.push_back(augment(p.label, a));
        } else {
          inputs.push_back(p.input);
          labels.push_back(p.label);
        }
      }
      std::vector<const Tensor*> in_ptrs;
      std::vector<const Tensor*> lab_ptrs;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        in_ptrs.push_back(&inputs[i]);
        lab_ptrs.push_back(&labels[i]);
      }
      const WeightGradients g = backward_weights(w, stack(in_ptrs), stack(lab_ptrs));
      if (!std::isfinite(g.loss)) throw NumericalError("training loss became non-finite at epoch " + std::to_string(epoch));
      adam_step(adam, w, g.grads);
      update_running_statistics(w, g.batch_stats);
      loss_sum += g.loss;
      ++batches;
    }
    const double epoch_loss = loss_sum / batches;
    result.loss_history.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
    adam.config.learning_rate *= cfg.lr_decay;
  }
  return result;
}

}  // namespace petrecon::nn
