#include "petrecon/adam.hpp"

#include <cmath>

namespace petrecon::nn {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
}

AdamState make_adam(const NetworkWeights& w, const AdamConfig& config) {
  config.validate();
  AdamState s{config, 0, {}, {}};
  for (const auto& b : w.blocks) {
    s.m.emplace_back(b.values.size(), 0.0);
    s.v.emplace_back(b.values.size(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, NetworkWeights& w, const std::vector<std::vector<double>>& grads) {
  if (grads.size() != w.blocks.size() || state.m.size() != w.blocks.size()) {
    throw DimensionError("adam_step: gradient blocks do not match the weights");
  }
  const auto& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < w.blocks.size(); ++b) {
    auto& block = w.blocks[b];
    if (!block.trainable) continue;
    const auto& g = grads[b];
    if (g.size() != block.values.size()) throw DimensionError("adam_step: block '" + block.name + "' size mismatch");
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      block.values[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

}  // namespace petrecon::nn
