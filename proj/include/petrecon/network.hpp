#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "petrecon/tensor.hpp"
#include "petrecon/volume.hpp"

namespace petrecon::nn {

/// Residual encoder-decoder: per scale, `convs_per_scale` blocks of
/// [3x3 conv -> batch norm -> ReLU]; stride-2 convs go down a scale and
/// stride-2 transposed convs come back up, with additive skips per scale. A
/// final 3x3 conv produces one channel, to which the centre input channel is
/// added. Convolutions use replicate padding.
struct NetworkConfig {
  int in_channels = 5;
  std::vector<int> channels{16, 32, 64};
  int convs_per_scale = 2;
  int kernel_size = 3;
  bool batch_norm = true;
  bool residual = true;
  double bn_momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
  double bn_epsilon = 1e-5;

  int scales() const { return static_cast<int>(channels.size()); }
  int center_channel() const { return in_channels / 2; }
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct ParamBlock {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
  bool trainable = true;
};

struct NetworkWeights {
  NetworkConfig config;
  /// Power of two applied to inputs (and undone on outputs) so that the
  /// layers see O(1) intensities; exact in floating point.
  double input_scale = 1.0;
  std::vector<ParamBlock> blocks;

  std::size_t parameter_count() const;
};

/// Block names and shapes implied by a configuration, in storage order.
std::vector<ParamBlock> expected_blocks(const NetworkConfig& config);

/// He-normal convolution weights, unit BN scales, zero shifts/biases.
NetworkWeights init_weights(const NetworkConfig& config, std::uint64_t seed);

/// All convolution weights, biases and BN scales/shifts zero: with the
/// residual skip the network returns the centre input channel.
NetworkWeights identity_weights(const NetworkConfig& config);

enum class Mode { Train, Eval };

/// Train mode normalizes with batch statistics; eval mode with the running
/// statistics stored in the weights.
Tensor forward(const NetworkWeights& w, const Tensor& input, Mode mode);

/// Mean squared error.
double l2_loss(const Tensor& pred, const Tensor& label);

struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> var;  // unbiased
};

struct WeightGradients {
  double loss = 0.0;
  Tensor prediction;
  std::vector<std::vector<double>> grads;  // one per block; zero for non-trainable blocks
  std::vector<BatchNormStats> batch_stats; // one per BN layer
};

/// Loss and exact gradients of l2_loss(forward(w, input, Train), label).
WeightGradients backward_weights(const NetworkWeights& w, const Tensor& input, const Tensor& label);

/// Folds one batch's statistics into the running means/variances.
void update_running_statistics(NetworkWeights& w, const std::vector<BatchNormStats>& stats);

struct InputVjp {
  Tensor output;
  Tensor gradient;  // J^T cotangent, input-shaped
};
InputVjp vjp_input(const NetworkWeights& w, const Tensor& input, const Tensor& cotangent,
                   Mode mode = Mode::Eval);

/// Stacks slice k-2..k+2 (replicate at the volume ends) as the five input
/// channels of batch item k.
Tensor slice_windows(const Volume& v, int in_channels = 5);

/// Network applied slice by slice to a volume (eval mode, no clamping).
Volume apply_to_volume(const NetworkWeights& w, const Volume& alpha);

struct VolumeVjp {
  Volume output;
  Volume gradient;
};
/// Output volume and the gradient of <output, cotangent> with respect to the
/// input volume, summing each window channel back onto the slice it came from.
VolumeVjp volume_vjp(const NetworkWeights& w, const Volume& alpha, const Volume& cotangent);

/// apply_to_volume with negative outputs clamped to zero.
Volume denoise_volume(const NetworkWeights& w, const Volume& volume);

}  // namespace petrecon::nn
