#pragma once

#include <cstdint>

#include "petrecon/projector.hpp"
#include "petrecon/sinogram.hpp"
#include "petrecon/volume.hpp"

namespace petrecon::acquisition {

struct AcquisitionConfig {
  double target_true_counts = 2e5;  // expected trues per slice
  double background_fraction = 0.6;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Expected scatters and randoms per bin.
struct MeanComponents {
  Sinogram scatter;
  Sinogram randoms;
};

struct Acquisition {
  Sinogram counts;
  MeanComponents background;
  /// Factor applied to the input activity so that the expected trues hit the
  /// target; the noise-free mean is P (scale * x) + s + r.
  double activity_scale = 1.0;
};

/// Noise-free prompts P x + s + r.
Sinogram expected_prompts(const projector::SystemMatrix& P, const Volume& x, const MeanComponents& bg);

/// Scales x so that sum(P x) = target_true_counts * n_slices, adds a uniform
/// background making up `background_fraction` of the summed noise-free
/// prompts (split evenly between scatter and randoms) and draws independent
/// Poisson counts. Slice z uses its own RNG stream derived from (seed, z).
Acquisition simulate_counts(const projector::SystemMatrix& P, const Volume& x, const AcquisitionConfig& cfg);

/// Binomial thinning of every bin with keep-probability `ratio` in (0, 1].
Sinogram thin_counts(const Sinogram& y, double ratio, std::uint64_t seed);

/// Background means scaled by `ratio` (the means matching thinned data).
MeanComponents scale_background(const MeanComponents& bg, double ratio);

}  // namespace petrecon::acquisition
