#include "petrecon/acquisition.hpp"

#include <algorithm>
#include <random>

#include "petrecon/errors.hpp"
#include "petrecon/parallel.hpp"
#include "petrecon/random.hpp"

namespace petrecon::acquisition {

void AcquisitionConfig::validate() const {
  if (!(target_true_counts > 0.0)) throw ConfigError("target_true_counts must be > 0");
  if (!(background_fraction >= 0.0 && background_fraction < 1.0)) {
    throw ConfigError("background_fraction must lie in [0, 1)");
  }
}

Sinogram expected_prompts(const projector::SystemMatrix& P, const Volume& x, const MeanComponents& bg) {
  Sinogram mean = projector::forward_project(P, x);
  require_same_shape(mean, bg.scatter, "expected_prompts");
  require_same_shape(mean, bg.randoms, "expected_prompts");
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += bg.scatter[i] + bg.randoms[i];
  return mean;
}

Acquisition simulate_counts(const projector::SystemMatrix& P, const Volume& x, const AcquisitionConfig& cfg) {
  cfg.validate();
  if (std::any_of(x.values().begin(), x.values().end(), [](double v) { return v < 0.0; })) {
    throw DomainError("simulate_counts: activity must be non-negative");
  }
  Sinogram trues = projector::forward_project(P, x);
  const double total = sum(trues.values());
  if (!(total > 0.0)) throw ConfigError("simulate_counts: activity projects to zero counts");

  Acquisition out;
  out.activity_scale = cfg.target_true_counts * trues.n_slices() / total;
  for (auto& v : trues.values()) v *= out.activity_scale;

  const double scaled_total = cfg.target_true_counts * trues.n_slices();
  const double background_total = cfg.background_fraction / (1.0 - cfg.background_fraction) * scaled_total;
  const double per_bin = 0.5 * background_total / static_cast<double>(trues.size());
  out.background.scatter = Sinogram(trues.n_slices(), trues.n_angles(), trues.n_bins(), per_bin);
  out.background.randoms = out.background.scatter;

  out.counts = Sinogram(trues.n_slices(), trues.n_angles(), trues.n_bins());
  parallel_for(trues.n_slices(), [&](std::size_t z) {
    std::mt19937_64 rng(derive_seed(cfg.seed, {z}));
    const auto mean = trues.slice(static_cast<int>(z));
    auto counts = out.counts.slice(static_cast<int>(z));
    for (std::size_t i = 0; i < mean.size(); ++i) {
      const double m = mean[i] + 2.0 * per_bin;
      counts[i] = m > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(m)(rng)) : 0.0;
    }
  });
  return out;
}

Sinogram thin_counts(const Sinogram& y, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw DomainError("thinning ratio must lie in (0, 1]");
  if (ratio == 1.0) return y;
  Sinogram out(y.n_slices(), y.n_angles(), y.n_bins());
  parallel_for(y.n_slices(), [&](std::size_t z) {
    std::mt19937_64 rng(derive_seed(seed, {z}));
    const auto in = y.slice(static_cast<int>(z));
    auto dst = out.slice(static_cast<int>(z));
    for (std::size_t i = 0; i < in.size(); ++i) {
      const auto n = static_cast<long long>(in[i]);
      if (n < 0 || static_cast<double>(n) != in[i]) throw DomainError("thinning needs non-negative integer counts");
      dst[i] = n > 0 ? static_cast<double>(std::binomial_distribution<long long>(n, ratio)(rng)) : 0.0;
    }
  });
  return out;
}

MeanComponents scale_background(const MeanComponents& bg, double ratio) {
  MeanComponents out = bg;
  for (auto& v : out.scatter.values()) v *= ratio;
  for (auto& v : out.randoms.values()) v *= ratio;
  return out;
}

}  // namespace petrecon::acquisition
