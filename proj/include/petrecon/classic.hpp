#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "petrecon/projector.hpp"
#include "petrecon/sinogram.hpp"
#include "petrecon/volume.hpp"

namespace petrecon::recon {

/// Measured counts with the known additive background of their mean,
/// ybar = P x + s + r.
struct PoissonData {
  const projector::SystemMatrix* P = nullptr;
  const Sinogram* counts = nullptr;
  const Sinogram* scatter = nullptr;
  const Sinogram* randoms = nullptr;

  Sinogram expected(const Volume& x) const;
  void validate() const;
};

/// sum_i y_i log ybar_i - ybar_i (log y_i! dropped). Returns -infinity when
/// some y_i > 0 has ybar_i <= 0.
double poisson_loglik(const Sinogram& y, const Sinogram& ybar);
double poisson_loglik(const PoissonData& data, const Volume& x);

/// Gradient of the log-likelihood: P^T (y / ybar) - p.
Volume loglik_gradient(const PoissonData& data, const Volume& x);

/// One EM data-fit update x_j / p_j * sum_i P_ij y_i / ybar_i. Voxels with
/// zero sensitivity stay at 0.
Volume em_step(const PoissonData& data, const Volume& x);

/// EM surrogate of the log-likelihood built at x_prev, up to a constant:
///   Q(x; x_prev) = sum_j p_j (xem_j log x_j - x_j),  xem = em_step(x_prev).
/// Q(x; x_prev) - Q(x_prev; x_prev) <= L(x) - L(x_prev), with equal gradients
/// at x = x_prev. Voxels with p_j = 0 contribute nothing.
double em_surrogate(const PoissonData& data, const Volume& x, const Volume& x_prev);
double em_surrogate_from(const Volume& x, const Volume& x_em, std::span<const double> sensitivity);

/// Uniform image of value sum(y) / sum_j p_j over the data's slices.
Volume uniform_initial_image(const PoissonData& data);

struct ReconConfig {
  int iterations = 60;
  std::vector<int> snapshots{20, 40, 60};
  std::optional<Volume> initial;

  void validate() const;
};

struct ReconResult {
  Volume image;
  std::map<int, Volume> snapshots;
};

ReconResult mlem(const PoissonData& data, const ReconConfig& cfg);

struct FairValue {
  double value;
  double derivative;
};
/// sigma * (|t|/sigma - log(1 + |t|/sigma)) and its derivative t / (sigma + |t|).
FairValue fair_penalty(double t, double sigma);

/// Sum of the fair penalty over 4-neighbour in-plane pairs (each pair once).
double fair_roughness(const Volume& x, double sigma);

struct PenaltyConfig {
  double beta = 0.0;
  double sigma_fraction = 1e-5;  // sigma = fraction * mean(warm-up image)
  int warmup_iterations = 10;

  void validate() const;
};

struct MapEmResult {
  Volume image;
  std::map<int, Volume> snapshots;  // keyed by MAP iteration (after warm-up)
  double sigma = 0.0;
};

/// L(x) - beta * fair_roughness(x, sigma).
double penalized_objective(const PoissonData& data, const Volume& x, double beta, double sigma);

/// MAP-EM for the fair penalty: `warmup_iterations` of MLEM, then
/// `cfg.iterations` updates maximizing the EM surrogate plus a separable
/// quadratic majorizer of the penalty (Huber curvature phi'(t)/t split per
/// voxel pair), solved per voxel in closed form. Monotone in
/// penalized_objective.
MapEmResult mapem_fair(const PoissonData& data, const ReconConfig& cfg, const PenaltyConfig& pen);

/// Separable 3D Gaussian with sigma = fwhm / (2 sqrt(2 ln 2)) in voxel units
/// per axis, kernel truncated at 6 sigma and normalized, replicate borders.
Volume gaussian_postfilter(const Volume& x, double fwhm_mm);

}  // namespace petrecon::recon
