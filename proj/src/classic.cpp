#include "petrecon/classic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "petrecon/errors.hpp"

namespace petrecon::recon {

void PoissonData::validate() const {
  if (!P || !counts || !scatter || !randoms) throw ConfigError("PoissonData is incomplete");
  require_same_shape(*counts, *scatter, "PoissonData");
  require_same_shape(*counts, *randoms, "PoissonData");
  if (counts->n_angles() != P->geometry().n_angles || counts->n_bins() != P->geometry().n_bins) {
    throw DimensionError("PoissonData: sinogram does not match system matrix");
  }
}

Sinogram PoissonData::expected(const Volume& x) const {
  Sinogram ybar = projector::forward_project(*P, x);
  require_same_shape(ybar, *counts, "expected counts");
  for (std::size_t i = 0; i < ybar.size(); ++i) ybar[i] += (*scatter)[i] + (*randoms)[i];
  return ybar;
}

double poisson_loglik(const Sinogram& y, const Sinogram& ybar) {
  require_same_shape(y, ybar, "poisson_loglik");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > 0.0) {
      if (!(ybar[i] > 0.0)) return -std::numeric_limits<double>::infinity();
      acc += y[i] * std::log(ybar[i]);
    }
    acc -= ybar[i];
  }
  return acc;
}

double poisson_loglik(const PoissonData& data, const Volume& x) {
  return poisson_loglik(*data.counts, data.expected(x));
}

namespace {

// P^T (y / ybar) with 0/0 treated as 0.
Volume ratio_backprojection(const PoissonData& data, const Volume& x) {
  Sinogram ratio = data.expected(x);
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    const double y = (*data.counts)[i];
    ratio[i] = (y > 0.0 && ratio[i] > 0.0) ? y / ratio[i] : 0.0;
  }
  return projector::back_project(*data.P, ratio);
}

void check_volume(const PoissonData& data, const Volume& x) {
  data.validate();
  if (x.grid().nx != data.P->grid().nx || x.grid().ny != data.P->grid().ny ||
      x.grid().nz != data.counts->n_slices()) {
    throw DimensionError("image grid does not match data");
  }
}

}  // namespace

Volume loglik_gradient(const PoissonData& data, const Volume& x) {
  check_volume(data, x);
  Volume g = ratio_backprojection(data, x);
  const auto p = data.P->sensitivity();
  const std::size_t n = p.size();
  for (std::size_t j = 0; j < g.size(); ++j) g[j] -= p[j % n];
  return g;
}

Volume em_step(const PoissonData& data, const Volume& x) {
  check_volume(data, x);
  Volume out = ratio_backprojection(data, x);
  const auto p = data.P->sensitivity();
  const std::size_t n = p.size();
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double pj = p[j % n];
    out[j] = pj > 0.0 ? x[j] * out[j] / pj : 0.0;
  }
  return out;
}

double em_surrogate_from(const Volume& x, const Volume& x_em, std::span<const double> sensitivity) {
  require_same_grid(x, x_em, "em_surrogate");
  const std::size_t n = sensitivity.size();
  double q = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double pj = sensitivity[j % n];
    if (!(pj > 0.0)) continue;
    if (x_em[j] > 0.0) {
      if (!(x[j] > 0.0)) return -std::numeric_limits<double>::infinity();
      q += pj * x_em[j] * std::log(x[j]);
    }
    q -= pj * x[j];
  }
  return q;
}

double em_surrogate(const PoissonData& data, const Volume& x, const Volume& x_prev) {
  return em_surrogate_from(x, em_step(data, x_prev), data.P->sensitivity());
}

Volume uniform_initial_image(const PoissonData& data) {
  data.validate();
  ImageGrid grid = data.P->grid();
  grid.nz = data.counts->n_slices();
  const double total_p = sum(data.P->sensitivity()) * grid.nz;
  const double value = sum(data.counts->values()) / total_p;
  if (!(value > 0.0)) throw DomainError("cannot initialize from an empty sinogram");
  return Volume(grid, value);
}

void ReconConfig::validate() const {
  if (iterations < 0) throw ConfigError("iteration count must be >= 0");
  for (int s : snapshots) {
    if (s < 1 || s > iterations) throw ConfigError("snapshot iterations must lie in [1, iterations]");
  }
}

namespace {
Volume initial_image(const PoissonData& data, const ReconConfig& cfg) {
  if (!cfg.initial) return uniform_initial_image(data);
  check_volume(data, *cfg.initial);
  const auto p = data.P->sensitivity();
  for (std::size_t j = 0; j < cfg.initial->size(); ++j) {
    if (p[j % p.size()] > 0.0 && !((*cfg.initial)[j] > 0.0)) {
      throw DomainError("initial image must be positive on voxels with sensitivity");
    }
  }
  return *cfg.initial;
}
}  // namespace

ReconResult mlem(const PoissonData& data, const ReconConfig& cfg) {
  cfg.validate();
  ReconResult out{initial_image(data, cfg), {}};
  for (int it = 1; it <= cfg.iterations; ++it) {
    out.image = em_step(data, out.image);
    if (std::find(cfg.snapshots.begin(), cfg.snapshots.end(), it) != cfg.snapshots.end()) {
      out.snapshots[it] = out.image;
    }
  }
  return out;
}

FairValue fair_penalty(double t, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("fair penalty needs sigma > 0");
  const double a = std::abs(t);
  return {sigma * (a / sigma - std::log1p(a / sigma)), t / (sigma + a)};
}

double fair_roughness(const Volume& x, double sigma) {
  const auto& g = x.grid();
  double acc = 0.0;
  for (int z = 0; z < g.nz; ++z) {
    for (int y = 0; y < g.ny; ++y) {
      for (int xi = 0; xi < g.nx; ++xi) {
        const double v = x.at(xi, y, z);
        if (xi + 1 < g.nx) acc += fair_penalty(v - x.at(xi + 1, y, z), sigma).value;
        if (y + 1 < g.ny) acc += fair_penalty(v - x.at(xi, y + 1, z), sigma).value;
      }
    }
  }
  return acc;
}

void PenaltyConfig::validate() const {
  if (beta < 0.0) throw ConfigError("penalty beta must be >= 0");
  if (!(sigma_fraction > 0.0)) throw ConfigError("penalty sigma_fraction must be > 0");
  if (warmup_iterations < 0) throw ConfigError("warm-up iterations must be >= 0");
}

double penalized_objective(const PoissonData& data, const Volume& x, double beta, double sigma) {
  return poisson_loglik(data, x) - beta * fair_roughness(x, sigma);
}

MapEmResult mapem_fair(const PoissonData& data, const ReconConfig& cfg, const PenaltyConfig& pen) {
  cfg.validate();
  pen.validate();
  Volume x = initial_image(data, cfg);
  for (int it = 0; it < pen.warmup_iterations; ++it) x = em_step(data, x);

  MapEmResult out;
  out.sigma = pen.sigma_fraction * mean(x.values());
  if (!(out.sigma > 0.0)) throw DomainError("fair penalty sigma collapsed to zero");
  const double sigma = out.sigma;
  const auto& g = x.grid();
  const auto p = data.P->sensitivity();

  for (int it = 1; it <= cfg.iterations; ++it) {
    const Volume xem = em_step(data, x);
    Volume next(g);
    for (int z = 0; z < g.nz; ++z) {
      for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
          const std::size_t j = g.index(ix, iy, z);
          const double pj = p[j % p.size()];
          if (!(pj > 0.0)) {
            next[j] = 0.0;
            continue;
          }
          if (pen.beta == 0.0) {
            next[j] = xem[j];
            continue;
          }
          const double xj = x[j];
          double w_sum = 0.0;
          double wm_sum = 0.0;
          auto neighbour = [&](int nx_, int ny_) {
            if (nx_ < 0 || nx_ >= g.nx || ny_ < 0 || ny_ >= g.ny) return;
            const double xk = x.at(nx_, ny_, z);
            const double w = 1.0 / (sigma + std::abs(xj - xk));
            w_sum += w;
            wm_sum += w * (xj + xk);
          };
          neighbour(ix - 1, iy);
          neighbour(ix + 1, iy);
          neighbour(ix, iy - 1);
          neighbour(ix, iy + 1);
          // a x^2 + b x - p xem = 0, a = 2 beta W, b = p - beta sum w (xj + xk).
          const double a = 2.0 * pen.beta * w_sum;
          const double b = pj - pen.beta * wm_sum;
          const double c = pj * xem[j];
          if (a == 0.0) {
            next[j] = xem[j];
          } else {
            const double disc = std::sqrt(b * b + 4.0 * a * c);
            next[j] = b > 0.0 ? 2.0 * c / (b + disc) : (disc - b) / (2.0 * a);
          }
        }
      }
    }
    x = std::move(next);
    if (std::find(cfg.snapshots.begin(), cfg.snapshots.end(), it) != cfg.snapshots.end()) {
      out.snapshots[it] = x;
    }
  }
  out.image = std::move(x);
  return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma_vox) {
  if (sigma_vox <= 0.0) return {1.0};
  const int radius = std::max(1, static_cast<int>(std::ceil(6.0 * sigma_vox)));
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma_vox * sigma_vox));
    total += k[i + radius];
  }
  for (auto& v : k) v /= total;
  return k;
}

// Convolves every line along `axis` (0 = x, 1 = y, 2 = z).
void filter_axis(Volume& v, const std::vector<double>& kernel, int axis) {
  if (kernel.size() == 1) return;
  const auto& g = v.grid();
  const int radius = static_cast<int>(kernel.size() / 2);
  const int n = axis == 0 ? g.nx : axis == 1 ? g.ny : g.nz;
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(g.nx) : g.slice_size();
  const Volume src = v;
  std::vector<double> line(n);
  for (int z = 0; z < (axis == 2 ? 1 : g.nz); ++z) {
    for (int y = 0; y < (axis == 1 ? 1 : g.ny); ++y) {
      for (int x = 0; x < (axis == 0 ? 1 : g.nx); ++x) {
        const std::size_t base = g.index(x, y, z);
        for (int i = 0; i < n; ++i) {
          double acc = 0.0;
          for (int k = -radius; k <= radius; ++k) {
            const int s = std::clamp(i + k, 0, n - 1);
            acc += kernel[k + radius] * src[base + s * stride];
          }
          line[i] = acc;
        }
        for (int i = 0; i < n; ++i) v[base + i * stride] = line[i];
      }
    }
  }
}

}  // namespace

Volume gaussian_postfilter(const Volume& x, double fwhm_mm) {
  if (fwhm_mm < 0.0) throw DomainError("FWHM must be >= 0");
  if (fwhm_mm == 0.0) return x;
  const double to_sigma = 1.0 / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  Volume out = x;
  filter_axis(out, gaussian_kernel(fwhm_mm * to_sigma / x.grid().voxel_size), 0);
  filter_axis(out, gaussian_kernel(fwhm_mm * to_sigma / x.grid().voxel_size), 1);
  filter_axis(out, gaussian_kernel(fwhm_mm * to_sigma / x.grid().slice_thickness), 2);
  return out;
}

}  // namespace petrecon::recon
