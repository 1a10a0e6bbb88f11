#include "petrecon/admm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace petrecon::admm {

namespace {

void require_finite(const Volume& v, const char* what, int iteration) {
  for (double x : v.values()) {
    if (!std::isfinite(x)) {
      std::ostringstream msg;
      msg << "non-finite " << what << " in ADMM iteration " << iteration;
      throw NumericalError(msg.str());
    }
  }
}

Volume sensitivity_volume(const projector::SystemMatrix& P, const ImageGrid& grid) {
  Volume s(grid);
  const auto p = P.sensitivity();
  for (int z = 0; z < grid.nz; ++z) std::copy(p.begin(), p.end(), s.slice(z).begin());
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  return m;
}

}  // namespace

void AdmmConfig::validate() const {
  if (rho && !(*rho > 0.0)) throw ConfigError("rho must be > 0");
  if (!(rho_scale > 0.0)) throw ConfigError("rho_scale must be > 0");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (sub_iterations < 1) throw ConfigError("sub_iterations must be >= 1");
  if (!(initial_step > 0.0)) throw ConfigError("initial_step must be > 0");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ConfigError("shrink must lie in (0, 1)");
  if (init_mlem_iterations < 1) throw ConfigError("init_mlem_iterations must be >= 1");
  for (int s : snapshots) {
    if (s < 1 || s > max_iterations) throw ConfigError("ADMM snapshots must lie in [1, max_iterations]");
  }
}

double x_update_voxel(double x_em, double c, double p, double rho) {
  if (p <= 0.0) return 0.0;
  // Root of rho x^2 + (p - rho c) x - p x_em = 0, written to avoid cancellation.
  const double b = c - p / rho;
  const double q = x_em * p / rho;
  const double disc = std::sqrt(b * b + 4.0 * q);
  if (b >= 0.0) return 0.5 * (b + disc);
  const double denom = disc - b;
  return denom > 0.0 ? 2.0 * q / denom : 0.0;
}

Volume x_update(const Volume& x_em, const Volume& f_alpha, const Volume& mu, double rho, const Volume& sensitivity) {
  require_same_grid(x_em, f_alpha, "x_update");
  require_same_grid(x_em, mu, "x_update");
  require_same_grid(x_em, sensitivity, "x_update");
  if (!(rho > 0.0)) throw DomainError("x_update needs rho > 0");
  Volume x(x_em.grid());
  for (std::size_t j = 0; j < x.size(); ++j) {
    x[j] = x_update_voxel(x_em[j], f_alpha[j] - mu[j], sensitivity[j], rho);
  }
  return x;
}

Volume dual_update(const Volume& mu, const Volume& x, const Volume& f_alpha) {
  require_same_grid(mu, x, "dual_update");
  require_same_grid(mu, f_alpha, "dual_update");
  Volume out(mu.grid());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = mu[j] + (x[j] - f_alpha[j]);
  return out;
}

double alpha_objective(const Volume& f_alpha, const Volume& z) {
  require_same_grid(f_alpha, z, "alpha_objective");
  double acc = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    const double d = f_alpha[j] - z[j];
    acc += d * d;
  }
  return 0.5 * acc;
}

AlphaResult alpha_subproblem(const nn::NetworkWeights& w, const Volume& alpha, const Volume& f_alpha, const Volume& z,
                             int sub_iterations, double step, double shrink) {
  require_same_grid(alpha, z, "alpha_subproblem");
  require_same_grid(alpha, f_alpha, "alpha_subproblem");
  if (sub_iterations < 1) throw ConfigError("sub_iterations must be >= 1");
  if (!(step > 0.0) || !(shrink > 0.0 && shrink < 1.0)) throw ConfigError("invalid alpha step parameters");

  AlphaResult r{alpha, f_alpha, {alpha_objective(f_alpha, z)}, step, 0};
  const double min_step = 1e-12 * step;
  Volume theta = alpha;
  double t = 1.0;
  int accepted = 0;
  while (accepted < sub_iterations && r.step >= min_step) {
    Volume residual(z.grid());
    const bool at_alpha = theta == r.alpha;
    Volume f_theta = at_alpha ? r.f_alpha : nn::apply_to_volume(w, theta);
    for (std::size_t j = 0; j < z.size(); ++j) residual[j] = f_theta[j] - z[j];
    const Volume grad = nn::volume_vjp(w, theta, residual).gradient;

    Volume cand(theta.grid());
    for (std::size_t j = 0; j < cand.size(); ++j) cand[j] = theta[j] - r.step * grad[j];
    Volume f_cand = nn::apply_to_volume(w, cand);
    const double h = alpha_objective(f_cand, z);
    if (!std::isfinite(h)) throw NumericalError("non-finite network output in the alpha subproblem");

    if (h <= r.objective.back()) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double k = (t - 1.0) / t_next;
      Volume next_theta(cand.grid());
      for (std::size_t j = 0; j < cand.size(); ++j) next_theta[j] = cand[j] + k * (cand[j] - r.alpha[j]);
      r.alpha = std::move(cand);
      r.f_alpha = std::move(f_cand);
      r.objective.push_back(h);
      theta = std::move(next_theta);
      t = t_next;
      ++accepted;
    } else {
      r.step *= shrink;
      ++r.rejected_steps;
      theta = r.alpha;
      t = 1.0;
    }
  }
  return r;
}

double auto_rho(const Volume& x, const Volume& sensitivity, double rho_scale) {
  require_same_grid(x, sensitivity, "auto_rho");
  double xmax = 0.0;
  for (double v : x.values()) xmax = std::max(xmax, v);
  if (!(xmax > 0.0)) throw NumericalError("cannot choose rho for an all-zero image");
  std::vector<double> xs;
  std::vector<double> ps;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j] > 1e-3 * xmax && sensitivity[j] > 0.0) {
      xs.push_back(x[j]);
      ps.push_back(sensitivity[j]);
    }
  }
  return rho_scale * median(ps) / median(xs);
}

AdmmResult reconstruct_admm(const recon::PoissonData& data, const nn::NetworkWeights& w, const AdmmConfig& cfg,
                            const FailureHandler& on_failure) {
  cfg.validate();
  data.validate();
  recon::ReconConfig init_cfg;
  init_cfg.iterations = cfg.init_mlem_iterations;
  init_cfg.snapshots = {};
  Volume x0 = recon::mlem(data, init_cfg).image;
  const Volume sens = sensitivity_volume(*data.P, x0.grid());

  AdmmResult result;
  AdmmState& s = result.state;
  s.rho = cfg.rho ? *cfg.rho : auto_rho(x0, sens, cfg.rho_scale);
  s.step = cfg.initial_step;
  s.x = x0;
  s.alpha = nn::apply_to_volume(w, x0);
  s.f_alpha = nn::apply_to_volume(w, s.alpha);
  s.mu = Volume(x0.grid());

  try {
    require_finite(s.alpha, "initial alpha", 0);
    require_finite(s.f_alpha, "network output", 0);
    for (int n = 1; n <= cfg.max_iterations; ++n) {
      const Volume x_em = recon::em_step(data, s.x);
      s.x = x_update(x_em, s.f_alpha, s.mu, s.rho, sens);

      Volume z(s.x.grid());
      for (std::size_t j = 0; j < z.size(); ++j) z[j] = s.x[j] + s.mu[j];
      AlphaResult a = alpha_subproblem(w, s.alpha, s.f_alpha, z, cfg.sub_iterations, s.step, cfg.shrink);
      s.alpha = std::move(a.alpha);
      s.f_alpha = std::move(a.f_alpha);
      s.step = a.step;
      require_finite(s.f_alpha, "network output", n);

      s.mu = dual_update(s.mu, s.x, s.f_alpha);

      Diagnostics d;
      d.iteration = n;
      d.loglik = recon::poisson_loglik(data, s.x);
      double diff = 0.0;
      for (std::size_t j = 0; j < z.size(); ++j) diff += (s.x[j] - s.f_alpha[j]) * (s.x[j] - s.f_alpha[j]);
      const double xn = norm2(s.x.values());
      d.residual = xn > 0.0 ? std::sqrt(diff) / xn : std::sqrt(diff);
      d.alpha_objective = a.objective.back();
      d.step = s.step;
      d.sub_objectives = std::move(a.objective);
      result.diagnostics.push_back(std::move(d));

      if (std::find(cfg.snapshots.begin(), cfg.snapshots.end(), n) != cfg.snapshots.end()) {
        Volume snap = s.f_alpha;
        for (auto& v : snap.values()) v = std::max(v, 0.0);
        result.snapshots.emplace(n, std::move(snap));
      }
    }
  } catch (const NumericalError&) {
    if (on_failure) on_failure(s);
    throw;
  }

  result.image = s.f_alpha;
  for (auto& v : result.image.values()) v = std::max(v, 0.0);
  return result;
}

}  // namespace petrecon::admm
