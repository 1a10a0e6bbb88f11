#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "petrecon/classic.hpp"
#include "petrecon/network.hpp"

namespace petrecon::admm {

struct AdmmConfig {
  std::optional<double> rho;  // unset: rho_scale * median(p) / median(x_init) over the support
  double rho_scale = 0.1;
  int max_iterations = 20;
  int sub_iterations = 5;
  double initial_step = 1.0;  // L
  double shrink = 0.5;
  int init_mlem_iterations = 30;
  std::vector<int> snapshots;  // outer iterations whose clamped f(alpha) is kept

  void validate() const;
};

/// Variables of the splitting: x is the image, alpha the network input,
/// mu the scaled dual. `f_alpha` caches f(alpha).
struct AdmmState {
  Volume x;
  Volume alpha;
  Volume mu;
  Volume f_alpha;
  double rho = 0.0;
  double step = 1.0;  // L, carried across outer iterations
};

/// Nonnegative maximizer of p (x_em log x - x) - rho/2 (x - c)^2.
double x_update_voxel(double x_em, double c, double p, double rho);

/// Voxelwise x_update_voxel with c = f_alpha - mu.
Volume x_update(const Volume& x_em, const Volume& f_alpha, const Volume& mu, double rho, const Volume& sensitivity);

/// mu + x - f_alpha.
Volume dual_update(const Volume& mu, const Volume& x, const Volume& f_alpha);

/// 1/2 ||f(alpha) - z||^2.
double alpha_objective(const Volume& f_alpha, const Volume& z);

struct AlphaResult {
  Volume alpha;
  Volume f_alpha;
  std::vector<double> objective;  // value at the start, then after every accepted step
  double step = 1.0;
  int rejected_steps = 0;
};

/// `sub_iterations` accelerated gradient steps alpha = theta - L grad on
/// 1/2 ||f(alpha) - z||^2. A step that raises the objective is discarded,
/// L is multiplied by `shrink` and momentum restarts from the last accepted
/// point, so the recorded objective never increases.
AlphaResult alpha_subproblem(const nn::NetworkWeights& w, const Volume& alpha, const Volume& f_alpha, const Volume& z,
                             int sub_iterations, double step, double shrink);

/// rho_scale * median(p_j) / median(x_j) over voxels with x_j > 1e-3 max(x).
double auto_rho(const Volume& x, const Volume& sensitivity, double rho_scale);

struct Diagnostics {
  int iteration = 0;
  double loglik = 0.0;   // of x
  double residual = 0.0; // ||x - f(alpha)|| / ||x||
  double alpha_objective = 0.0;
  double step = 0.0;
  std::vector<double> sub_objectives;
};

struct AdmmResult {
  Volume image;  // f(alpha) clamped at 0
  AdmmState state;
  std::vector<Diagnostics> diagnostics;
  std::map<int, Volume> snapshots;
};

using FailureHandler = std::function<void(const AdmmState&)>;

/// Starts from alpha = f(x_MLEM), x = x_MLEM, mu = 0 and alternates EM step,
/// x-update, alpha-subproblem and dual update. Non-finite network output
/// raises NumericalError after handing the last state to `on_failure`.
AdmmResult reconstruct_admm(const recon::PoissonData& data, const nn::NetworkWeights& w, const AdmmConfig& cfg,
                            const FailureHandler& on_failure = {});

}  // namespace petrecon::admm
