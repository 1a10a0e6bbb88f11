#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "petrecon/admm.hpp"

using namespace petrecon;
using namespace petrecon::admm;

namespace {

double surrogate(double x, double x_em, double c, double p, double rho) {
  return p * (x_em * std::log(x) - x) - 0.5 * rho * (x - c) * (x - c);
}

// Golden-section maximization of a unimodal function on [lo, hi].
double golden_max(const std::function<double(double)>& f, double lo, double hi) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < 400 && b - a > 1e-14 * std::max(1.0, b); ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

struct Problem {
  ImageGrid grid{16, 16, 3, 4.0, 4.0};
  projector::ScannerGeometry geom{24, 24, 4.0, 1};
  projector::SystemMatrix P = projector::build_system_matrix(geom, grid);
  Volume truth{grid, 0.0};
  Sinogram counts, scatter, randoms;

  explicit Problem(bool noisy) {
    std::mt19937_64 rng(2);
    for (int z = 0; z < grid.nz; ++z)
      for (int y = 0; y < grid.ny; ++y)
        for (int x = 0; x < grid.nx; ++x) {
          const double r = std::hypot(grid.x_center(x) - 3.0, grid.y_center(y));
          truth.at(x, y, z) = r < 24.0 ? (r < 8.0 ? 40.0 : 10.0 + z) : 0.0;
        }
    scatter = Sinogram(grid.nz, geom.n_angles, geom.n_bins, 1.0);
    randoms = scatter;
    counts = projector::forward_project(P, truth);
    for (auto& v : counts.values()) {
      v += 2.0;
      if (noisy) v = static_cast<double>(std::poisson_distribution<long long>(v)(rng));
    }
  }
  recon::PoissonData data() const { return {&P, &counts, &scatter, &randoms}; }
};

nn::NetworkConfig small_net() {
  nn::NetworkConfig c;
  c.channels = {4, 8};
  c.convs_per_scale = 1;
  return c;
}

Volume random_volume(const ImageGrid& g, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Volume v(g);
  for (auto& x : v.values()) x = u(rng);
  return v;
}

}  // namespace

TEST_CASE("x update hand values") {
  CHECK(x_update_voxel(1.0, 1.0, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(x_update_voxel(4.0, 0.0, 1.0, 2.0) == doctest::Approx((-1.0 + std::sqrt(33.0)) / 4.0).epsilon(1e-15));
  CHECK(x_update_voxel(0.0, 3.0, 1.0, 1.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(x_update_voxel(0.0, -3.0, 1.0, 1.0) == 0.0);
  CHECK(x_update_voxel(5.0, 2.0, 0.0, 1.0) == 0.0);
}

TEST_CASE("x update maximizes the per-voxel surrogate") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int draw = 0; draw < 1000; ++draw) {
    const double x_em = 0.01 + 100.0 * u(rng);
    const double c = -50.0 + 150.0 * u(rng);
    const double p = 0.1 + 10.0 * u(rng);
    const double rho = std::pow(10.0, -3.0 + 4.0 * u(rng));
    const double x = x_update_voxel(x_em, c, p, rho);
    REQUIRE(x > 0.0);
    const double deriv = p * (x_em / x - 1.0) - rho * (x - c);
    const double scale = p * (x_em / x + 1.0) + rho * (std::abs(x) + std::abs(c));
    CHECK(std::abs(deriv) <= 1e-10 * scale);
    const double hi = std::max({2.0 * x, 2.0 * x_em, std::abs(c) + x_em + 1.0});
    const double rough = golden_max([&](double t) { return surrogate(t, x_em, c, p, rho); }, 1e-12, hi);
    // Refine on the surrogate change relative to the rough point, which is
    // evaluated without cancellation.
    auto change = [&](double t) {
      const double d = t - rough;
      return p * x_em * std::log1p(d / rough) - p * d - 0.5 * rho * d * (d + 2.0 * (rough - c));
    };
    const double width = 1e-3 * rough;
    const double xg = golden_max(change, rough - width, rough + width);
    CHECK(std::abs(xg - x) <= 1e-8 * std::max(1.0, x));
  }
}

TEST_CASE("x update over a volume") {
  const ImageGrid g{2, 2, 1, 1.0, 1.0};
  const Volume xem(g, std::vector<double>{1, 4, 0, 2});
  const Volume fa(g, std::vector<double>{1, 0, 3, 5});
  const Volume mu(g, std::vector<double>{0, 0, 0, 1});
  const Volume p(g, std::vector<double>{1, 1, 1, 0});
  const Volume x = x_update(xem, fa, mu, 2.0, p);
  CHECK(x[0] == doctest::Approx(x_update_voxel(1, 1, 1, 2)).epsilon(1e-15));
  CHECK(x[1] == doctest::Approx((-1.0 + std::sqrt(33.0)) / 4.0).epsilon(1e-15));
  CHECK(x[2] == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(x[3] == 0.0);
  CHECK_THROWS_AS(x_update(xem, fa, mu, 0.0, p), DomainError);
  CHECK_THROWS_AS(x_update(xem, Volume(ImageGrid{3, 2, 1, 1.0, 1.0}), mu, 1.0, p), DimensionError);
}

TEST_CASE("dual update") {
  const ImageGrid g{3, 1, 1, 1.0, 1.0};
  const Volume mu(g, std::vector<double>{0.5, -1, 2});
  const Volume x(g, std::vector<double>{1, 2, 3});
  CHECK(dual_update(mu, x, x) == mu);
  const Volume zero(g, 0.0);
  const Volume shifted(g, std::vector<double>{0, 1, 2});
  CHECK(dual_update(zero, x, shifted) == Volume(g, 1.0));
  const Volume twice = dual_update(dual_update(mu, x, shifted), x, shifted);
  for (std::size_t j = 0; j < 3; ++j) CHECK(twice[j] == mu[j] + 2.0);
}

TEST_CASE("alpha subproblem with the identity network") {
  const auto w = nn::identity_weights(small_net());
  const ImageGrid g{8, 8, 3, 4.0, 4.0};
  const Volume alpha = random_volume(g, 1, 0.0, 2.0);
  const Volume z = random_volume(g, 2, 0.0, 2.0);
  SUBCASE("one unit step solves it exactly") {
    const auto r = alpha_subproblem(w, alpha, alpha, z, 3, 1.0, 0.5);
    for (std::size_t j = 0; j < z.size(); ++j) CHECK(std::abs(r.alpha[j] - z[j]) <= 1e-10);
    CHECK(r.objective.front() == doctest::Approx(alpha_objective(alpha, z)).epsilon(1e-15));
    CHECK(r.objective[1] <= 1e-20);
    CHECK(r.rejected_steps == 0);
  }
  SUBCASE("zero residual leaves alpha unchanged") {
    const auto r = alpha_subproblem(w, z, z, z, 4, 1.0, 0.5);
    CHECK(r.alpha == z);
  }
  SUBCASE("an oversized step is backtracked") {
    const auto r = alpha_subproblem(w, alpha, alpha, z, 3, 4.0, 0.5);
    CHECK(r.rejected_steps >= 1);
    for (std::size_t k = 1; k < r.objective.size(); ++k) CHECK(r.objective[k] <= r.objective[k - 1]);
    CHECK(r.objective.back() < 1e-6 * r.objective.front());
  }
}

TEST_CASE("alpha subproblem objective never increases for a random network") {
  auto w = nn::init_weights(small_net(), 4);
  for (auto& b : w.blocks)
    if (b.name == "out.weight")
      for (auto& v : b.values) v *= 10.0;
  const ImageGrid g{8, 8, 4, 4.0, 4.0};
  const Volume alpha = random_volume(g, 5, 0.5, 1.5);
  const Volume z = random_volume(g, 6, 0.0, 2.0);
  const Volume fa = nn::apply_to_volume(w, alpha);
  const auto r = alpha_subproblem(w, alpha, fa, z, 10, 5.0, 0.5);
  CHECK(r.objective.size() == 11);
  CHECK(r.rejected_steps >= 1);
  for (std::size_t k = 1; k < r.objective.size(); ++k) CHECK(r.objective[k] <= r.objective[k - 1]);
  CHECK(alpha_objective(r.f_alpha, z) == doctest::Approx(r.objective.back()).epsilon(1e-14));
  CHECK(r.f_alpha == nn::apply_to_volume(w, r.alpha));
}

TEST_CASE("automatic rho") {
  const ImageGrid g{4, 1, 1, 1.0, 1.0};
  const Volume x(g, std::vector<double>{1e-6, 2, 4, 10});
  const Volume p(g, std::vector<double>{100, 3, 5, 7});
  // Support excludes the first voxel; medians are 4 (x) and 5 (p).
  CHECK(auto_rho(x, p, 0.1) == doctest::Approx(0.1 * 5.0 / 4.0).epsilon(1e-15));
  CHECK_THROWS_AS(auto_rho(Volume(g, 0.0), p, 0.1), NumericalError);
}

TEST_CASE("config validation") {
  AdmmConfig c;
  c.rho = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.shrink = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.snapshots = {21};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("identity network: ADMM reduces to EM on noise-free data") {
  Problem prob(false);
  const auto data = prob.data();
  const auto w = nn::identity_weights(small_net());
  AdmmConfig cfg;
  cfg.max_iterations = 50;
  cfg.snapshots = {1, 50};
  const auto res = reconstruct_admm(data, w, cfg);
  REQUIRE(res.diagnostics.size() == 50);
  recon::ReconConfig mc;
  mc.iterations = cfg.init_mlem_iterations + cfg.max_iterations;
  mc.snapshots = {};
  const Volume ref = recon::mlem(data, mc).image;
  double diff = 0.0, nref = 0.0;
  for (std::size_t j = 0; j < ref.size(); ++j) {
    diff += (res.image[j] - ref[j]) * (res.image[j] - ref[j]);
    nref += ref[j] * ref[j];
  }
  CHECK(std::sqrt(diff / nref) < 0.01);
  CHECK(res.diagnostics.back().residual < 1e-6);
  CHECK(res.snapshots.at(50) == res.image);
  for (double v : res.image.values()) CHECK(v >= 0.0);
  for (double v : res.state.x.values()) CHECK(v >= 0.0);
}

TEST_CASE("ADMM with a random network is deterministic and reports diagnostics") {
  Problem prob(true);
  const auto data = prob.data();
  auto w = nn::init_weights(small_net(), 8);
  w.input_scale = 1.0 / 16.0;
  AdmmConfig cfg;
  cfg.max_iterations = 4;
  cfg.init_mlem_iterations = 10;
  const auto a = reconstruct_admm(data, w, cfg);
  const auto b = reconstruct_admm(data, w, cfg);
  CHECK(a.image == b.image);
  REQUIRE(a.diagnostics.size() == 4);
  for (const auto& d : a.diagnostics) {
    CHECK(std::isfinite(d.loglik));
    CHECK(d.residual >= 0.0);
    CHECK(d.sub_objectives.size() >= 1);
    CHECK(d.alpha_objective == d.sub_objectives.back());
    for (std::size_t k = 1; k < d.sub_objectives.size(); ++k) CHECK(d.sub_objectives[k] <= d.sub_objectives[k - 1]);
  }
  CHECK(a.diagnostics[0].iteration == 1);
  CHECK(a.state.rho > 0.0);
}

TEST_CASE("non-finite network output is reported with the last state") {
  Problem prob(true);
  auto w = nn::identity_weights(small_net());
  for (auto& b : w.blocks)
    if (b.name == "out.bias") b.values[0] = std::numeric_limits<double>::infinity();
  bool called = false;
  AdmmConfig cfg;
  cfg.max_iterations = 2;
  cfg.init_mlem_iterations = 2;
  CHECK_THROWS_AS(reconstruct_admm(prob.data(), w, cfg, [&](const AdmmState& s) { called = s.rho > 0.0; }),
                  NumericalError);
  CHECK(called);
}
