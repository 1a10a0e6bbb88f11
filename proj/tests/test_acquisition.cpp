#include <doctest.h>

#include <cmath>

#include "petrecon/acquisition.hpp"
#include "petrecon/errors.hpp"
#include "petrecon/parallel.hpp"

using namespace petrecon;
using namespace petrecon::acquisition;

namespace {

struct Fixture {
  ImageGrid grid{16, 16, 3, 4.0, 4.0};
  projector::ScannerGeometry geom{24, 24, 4.0, 2};
  projector::SystemMatrix P = projector::build_system_matrix(geom, grid);
  Volume x{grid, 0.0};

  Fixture() {
    for (int z = 0; z < grid.nz; ++z)
      for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix) {
          const double r = std::hypot(grid.x_center(ix), grid.y_center(iy));
          x.at(ix, iy, z) = r < 24.0 ? 1.0 + 0.5 * z : 0.0;
        }
  }
};

}  // namespace

TEST_CASE("expected counts hit the target and the background fraction") {
  Fixture f;
  AcquisitionConfig cfg;
  cfg.target_true_counts = 1e4;
  const auto acq = simulate_counts(f.P, f.x, cfg);
  Volume scaled = f.x;
  for (auto& v : scaled.values()) v *= acq.activity_scale;
  const double trues = sum(projector::forward_project(f.P, scaled).values());
  CHECK(trues == doctest::Approx(1e4 * f.grid.nz).epsilon(1e-12));
  const double s = sum(acq.background.scatter.values());
  const double r = sum(acq.background.randoms.values());
  CHECK(s == doctest::Approx(r).epsilon(1e-14));
  CHECK((s + r) / (s + r + trues) == doctest::Approx(0.6).epsilon(1e-12));
  for (double v : acq.background.scatter.values()) CHECK(v == acq.background.scatter[0]);
}

TEST_CASE("poisson counts: integer, non-negative, unbiased within 3 standard errors") {
  Fixture f;
  AcquisitionConfig cfg;
  cfg.target_true_counts = 2e4;
  const auto first = simulate_counts(f.P, f.x, cfg);
  Volume scaled = f.x;
  for (auto& v : scaled.values()) v *= first.activity_scale;
  const auto mean = expected_prompts(f.P, scaled, first.background);

  const int reps = 40;
  Sinogram acc(mean.n_slices(), mean.n_angles(), mean.n_bins());
  for (int k = 0; k < reps; ++k) {
    cfg.seed = 100 + k;
    const auto acq = simulate_counts(f.P, f.x, cfg);
    for (std::size_t i = 0; i < acc.size(); ++i) {
      CHECK(acq.counts[i] >= 0.0);
      CHECK(acq.counts[i] == std::floor(acq.counts[i]));
      acc[i] += acq.counts[i];
    }
  }
  // Total over all bins and reps: Poisson with known mean.
  const double expected_total = sum(mean.values()) * reps;
  CHECK(std::abs(sum(acc.values()) - expected_total) < 3.0 * std::sqrt(expected_total));
  // Per-slice totals.
  for (int z = 0; z < mean.n_slices(); ++z) {
    const double m = sum(mean.slice(z)) * reps;
    CHECK(std::abs(sum(acc.slice(z)) - m) < 3.0 * std::sqrt(m));
  }
}

TEST_CASE("simulation is reproducible per seed and independent of thread count") {
  Fixture f;
  AcquisitionConfig cfg;
  cfg.seed = 9;
  const auto a = simulate_counts(f.P, f.x, cfg);
  const auto b = simulate_counts(f.P, f.x, cfg);
  CHECK(a.counts == b.counts);
  set_max_threads(1);
  const auto serial = simulate_counts(f.P, f.x, cfg);
  set_max_threads(0);
  CHECK(serial.counts == a.counts);
  cfg.seed = 10;
  CHECK_FALSE(simulate_counts(f.P, f.x, cfg).counts == a.counts);
}

TEST_CASE("simulation rejects invalid input") {
  Fixture f;
  AcquisitionConfig cfg;
  cfg.background_fraction = 1.0;
  CHECK_THROWS_AS(simulate_counts(f.P, f.x, cfg), ConfigError);
  cfg = {};
  cfg.target_true_counts = 0.0;
  CHECK_THROWS_AS(simulate_counts(f.P, f.x, cfg), ConfigError);
  cfg = {};
  Volume neg = f.x;
  neg[0] = -1.0;
  CHECK_THROWS_AS(simulate_counts(f.P, neg, cfg), DomainError);
  CHECK_THROWS_AS(simulate_counts(f.P, Volume(f.grid, 0.0), cfg), ConfigError);
}

TEST_CASE("binomial thinning keeps the expected fraction and never exceeds the input") {
  Sinogram y(2, 10, 50, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(i % 37);
  const double ratio = 0.1;
  double kept = 0.0;
  const int reps = 20;
  for (int k = 0; k < reps; ++k) {
    const auto t = thin_counts(y, ratio, 50 + k);
    for (std::size_t i = 0; i < y.size(); ++i) {
      CHECK(t[i] <= y[i]);
      CHECK(t[i] >= 0.0);
    }
    kept += sum(t.values());
  }
  const double n = sum(y.values()) * reps;
  CHECK(std::abs(kept - ratio * n) < 3.0 * std::sqrt(n * ratio * (1 - ratio)));
  CHECK(thin_counts(y, 1.0, 1) == y);
  CHECK(thin_counts(y, 0.3, 4) == thin_counts(y, 0.3, 4));
  CHECK_THROWS_AS(thin_counts(y, 0.0, 1), DomainError);
  CHECK_THROWS_AS(thin_counts(y, 1.5, 1), DomainError);
  y[3] = 2.5;
  CHECK_THROWS_AS(thin_counts(y, 0.5, 1), DomainError);
}

TEST_CASE("background scaling is linear") {
  MeanComponents bg{Sinogram(1, 2, 3, 4.0), Sinogram(1, 2, 3, 2.0)};
  const auto s = scale_background(bg, 0.25);
  for (double v : s.scatter.values()) CHECK(v == 1.0);
  for (double v : s.randoms.values()) CHECK(v == 0.5);
}
