#include <doctest.h>

#include <cmath>
#include <random>

#include "petrecon/parallel.hpp"
#include "petrecon/projector.hpp"

using namespace petrecon;
using namespace petrecon::projector;

namespace {

ImageGrid grid(int nx, int ny, int nz, double vs = 4.0) { return ImageGrid{nx, ny, nz, vs, vs}; }

double segment_sum(const std::vector<RaySegment>& segs) {
  double s = 0.0;
  for (const auto& r : segs) s += r.length;
  return s;
}

// Chord of the axis-aligned box [-hx,hx]x[-hy,hy] along the line at signed
// distance `offset` from the origin with normal angle `a`, by brute-force
// clipping in a different parametrization.
double box_chord(double hx, double hy, double offset, double a) {
  const double nx = std::cos(a);
  const double ny = std::sin(a);
  const double px = offset * nx;
  const double py = offset * ny;
  const double dx = -ny;
  const double dy = nx;
  double lo = -1e300;
  double hi = 1e300;
  for (auto [p, d, h] : {std::tuple{px, dx, hx}, std::tuple{py, dy, hy}}) {
    if (std::abs(d) < 1e-15) {
      if (std::abs(p) > h) return 0.0;
      continue;
    }
    double t1 = (-h - p) / d;
    double t2 = (h - p) / d;
    if (t1 > t2) std::swap(t1, t2);
    lo = std::max(lo, t1);
    hi = std::min(hi, t2);
  }
  return std::max(0.0, hi - lo);
}

}  // namespace

TEST_CASE("single ray through a 1x1 grid has one full-voxel chord") {
  const auto segs = trace_ray(grid(1, 1, 1), 0.0, 0.0);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].voxel == 0);
  CHECK(segs[0].length == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("axis-aligned ray across a 2x1 grid crosses both voxels") {
  // Angle 0: the ray runs along +y at x = offset.
  const auto segs = trace_ray(grid(1, 2, 1), 0.0, 0.0);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].voxel == 0);
  CHECK(segs[1].voxel == 1);
  CHECK(segs[0].length == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(segs[1].length == doctest::Approx(4.0).epsilon(1e-14));
  // Angle pi/2: the ray runs along -x.
  const auto horiz = trace_ray(grid(2, 1, 1), 0.0, M_PI / 2);
  REQUIRE(horiz.size() == 2);
  CHECK(segment_sum(horiz) == doctest::Approx(8.0).epsilon(1e-14));
}

TEST_CASE("ray lengths sum to the bounding-box chord") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(0.0, M_PI);
  std::uniform_real_distribution<double> off(-40.0, 40.0);
  const auto g = grid(17, 12, 1, 3.3);
  for (int k = 0; k < 500; ++k) {
    const double a = ang(rng);
    const double o = off(rng);
    const double expected = box_chord(0.5 * 17 * 3.3, 0.5 * 12 * 3.3, o, a);
    CHECK(std::abs(segment_sum(trace_ray(g, o, a)) - expected) <= 1e-9);
  }
}

TEST_CASE("disk projection matches the analytic chord") {
  // Fine grid so the discretization error stays around a voxel length.
  const auto g = grid(128, 128, 1, 1.0);
  const double R = 40.0;
  Volume disk(g);
  for (int y = 0; y < g.ny; ++y) {
    for (int x = 0; x < g.nx; ++x) {
      if (std::hypot(g.x_center(x), g.y_center(y)) <= R) disk.at(x, y, 0) = 1.0;
    }
  }
  for (double d : {0.0, 10.3, 25.0, 35.5}) {
    for (double a : {0.0, 0.4, 1.2}) {
      double proj = 0.0;
      for (const auto& s : trace_ray(g, d, a)) proj += s.length * disk[s.voxel];
      CHECK(std::abs(proj - 2.0 * std::sqrt(R * R - d * d)) <= 2.0 * g.voxel_size);
    }
  }
}

TEST_CASE("system matrix: positive entries, sensitivity equals column sums") {
  const ScannerGeometry geom{24, 32, 2.5, 3};
  const auto g = grid(16, 16, 2, 3.0);
  const auto P = build_system_matrix(geom, g);
  CHECK(P.rows() == 24u * 32u);
  CHECK(P.cols() == 256u);
  std::vector<double> colsum(P.cols(), 0.0);
  for (std::size_t r = 0; r < P.rows(); ++r) {
    const auto c = P.row_columns(r);
    const auto v = P.row_values(r);
    for (std::size_t k = 0; k < c.size(); ++k) {
      CHECK(v[k] > 0.0);
      colsum[c[k]] += v[k];
    }
  }
  for (std::size_t j = 0; j < P.cols(); ++j) {
    CHECK(std::abs(P.sensitivity()[j] - colsum[j]) <= 1e-12 * colsum[j]);
  }
}

TEST_CASE("field of view must cover the grid") {
  CHECK_THROWS_AS(build_system_matrix({10, 4, 1.0, 1}, grid(16, 16, 1)), ConfigError);
  CHECK_THROWS_AS(build_system_matrix({0, 4, 1.0, 1}, grid(2, 2, 1)), ConfigError);
  CHECK_THROWS_AS(build_system_matrix({4, 4, 0.0, 1}, grid(2, 2, 1)), ConfigError);
}

TEST_CASE("forward and back projection") {
  const ScannerGeometry geom{20, 24, 3.0, 2};
  const auto g = grid(12, 12, 3, 4.0);
  const auto P = build_system_matrix(geom, g);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  SUBCASE("zero image gives zero sinogram; zero sinogram gives zero image") {
    const auto fp = forward_project(P, Volume(g));
    const auto bp = back_project(P, Sinogram(3, 20, 24));
    for (double v : fp.values()) CHECK(v == 0.0);
    for (double v : bp.values()) CHECK(v == 0.0);
  }
  SUBCASE("linearity") {
    Volume a(g), b(g), c(g);
    for (std::size_t j = 0; j < a.size(); ++j) {
      a[j] = u(rng);
      b[j] = u(rng);
      c[j] = 2.0 * a[j] - 3.0 * b[j];
    }
    const auto fa = forward_project(P, a);
    const auto fb = forward_project(P, b);
    const auto fc = forward_project(P, c);
    for (std::size_t i = 0; i < fc.size(); ++i) {
      const double expect = 2.0 * fa[i] - 3.0 * fb[i];
      CHECK(std::abs(fc[i] - expect) <= 1e-12 * (std::abs(fa[i]) + std::abs(fb[i]) + 1e-300) * 5.0);
    }
  }
  SUBCASE("delta image gives its matrix column") {
    Volume d(g);
    const int j = 5 * 12 + 7;
    d[g.slice_size() + j] = 1.0;
    const auto s = forward_project(P, d);
    for (std::size_t r = 0; r < P.rows(); ++r) {
      double expect = 0.0;
      const auto cols = P.row_columns(r);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        if (cols[k] == j) expect = P.row_values(r)[k];
      }
      CHECK(s.slice(1)[r] == expect);
      CHECK(s.slice(0)[r] == 0.0);
    }
  }
  SUBCASE("back projection of ones is the sensitivity") {
    const auto bp = back_project(P, Sinogram(3, 20, 24, 1.0));
    const auto sens = sensitivity_image(P);
    for (std::size_t j = 0; j < bp.size(); ++j) {
      CHECK(std::abs(bp[j] - sens[j]) <= 1e-12 * sens[j]);
    }
  }
  SUBCASE("nonnegativity is preserved") {
    Volume x(g);
    Sinogram s(3, 20, 24);
    for (auto& v : x.values()) v = std::abs(u(rng));
    for (auto& v : s.values()) v = std::abs(u(rng));
    const auto fp = forward_project(P, x);
    const auto bp = back_project(P, s);
    for (double v : fp.values()) CHECK(v >= 0.0);
    for (double v : bp.values()) CHECK(v >= 0.0);
  }
  SUBCASE("shape mismatches are rejected") {
    CHECK_THROWS_AS(forward_project(P, Volume(grid(11, 12, 3))), DimensionError);
    CHECK_THROWS_AS(back_project(P, Sinogram(3, 20, 23)), DimensionError);
  }
}

TEST_CASE("adjointness over 100 random pairs") {
  const ScannerGeometry geom{30, 36, 3.0, 3};
  const auto g = grid(16, 16, 2, 4.0);
  const auto P = build_system_matrix(geom, g);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (int k = 0; k < 100; ++k) {
    Volume x(g);
    Sinogram s(2, 30, 36);
    for (auto& v : x.values()) v = n01(rng);
    for (auto& v : s.values()) v = n01(rng);
    const double lhs = dot(forward_project(P, x).values(), s.values());
    const double rhs = dot(x.values(), back_project(P, s).values());
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(lhs) + 1e-12));
  }
}

TEST_CASE("matrix build is independent of the worker count") {
  const ScannerGeometry geom{16, 24, 3.0, 3};
  const auto g = grid(12, 12, 1, 4.0);
  set_max_threads(1);
  const auto a = build_system_matrix(geom, g);
  set_max_threads(4);
  const auto b = build_system_matrix(geom, g);
  set_max_threads(0);
  REQUIRE(a.nnz() == b.nnz());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto ca = a.row_columns(r);
    const auto cb = b.row_columns(r);
    const auto va = a.row_values(r);
    const auto vb = b.row_values(r);
    REQUIRE(ca.size() == cb.size());
    for (std::size_t k = 0; k < ca.size(); ++k) {
      CHECK(ca[k] == cb[k]);
      CHECK(va[k] == vb[k]);
    }
  }
}

TEST_CASE("explicit CSR matrices") {
  const ScannerGeometry geom{1, 2, 4.0, 1};
  const auto g = grid(2, 1, 1);
  const auto P = SystemMatrix::from_csr(geom, g, {0, 2, 3}, {0, 1, 1}, {1.0, 2.0, 0.5});
  CHECK(P.rows() == 2);
  CHECK(P.sensitivity()[0] == 1.0);
  CHECK(P.sensitivity()[1] == 2.5);
  const auto y = forward_project(P, Volume(g, std::vector<double>{3.0, 1.0}));
  CHECK(y[0] == 5.0);
  CHECK(y[1] == 0.5);
  CHECK_THROWS_AS(SystemMatrix::from_csr(geom, g, {0, 1}, {0}, {1.0}), DimensionError);
  CHECK_THROWS_AS(SystemMatrix::from_csr(geom, g, {0, 1, 1}, {2}, {1.0}), DimensionError);
  CHECK_THROWS_AS(SystemMatrix::from_csr(geom, g, {0, 1, 1}, {0}, {-1.0}), DomainError);
}
