#include "petrecon/projector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "petrecon/parallel.hpp"

namespace petrecon::projector {

double ScannerGeometry::angle(int a) const { return std::numbers::pi * a / n_angles; }

double ScannerGeometry::bin_offset(int b) const { return (b - 0.5 * (n_bins - 1)) * bin_spacing; }

void ScannerGeometry::validate() const {
  if (n_angles < 1 || n_bins < 1 || rays_per_bin < 1) {
    throw ConfigError("scanner geometry needs n_angles, n_bins, rays_per_bin >= 1");
  }
  if (!(bin_spacing > 0.0)) throw ConfigError("scanner bin_spacing must be > 0");
}

std::vector<RaySegment> trace_ray(const ImageGrid& grid, double offset, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double px = offset * c;
  const double py = offset * s;
  const double dx = -s;
  const double dy = c;
  const double vs = grid.voxel_size;
  const double xmin = -0.5 * grid.nx * vs;
  const double ymin = -0.5 * grid.ny * vs;
  const double xmax = -xmin;
  const double ymax = -ymin;
  constexpr double kParallel = 1e-14;

  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  auto clip = [&](double p, double d, double lo, double hi) {
    if (std::abs(d) < kParallel) {
      return p >= lo && p <= hi;
    }
    const double t1 = (lo - p) / d;
    const double t2 = (hi - p) / d;
    tmin = std::max(tmin, std::min(t1, t2));
    tmax = std::min(tmax, std::max(t1, t2));
    return true;
  };
  if (!clip(px, dx, xmin, xmax) || !clip(py, dy, ymin, ymax) || !(tmax > tmin)) return {};

  std::vector<double> ts;
  ts.reserve(grid.nx + grid.ny + 4);
  ts.push_back(tmin);
  ts.push_back(tmax);
  auto crossings = [&](double p, double d, double lo, int n) {
    if (std::abs(d) < kParallel) return;
    for (int k = 0; k <= n; ++k) {
      const double t = (lo + k * vs - p) / d;
      if (t > tmin && t < tmax) ts.push_back(t);
    }
  };
  crossings(px, dx, xmin, grid.nx);
  crossings(py, dy, ymin, grid.ny);
  std::sort(ts.begin(), ts.end());

  std::vector<RaySegment> out;
  out.reserve(ts.size());
  for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
    const double len = ts[k + 1] - ts[k];
    if (len <= 1e-12 * vs) continue;
    const double tm = 0.5 * (ts[k] + ts[k + 1]);
    const int ix = std::clamp(static_cast<int>(std::floor((px + tm * dx - xmin) / vs)), 0, grid.nx - 1);
    const int iy = std::clamp(static_cast<int>(std::floor((py + tm * dy - ymin) / vs)), 0, grid.ny - 1);
    out.push_back({iy * grid.nx + ix, len});
  }
  return out;
}

SystemMatrix build_system_matrix(const ScannerGeometry& geom, const ImageGrid& grid) {
  geom.validate();
  grid.validate();
  const double fov = geom.n_bins * geom.bin_spacing;
  const double diagonal = std::hypot(grid.nx * grid.voxel_size, grid.ny * grid.voxel_size);
  if (fov < diagonal * (1.0 - 1e-12)) {
    throw ConfigError("scanner field of view (" + std::to_string(fov) +
                      " mm) does not cover the image grid diagonal (" + std::to_string(diagonal) +
                      " mm)");
  }

  const std::size_t m = static_cast<std::size_t>(geom.n_angles) * geom.n_bins;
  std::vector<std::vector<RaySegment>> rows(m);
  const double weight = 1.0 / geom.rays_per_bin;
  parallel_for(m, [&](std::size_t row) {
    const int a = static_cast<int>(row / geom.n_bins);
    const int b = static_cast<int>(row % geom.n_bins);
    const double theta = geom.angle(a);
    std::vector<RaySegment> merged;
    for (int k = 0; k < geom.rays_per_bin; ++k) {
      const double u = geom.bin_offset(b) + ((k + 0.5) / geom.rays_per_bin - 0.5) * geom.bin_spacing;
      for (const auto& seg : trace_ray(grid, u, theta)) merged.push_back({seg.voxel, seg.length * weight});
    }
    std::stable_sort(merged.begin(), merged.end(),
                     [](const RaySegment& l, const RaySegment& r) { return l.voxel < r.voxel; });
    std::vector<RaySegment> compact;
    for (const auto& seg : merged) {
      if (!compact.empty() && compact.back().voxel == seg.voxel) {
        compact.back().length += seg.length;
      } else {
        compact.push_back(seg);
      }
    }
    rows[row] = std::move(compact);
  });

  SystemMatrix P;
  P.geometry_ = geom;
  P.grid_ = grid;
  P.row_ptr_.assign(m + 1, 0);
  for (std::size_t i = 0; i < m; ++i) P.row_ptr_[i + 1] = P.row_ptr_[i] + rows[i].size();
  P.columns_.reserve(P.row_ptr_[m]);
  P.values_.reserve(P.row_ptr_[m]);
  for (const auto& row : rows) {
    for (const auto& seg : row) {
      P.columns_.push_back(seg.voxel);
      P.values_.push_back(seg.length);
    }
  }
  P.compute_sensitivity();
  return P;
}

SystemMatrix SystemMatrix::from_csr(const ScannerGeometry& geom, const ImageGrid& grid, std::vector<std::size_t> row_ptr,
                                    std::vector<std::int32_t> columns, std::vector<double> values) {
  geom.validate();
  grid.validate();
  const std::size_t m = static_cast<std::size_t>(geom.n_angles) * geom.n_bins;
  if (row_ptr.size() != m + 1 || row_ptr.front() != 0 || row_ptr.back() != values.size() ||
      columns.size() != values.size()) {
    throw DimensionError("CSR arrays do not match the scanner geometry");
  }
  for (std::size_t r = 0; r < m; ++r) {
    if (row_ptr[r] > row_ptr[r + 1]) throw DimensionError("CSR row pointers must be non-decreasing");
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (columns[k] < 0 || static_cast<std::size_t>(columns[k]) >= grid.slice_size()) {
      throw DimensionError("CSR column index outside the image slice");
    }
    if (!(values[k] >= 0.0)) throw DomainError("system matrix entries must be non-negative");
  }
  SystemMatrix P;
  P.geometry_ = geom;
  P.grid_ = grid;
  P.row_ptr_ = std::move(row_ptr);
  P.columns_ = std::move(columns);
  P.values_ = std::move(values);
  P.compute_sensitivity();
  return P;
}

void SystemMatrix::compute_sensitivity() {
  sensitivity_.assign(grid_.slice_size(), 0.0);
  for (std::size_t k = 0; k < values_.size(); ++k) sensitivity_[columns_[k]] += values_[k];
}

std::span<const std::int32_t> SystemMatrix::row_columns(std::size_t row) const {
  return std::span<const std::int32_t>(columns_).subspan(row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]);
}

std::span<const double> SystemMatrix::row_values(std::size_t row) const {
  return std::span<const double>(values_).subspan(row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]);
}

SystemMatrix SystemMatrix::scaled(double factor) const {
  if (!(factor > 0.0)) throw DomainError("system matrix scale factor must be > 0");
  SystemMatrix out = *this;
  for (auto& v : out.values_) v *= factor;
  out.compute_sensitivity();
  return out;
}

void SystemMatrix::forward_slice(std::span<const double> image, std::span<double> sino) const {
  const std::size_t m = rows();
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) acc += values_[k] * image[columns_[k]];
    sino[i] = acc;
  }
}

void SystemMatrix::back_slice(std::span<const double> sino, std::span<double> image) const {
  std::fill(image.begin(), image.end(), 0.0);
  const std::size_t m = rows();
  for (std::size_t i = 0; i < m; ++i) {
    const double g = sino[i];
    if (g == 0.0) continue;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) image[columns_[k]] += values_[k] * g;
  }
}

namespace {
void check_grid(const SystemMatrix& P, const ImageGrid& g, const char* what) {
  if (g.nx != P.grid().nx || g.ny != P.grid().ny) {
    throw DimensionError(std::string(what) + ": image grid does not match system matrix");
  }
}
}  // namespace

Sinogram forward_project(const SystemMatrix& P, const Volume& x) {
  check_grid(P, x.grid(), "forward_project");
  const auto& geom = P.geometry();
  Sinogram out(x.grid().nz, geom.n_angles, geom.n_bins);
  parallel_for(x.grid().nz, [&](std::size_t z) {
    P.forward_slice(x.slice(static_cast<int>(z)), out.slice(static_cast<int>(z)));
  });
  return out;
}

Volume back_project(const SystemMatrix& P, const Sinogram& g) {
  const auto& geom = P.geometry();
  if (g.n_angles() != geom.n_angles || g.n_bins() != geom.n_bins) {
    throw DimensionError("back_project: sinogram does not match system matrix");
  }
  ImageGrid grid = P.grid();
  grid.nz = g.n_slices();
  Volume out(grid);
  parallel_for(grid.nz, [&](std::size_t z) {
    P.back_slice(g.slice(static_cast<int>(z)), out.slice(static_cast<int>(z)));
  });
  return out;
}

Volume sensitivity_image(const SystemMatrix& P) {
  Volume out(P.grid());
  for (int z = 0; z < P.grid().nz; ++z) {
    std::copy(P.sensitivity().begin(), P.sensitivity().end(), out.slice(z).begin());
  }
  return out;
}

}  // namespace petrecon::projector
