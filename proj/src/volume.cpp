#include "petrecon/volume.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "petrecon/sinogram.hpp"

namespace petrecon {

void ImageGrid::validate() const {
  if (nx < 1 || ny < 1 || nz < 1) {
    throw ConfigError("image grid needs nx, ny, nz >= 1");
  }
  if (!(voxel_size > 0.0) || !(slice_thickness > 0.0)) {
    throw ConfigError("image grid voxel_size and slice_thickness must be > 0");
  }
}

Volume::Volume(const ImageGrid& grid, double fill) : grid_(grid), data_(grid.size(), fill) {}

Volume::Volume(const ImageGrid& grid, std::vector<double> values)
    : grid_(grid), data_(std::move(values)) {
  if (data_.size() != grid_.size()) {
    throw DimensionError("volume data has " + std::to_string(data_.size()) +
                         " values, grid needs " + std::to_string(grid_.size()));
  }
}

void require_same_grid(const Volume& a, const Volume& b, const char* what) {
  if (!(a.grid() == b.grid())) {
    throw DimensionError(std::string(what) + ": image grids differ");
  }
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double mean(std::span<const double> v) {
  return v.empty() ? 0.0 : sum(v) / static_cast<double>(v.size());
}

Sinogram::Sinogram(int n_slices, int n_angles, int n_bins, double fill)
    : n_slices_(n_slices),
      n_angles_(n_angles),
      n_bins_(n_bins),
      data_(static_cast<std::size_t>(n_slices) * n_angles * n_bins, fill) {
  if (n_slices < 0 || n_angles < 0 || n_bins < 0) {
    throw DimensionError("sinogram dimensions must be non-negative");
  }
}

void require_same_shape(const Sinogram& a, const Sinogram& b, const char* what) {
  if (!a.same_shape(b)) throw DimensionError(std::string(what) + ": sinogram shapes differ");
}

}  // namespace petrecon
