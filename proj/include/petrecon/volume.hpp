#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "petrecon/errors.hpp"

namespace petrecon {

/// Voxel lattice centred on the origin. In-plane voxels are square with side
/// `voxel_size`; slices are `slice_thickness` apart along z.
struct ImageGrid {
  int nx = 1;
  int ny = 1;
  int nz = 1;
  double voxel_size = 1.0;
  double slice_thickness = 1.0;

  std::size_t slice_size() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t size() const { return slice_size() * nz; }
  std::size_t index(int ix, int iy, int iz) const {
    return (static_cast<std::size_t>(iz) * ny + iy) * nx + ix;
  }
  double x_center(int ix) const { return (ix - 0.5 * (nx - 1)) * voxel_size; }
  double y_center(int iy) const { return (iy - 0.5 * (ny - 1)) * voxel_size; }
  double z_center(int iz) const { return (iz - 0.5 * (nz - 1)) * slice_thickness; }

  void validate() const;

  friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

/// Dense 3D image (activity, labels, sensitivity), x-fastest ordering.
class Volume {
 public:
  Volume() = default;
  explicit Volume(const ImageGrid& grid, double fill = 0.0);
  Volume(const ImageGrid& grid, std::vector<double> values);

  const ImageGrid& grid() const { return grid_; }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(int ix, int iy, int iz) { return data_[grid_.index(ix, iy, iz)]; }
  double at(int ix, int iy, int iz) const { return data_[grid_.index(ix, iy, iz)]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> slice(int iz) {
    return std::span<double>(data_).subspan(iz * grid_.slice_size(), grid_.slice_size());
  }
  std::span<const double> slice(int iz) const {
    return std::span<const double>(data_).subspan(iz * grid_.slice_size(), grid_.slice_size());
  }

  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  ImageGrid grid_;
  std::vector<double> data_;
};

/// Throws DimensionError unless both volumes share a grid.
void require_same_grid(const Volume& a, const Volume& b, const char* what);

double sum(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double mean(std::span<const double> v);

}  // namespace petrecon
