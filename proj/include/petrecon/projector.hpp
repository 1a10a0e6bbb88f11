#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "petrecon/sinogram.hpp"
#include "petrecon/volume.hpp"

namespace petrecon::projector {

/// 2D parallel-beam sampling applied identically to every slice. Angles are
/// evenly spaced over [0, pi); radial bins are centred on the rotation axis.
struct ScannerGeometry {
  int n_angles = 90;
  int n_bins = 96;
  double bin_spacing = 4.0;  // mm
  int rays_per_bin = 3;

  double angle(int a) const;
  double bin_offset(int b) const;
  void validate() const;
};

/// One (voxel, length) pair along a ray.
struct RaySegment {
  int voxel;      // in-plane index, x fastest
  double length;  // mm
};

/// Exact intersection lengths of the infinite line
///   p(t) = offset * (cos a, sin a) + t * (-sin a, cos a)
/// with the in-plane voxels of `grid`, ordered along the ray.
std::vector<RaySegment> trace_ray(const ImageGrid& grid, double offset, double angle);

/// Sparse detection-probability operator in compressed-row form. One row per
/// (angle, bin); columns are in-plane voxel indices. The same 2D matrix is
/// applied to every slice of a volume.
class SystemMatrix {
 public:
  SystemMatrix() = default;

  const ScannerGeometry& geometry() const { return geometry_; }
  const ImageGrid& grid() const { return grid_; }
  std::size_t rows() const { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
  std::size_t cols() const { return grid_.slice_size(); }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::int32_t> row_columns(std::size_t row) const;
  std::span<const double> row_values(std::size_t row) const;

  /// Per-voxel column sums p_j of one slice.
  std::span<const double> sensitivity() const { return sensitivity_; }

  /// Copy with every entry multiplied by `factor` (> 0), e.g. for thinned data.
  SystemMatrix scaled(double factor) const;

  void forward_slice(std::span<const double> image, std::span<double> sino) const;
  void back_slice(std::span<const double> sino, std::span<double> image) const;

  /// Matrix from explicit CSR arrays with n_angles * n_bins rows. No field of
  /// view check; entries must be non-negative with columns inside the slice.
  static SystemMatrix from_csr(const ScannerGeometry& geom, const ImageGrid& grid, std::vector<std::size_t> row_ptr,
                               std::vector<std::int32_t> columns, std::vector<double> values);

  friend SystemMatrix build_system_matrix(const ScannerGeometry&, const ImageGrid&);

 private:
  void compute_sensitivity();

  ScannerGeometry geometry_;
  ImageGrid grid_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::int32_t> columns_;
  std::vector<double> values_;
  std::vector<double> sensitivity_;
};

/// Siddon ray tracing, averaged over `rays_per_bin` evenly spaced sub-rays per
/// bin. Throws ConfigError for invalid geometry/grid or if the radial field of
/// view does not cover the grid diagonal.
SystemMatrix build_system_matrix(const ScannerGeometry& geom, const ImageGrid& grid);

Sinogram forward_project(const SystemMatrix& P, const Volume& x);
Volume back_project(const SystemMatrix& P, const Sinogram& g);

/// Sensitivity p_j replicated over all slices of the matrix grid.
Volume sensitivity_image(const SystemMatrix& P);

}  // namespace petrecon::projector
