#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "petrecon/errors.hpp"

namespace petrecon {

/// Per-slice sinogram stack: (slice, angle, bin), bins fastest. Used both for
/// integer counts (stored as reals) and for real-valued means.
class Sinogram {
 public:
  Sinogram() = default;
  Sinogram(int n_slices, int n_angles, int n_bins, double fill = 0.0);

  int n_slices() const { return n_slices_; }
  int n_angles() const { return n_angles_; }
  int n_bins() const { return n_bins_; }
  std::size_t rows_per_slice() const { return static_cast<std::size_t>(n_angles_) * n_bins_; }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> slice(int iz) {
    return std::span<double>(data_).subspan(iz * rows_per_slice(), rows_per_slice());
  }
  std::span<const double> slice(int iz) const {
    return std::span<const double>(data_).subspan(iz * rows_per_slice(), rows_per_slice());
  }

  bool same_shape(const Sinogram& o) const {
    return n_slices_ == o.n_slices_ && n_angles_ == o.n_angles_ && n_bins_ == o.n_bins_;
  }

  friend bool operator==(const Sinogram&, const Sinogram&) = default;

 private:
  int n_slices_ = 0;
  int n_angles_ = 0;
  int n_bins_ = 0;
  std::vector<double> data_;
};

void require_same_shape(const Sinogram& a, const Sinogram& b, const char* what);

}  // namespace petrecon
