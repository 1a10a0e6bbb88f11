#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "petrecon/volume.hpp"

namespace petrecon::eval {

/// Lesion voxels (all lesions pooled) with their true mean uptake, and the
/// background ROIs used for the noise measure.
struct RoiSpec {
  std::vector<std::size_t> lesion;
  double a_true = 0.0;
  std::vector<std::vector<std::size_t>> background;

  void validate(std::size_t volume_size) const;
};

/// Mean of v over the given voxels.
double roi_mean(const Volume& v, std::span<const std::size_t> voxels);

/// Lesion mean divided by a_true, one value per realization.
std::vector<double> realization_contrast(std::span<const Volume> set, const RoiSpec& roi);

/// Average of realization_contrast.
double contrast_recovery(std::span<const Volume> set, const RoiSpec& roi);

/// Mean over background ROIs of (sample stdev over realizations of the ROI
/// mean, R - 1 denominator) / (mean over realizations of the ROI mean).
double background_std(std::span<const Volume> set, const RoiSpec& roi);

/// Disk ROIs of `radius` voxels within single slices, centred at random
/// voxels (fixed seed) such that every disk voxel is in `allowed` and none is
/// in `excluded`. Throws ConfigError if fewer than `count` can be placed.
std::vector<std::vector<std::size_t>> place_background_rois(const ImageGrid& grid,
                                                            std::span<const std::size_t> allowed,
                                                            std::span<const std::size_t> excluded, int count,
                                                            int radius, std::uint64_t seed);

struct SweepPoint {
  double sweep_value = 0.0;
  double std = 0.0;
  double cr = 0.0;
  std::vector<double> realization_cr;  // may be empty when read back from CSV
};

struct Curve {
  std::string method;
  std::vector<SweepPoint> points;  // sweep order
};

SweepPoint evaluate_point(double sweep_value, std::span<const Volume> set, const RoiSpec& roi);

/// Fractional point index at which the curve first reaches `std` by linear
/// interpolation between consecutive points; nullopt if it never does.
std::optional<double> locate_std(const Curve& c, double std);

/// Linear interpolation of CR (or of per-realization CR with `realization`)
/// at a fractional point index.
double cr_at(const Curve& c, double index);
double realization_cr_at(const Curve& c, double index, std::size_t realization);

/// Midpoint of the overlap of the curves' STD ranges; nullopt without overlap.
std::optional<double> common_std(std::span<const Curve> curves);

struct PairedComparison {
  double std = 0.0;
  double cr_a = 0.0;
  double cr_b = 0.0;
  double mean_difference = 0.0;  // mean over realizations of CR_a - CR_b
  double standard_error = 0.0;
  std::size_t realizations = 0;
};

/// Compares two curves at a common STD using realization-paired CR values.
/// Throws ConfigError when either curve does not reach `std` or the
/// realization counts differ.
PairedComparison compare_at_std(const Curve& a, const Curve& b, double std);

/// Elementwise with - without.
Volume lesion_difference(const Volume& with_lesion, const Volume& without_lesion);

}  // namespace petrecon::eval
