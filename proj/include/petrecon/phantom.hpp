#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "petrecon/kinetics.hpp"
#include "petrecon/volume.hpp"

namespace petrecon::phantom {

inline constexpr const char* kLesionTissue = "lung lesion";
/// Lesion k is rasterized with label kLesionLabelBase + k.
inline constexpr int kLesionLabelBase = 1000;

/// Axis-aligned ellipsoid, mm.
struct Ellipsoid {
  double cx = 0, cy = 0, cz = 0;
  double ax = 1, ay = 1, az = 1;
};

/// Organ region. With `shell_thickness` > 0 only the outer shell of that
/// in-plane thickness is labelled (e.g. myocardium).
struct OrganSpec {
  int label = 1;
  Ellipsoid shape;
  std::string tissue;
  double shell_thickness = 0.0;
};

struct LesionSpec {
  double cx = 0, cy = 0, cz = 0;
  double diameter = 12.8;
};

struct PhantomSpec {
  std::vector<OrganSpec> organs;
  std::vector<LesionSpec> lesions;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Integer labels stored as reals plus the tissue each label stands for.
/// Label 0 is air (outside every shape) and carries no activity.
struct LabelVolume {
  Volume labels;
  std::map<int, std::string> tissues;
};

/// Centre-point membership; shapes are drawn in list order, lesions last, so
/// later shapes overwrite earlier labels. Throws ConfigError when a shape's
/// in-plane extent leaves the grid or its centre lies outside the axial range.
LabelVolume rasterize_phantom(const PhantomSpec& spec, const ImageGrid& grid);

/// Per-voxel frame-averaged tissue activity using each label's tissue curve.
Volume frame_activity(const LabelVolume& labels,
                      const std::map<std::string, kinetics::KineticParams>& table,
                      const kinetics::TimeFrame& frame, const kinetics::InputFunctionParams& input = {},
                      double max_step = kinetics::kDefaultMaxStep);

/// Voxels belonging to lesions (label >= kLesionLabelBase).
std::vector<std::size_t> lesion_voxels(const LabelVolume& labels);
/// Voxels whose tissue is `tissue`.
std::vector<std::size_t> tissue_voxels(const LabelVolume& labels, const std::string& tissue);

struct DeskPhantomOptions {
  int n_lesions = 3;
  double lesion_diameter_min = 12.8;
  double lesion_diameter_max = 22.4;
  double organ_size_cv = 0.05;  // per-phantom organ scaling
  double organ_shift = 4.0;     // mm, uniform in-plane jitter
};

/// Parametric thorax: soft-tissue body, two lungs, liver, myocardial shell and
/// spine, scaled to the grid's in-plane extent, with non-overlapping spherical
/// lesions placed inside the lungs. Deterministic per seed.
PhantomSpec make_desk_phantom(const ImageGrid& grid, std::uint64_t seed, const DeskPhantomOptions& opt);

/// Sampled kinetics for every tissue in the reference table (coefficient of
/// variation `cv`), one independent draw per tissue.
std::map<std::string, kinetics::KineticParams> sample_tissue_table(double cv, std::uint64_t seed);

}  // namespace petrecon::phantom
