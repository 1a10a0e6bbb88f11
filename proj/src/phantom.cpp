#include "petrecon/phantom.hpp"

#include <cmath>
#include <random>
#include <set>

#include "petrecon/errors.hpp"
#include "petrecon/random.hpp"

namespace petrecon::phantom {

void PhantomSpec::validate() const {
  std::set<int> seen;
  for (const auto& o : organs) {
    if (o.label <= 0 || o.label >= kLesionLabelBase) {
      throw ConfigError("organ labels must lie in [1, " + std::to_string(kLesionLabelBase) + ")");
    }
    if (!seen.insert(o.label).second) throw ConfigError("duplicate organ label " + std::to_string(o.label));
    if (!(o.shape.ax > 0 && o.shape.ay > 0 && o.shape.az > 0)) {
      throw ConfigError("organ semi-axes must be > 0");
    }
    if (o.shell_thickness < 0) throw ConfigError("shell thickness must be >= 0");
  }
  for (const auto& l : lesions) {
    if (!(l.diameter > 0)) throw ConfigError("lesion diameters must be > 0");
  }
}

namespace {

void check_in_fov(const Ellipsoid& e, const ImageGrid& g, const std::string& what) {
  const double hx = 0.5 * g.nx * g.voxel_size;
  const double hy = 0.5 * g.ny * g.voxel_size;
  const double hz = 0.5 * g.nz * g.slice_thickness;
  if (e.cx - e.ax < -hx || e.cx + e.ax > hx || e.cy - e.ay < -hy || e.cy + e.ay > hy ||
      std::abs(e.cz) > hz) {
    throw ConfigError(what + " lies outside the image field of view");
  }
}

bool inside(const Ellipsoid& e, double x, double y, double z) {
  const double u = (x - e.cx) / e.ax;
  const double v = (y - e.cy) / e.ay;
  const double w = (z - e.cz) / e.az;
  return u * u + v * v + w * w <= 1.0;
}

bool inside_organ(const OrganSpec& o, double x, double y, double z) {
  if (!inside(o.shape, x, y, z)) return false;
  if (o.shell_thickness <= 0.0) return true;
  Ellipsoid inner = o.shape;
  inner.ax -= o.shell_thickness;
  inner.ay -= o.shell_thickness;
  if (inner.ax <= 0 || inner.ay <= 0) return true;
  return !inside(inner, x, y, z);
}

template <typename Fn>
void paint(Volume& labels, const Ellipsoid& box, double label, Fn&& member) {
  const auto& g = labels.grid();
  // Only visit voxels whose centres can fall inside the bounding box.
  auto range = [](double c, double a, double spacing, int n) {
    const double offset = 0.5 * (n - 1);
    const int lo = std::max(0, static_cast<int>(std::floor((c - a) / spacing + offset)));
    const int hi = std::min(n - 1, static_cast<int>(std::ceil((c + a) / spacing + offset)));
    return std::pair{lo, hi};
  };
  const auto [x0, x1] = range(box.cx, box.ax, g.voxel_size, g.nx);
  const auto [y0, y1] = range(box.cy, box.ay, g.voxel_size, g.ny);
  const auto [z0, z1] = range(box.cz, box.az, g.slice_thickness, g.nz);
  for (int iz = z0; iz <= z1; ++iz) {
    for (int iy = y0; iy <= y1; ++iy) {
      for (int ix = x0; ix <= x1; ++ix) {
        if (member(g.x_center(ix), g.y_center(iy), g.z_center(iz))) labels.at(ix, iy, iz) = label;
      }
    }
  }
}

}  // namespace

LabelVolume rasterize_phantom(const PhantomSpec& spec, const ImageGrid& grid) {
  spec.validate();
  grid.validate();
  LabelVolume out{Volume(grid, 0.0), {}};
  for (const auto& o : spec.organs) {
    check_in_fov(o.shape, grid, "organ '" + o.tissue + "'");
    out.tissues[o.label] = o.tissue;
    paint(out.labels, o.shape, o.label,
          [&](double x, double y, double z) { return inside_organ(o, x, y, z); });
  }
  for (std::size_t k = 0; k < spec.lesions.size(); ++k) {
    const auto& l = spec.lesions[k];
    const double r = 0.5 * l.diameter;
    const Ellipsoid sphere{l.cx, l.cy, l.cz, r, r, r};
    check_in_fov(sphere, grid, "lesion " + std::to_string(k));
    const int label = kLesionLabelBase + static_cast<int>(k);
    out.tissues[label] = kLesionTissue;
    paint(out.labels, sphere, label, [&](double x, double y, double z) { return inside(sphere, x, y, z); });
  }
  return out;
}

Volume frame_activity(const LabelVolume& labels, const std::map<std::string, kinetics::KineticParams>& table,
                      const kinetics::TimeFrame& frame, const kinetics::InputFunctionParams& input,
                      double max_step) {
  frame.validate();
  std::map<int, double> value_of{{0, 0.0}};
  for (const auto& [label, tissue] : labels.tissues) {
    const auto it = table.find(tissue);
    if (it == table.end()) throw ConfigError("no kinetic parameters for tissue '" + tissue + "'");
    value_of[label] = kinetics::frame_average(it->second, input, frame, max_step);
  }
  Volume out(labels.labels.grid());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int label = static_cast<int>(labels.labels[i]);
    const auto it = value_of.find(label);
    if (it == value_of.end()) throw ConfigError("label " + std::to_string(label) + " has no tissue");
    out[i] = it->second;
  }
  return out;
}

std::vector<std::size_t> lesion_voxels(const LabelVolume& labels) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    if (labels.labels[i] >= kLesionLabelBase) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> tissue_voxels(const LabelVolume& labels, const std::string& tissue) {
  std::set<int> wanted;
  for (const auto& [label, name] : labels.tissues) {
    if (name == tissue) wanted.insert(label);
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    if (wanted.contains(static_cast<int>(labels.labels[i]))) out.push_back(i);
  }
  return out;
}

PhantomSpec make_desk_phantom(const ImageGrid& grid, std::uint64_t seed, const DeskPhantomOptions& opt) {
  grid.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> size_dist(1.0, opt.organ_size_cv);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double w = 0.5 * std::min(grid.nx, grid.ny) * grid.voxel_size;
  const double long_axis = 10.0 * std::max(w, grid.nz * grid.slice_thickness);

  auto organ = [&](int label, const char* tissue, double cx, double cy, double ax, double ay,
                   double shell = 0.0) {
    const double s = opt.organ_size_cv > 0 ? std::clamp(size_dist(rng), 0.85, 1.15) : 1.0;
    const double dx = opt.organ_shift * unit(rng);
    const double dy = opt.organ_shift * unit(rng);
    return OrganSpec{label, {cx * w + dx, cy * w + dy, 0.0, ax * w * s, ay * w * s, long_axis}, tissue, shell};
  };

  PhantomSpec spec;
  spec.seed = seed;
  spec.organs.push_back(organ(1, "soft tissue", 0.0, 0.0, 0.86, 0.64));
  spec.organs.push_back(organ(2, "lung", -0.38, 0.16, 0.27, 0.34));
  spec.organs.push_back(organ(3, "lung", 0.38, 0.16, 0.27, 0.34));
  spec.organs.push_back(organ(4, "liver", 0.33, -0.38, 0.36, 0.19));
  spec.organs.push_back(organ(5, "myocardium", -0.1, -0.08, 0.2, 0.17, 0.0625 * w));
  spec.organs.push_back(organ(6, "marrow", 0.0, -0.5, 0.09, 0.09));

  const OrganSpec& heart = spec.organs[4];
  const double hz = 0.5 * grid.nz * grid.slice_thickness;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  constexpr double kMargin = 2.0;
  for (int k = 0; k < opt.n_lesions; ++k) {
    const double d = opt.lesion_diameter_min + (opt.lesion_diameter_max - opt.lesion_diameter_min) * u01(rng);
    const double r = 0.5 * d;
    bool placed = false;
    for (int attempt = 0; attempt < 20000 && !placed; ++attempt) {
      const OrganSpec& lung = spec.organs[1 + (attempt + k) % 2];
      const double ex = lung.shape.ax - r - kMargin;
      const double ey = lung.shape.ay - r - kMargin;
      if (ex <= 0 || ey <= 0) continue;
      const double x = lung.shape.cx + ex * unit(rng);
      const double y = lung.shape.cy + ey * unit(rng);
      const double zr = std::max(0.0, hz - r);
      const double z = zr * unit(rng);
      const double ux = (x - lung.shape.cx) / ex;
      const double uy = (y - lung.shape.cy) / ey;
      if (ux * ux + uy * uy > 1.0) continue;
      const double hx = (x - heart.shape.cx) / (heart.shape.ax + r + kMargin);
      const double hy = (y - heart.shape.cy) / (heart.shape.ay + r + kMargin);
      if (hx * hx + hy * hy <= 1.0) continue;
      bool clear = true;
      for (const auto& other : spec.lesions) {
        const double dist = std::hypot(x - other.cx, y - other.cy, z - other.cz);
        if (dist < r + 0.5 * other.diameter + kMargin) clear = false;
      }
      if (!clear) continue;
      spec.lesions.push_back({x, y, z, d});
      placed = true;
    }
    if (!placed) throw ConfigError("could not place lesion " + std::to_string(k) + " inside the lungs");
  }
  return spec;
}

std::map<std::string, kinetics::KineticParams> sample_tissue_table(double cv, std::uint64_t seed) {
  std::map<std::string, kinetics::KineticParams> out;
  std::uint64_t stream = 0;
  for (const auto& [name, mean] : kinetics::reference_fdg_kinetics()) {
    out[name] = kinetics::sample_kinetics(mean, cv, derive_seed(seed, {stream++}));
  }
  return out;
}

}  // namespace petrecon::phantom
