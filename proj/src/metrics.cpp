#include "petrecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

namespace petrecon::eval {

void RoiSpec::validate(std::size_t volume_size) const {
  if (lesion.empty()) throw ConfigError("lesion ROI is empty");
  if (!(a_true > 0.0)) throw ConfigError("true lesion uptake must be > 0");
  const std::unordered_set<std::size_t> lesion_set(lesion.begin(), lesion.end());
  for (std::size_t v : lesion) {
    if (v >= volume_size) throw DimensionError("lesion ROI voxel outside the volume");
  }
  for (const auto& roi : background) {
    if (roi.empty()) throw ConfigError("background ROI is empty");
    for (std::size_t v : roi) {
      if (v >= volume_size) throw DimensionError("background ROI voxel outside the volume");
      if (lesion_set.count(v)) throw ConfigError("background ROI overlaps a lesion");
    }
  }
}

double roi_mean(const Volume& v, std::span<const std::size_t> voxels) {
  if (voxels.empty()) throw ConfigError("empty ROI");
  double acc = 0.0;
  for (std::size_t i : voxels) acc += v[i];
  return acc / static_cast<double>(voxels.size());
}

namespace {
void check_set(std::span<const Volume> set) {
  if (set.empty()) throw ConfigError("realization set is empty");
  for (const auto& v : set) require_same_grid(set.front(), v, "realization set");
}
}  // namespace

std::vector<double> realization_contrast(std::span<const Volume> set, const RoiSpec& roi) {
  check_set(set);
  if (roi.lesion.empty()) throw ConfigError("lesion ROI is empty");
  if (!(roi.a_true > 0.0)) throw ConfigError("true lesion uptake must be > 0");
  std::vector<double> out;
  out.reserve(set.size());
  for (const auto& v : set) out.push_back(roi_mean(v, roi.lesion) / roi.a_true);
  return out;
}

double contrast_recovery(std::span<const Volume> set, const RoiSpec& roi) {
  const auto per = realization_contrast(set, roi);
  double acc = 0.0;
  for (double c : per) acc += c;
  return acc / static_cast<double>(per.size());
}

double background_std(std::span<const Volume> set, const RoiSpec& roi) {
  check_set(set);
  if (set.size() < 2) throw ConfigError("background STD needs at least two realizations");
  if (roi.background.empty()) throw ConfigError("no background ROIs");
  const double r = static_cast<double>(set.size());
  double total = 0.0;
  for (const auto& voxels : roi.background) {
    std::vector<double> means;
    means.reserve(set.size());
    for (const auto& v : set) means.push_back(roi_mean(v, voxels));
    double bbar = 0.0;
    for (double m : means) bbar += m;
    bbar /= r;
    double ss = 0.0;
    for (double m : means) ss += (m - bbar) * (m - bbar);
    if (!(bbar != 0.0)) throw NumericalError("background ROI mean is zero");
    total += std::sqrt(ss / (r - 1.0)) / bbar;
  }
  return total / static_cast<double>(roi.background.size());
}

std::vector<std::vector<std::size_t>> place_background_rois(const ImageGrid& grid,
                                                            std::span<const std::size_t> allowed,
                                                            std::span<const std::size_t> excluded, int count,
                                                            int radius, std::uint64_t seed) {
  if (count < 1 || radius < 0) throw ConfigError("invalid background ROI count or radius");
  std::vector<char> ok(grid.size(), 0);
  for (std::size_t v : allowed) ok.at(v) = 1;
  for (std::size_t v : excluded) ok.at(v) = 0;

  std::vector<std::pair<int, int>> offsets;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) offsets.emplace_back(dx, dy);
    }
  }
  // Candidate centres whose whole disk is admissible, in index order.
  std::vector<std::vector<std::size_t>> candidates;
  for (int z = 0; z < grid.nz; ++z) {
    for (int y = 0; y < grid.ny; ++y) {
      for (int x = 0; x < grid.nx; ++x) {
        std::vector<std::size_t> disk;
        bool good = true;
        for (auto [dx, dy] : offsets) {
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= grid.nx || yy >= grid.ny || !ok[grid.index(xx, yy, z)]) {
            good = false;
            break;
          }
          disk.push_back(grid.index(xx, yy, z));
        }
        if (good) candidates.push_back(std::move(disk));
      }
    }
  }
  if (candidates.empty()) throw ConfigError("no room for background ROIs in the background tissue");

  // Prefer distinct centres; reuse only once every candidate has been taken.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::vector<std::size_t>> rois;
  while (static_cast<int>(rois.size()) < count) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t i = 0; i < order.size() && static_cast<int>(rois.size()) < count; ++i) {
      rois.push_back(candidates[order[i]]);
    }
  }
  return rois;
}

SweepPoint evaluate_point(double sweep_value, std::span<const Volume> set, const RoiSpec& roi) {
  SweepPoint p;
  p.sweep_value = sweep_value;
  p.realization_cr = realization_contrast(set, roi);
  double acc = 0.0;
  for (double c : p.realization_cr) acc += c;
  p.cr = acc / static_cast<double>(p.realization_cr.size());
  p.std = background_std(set, roi);
  return p;
}

std::optional<double> locate_std(const Curve& c, double std) {
  const auto& pts = c.points;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].std == std) return static_cast<double>(i);
    if (i + 1 < pts.size()) {
      const double a = pts[i].std;
      const double b = pts[i + 1].std;
      if ((a < std && std < b) || (b < std && std < a)) {
        return static_cast<double>(i) + (std - a) / (b - a);
      }
    }
  }
  return std::nullopt;
}

namespace {
template <typename Get>
double interpolate(const Curve& c, double index, Get get) {
  if (c.points.empty() || index < 0.0 || index > static_cast<double>(c.points.size() - 1)) {
    throw DomainError("curve index out of range");
  }
  const auto i = static_cast<std::size_t>(std::floor(index));
  const double f = index - static_cast<double>(i);
  if (i + 1 >= c.points.size() || f == 0.0) return get(c.points[i]);
  return (1.0 - f) * get(c.points[i]) + f * get(c.points[i + 1]);
}
}  // namespace

double cr_at(const Curve& c, double index) {
  return interpolate(c, index, [](const SweepPoint& p) { return p.cr; });
}

double realization_cr_at(const Curve& c, double index, std::size_t realization) {
  return interpolate(c, index, [&](const SweepPoint& p) { return p.realization_cr.at(realization); });
}

std::optional<double> common_std(std::span<const Curve> curves) {
  if (curves.empty()) return std::nullopt;
  double lo = -INFINITY;
  double hi = INFINITY;
  for (const auto& c : curves) {
    if (c.points.empty()) return std::nullopt;
    double cmin = INFINITY;
    double cmax = -INFINITY;
    for (const auto& p : c.points) {
      cmin = std::min(cmin, p.std);
      cmax = std::max(cmax, p.std);
    }
    lo = std::max(lo, cmin);
    hi = std::min(hi, cmax);
  }
  if (!(lo <= hi)) return std::nullopt;
  return 0.5 * (lo + hi);
}

PairedComparison compare_at_std(const Curve& a, const Curve& b, double std) {
  const auto ia = locate_std(a, std);
  const auto ib = locate_std(b, std);
  if (!ia || !ib) throw ConfigError("curves '" + a.method + "' and '" + b.method + "' do not both reach the STD");
  const std::size_t r = a.points.front().realization_cr.size();
  for (const auto* c : {&a, &b}) {
    for (const auto& p : c->points) {
      if (p.realization_cr.size() != r) throw ConfigError("paired comparison needs matching realization counts");
    }
  }
  PairedComparison out;
  out.std = std;
  out.cr_a = cr_at(a, *ia);
  out.cr_b = cr_at(b, *ib);
  out.realizations = r;
  if (r == 0) {
    out.mean_difference = out.cr_a - out.cr_b;
    return out;
  }
  std::vector<double> d(r);
  double mean = 0.0;
  for (std::size_t k = 0; k < r; ++k) {
    d[k] = realization_cr_at(a, *ia, k) - realization_cr_at(b, *ib, k);
    mean += d[k];
  }
  mean /= static_cast<double>(r);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  out.mean_difference = mean;
  out.standard_error = r > 1 ? std::sqrt(ss / static_cast<double>(r - 1) / static_cast<double>(r)) : 0.0;
  return out;
}

Volume lesion_difference(const Volume& with_lesion, const Volume& without_lesion) {
  require_same_grid(with_lesion, without_lesion, "lesion_difference");
  Volume out(with_lesion.grid());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = with_lesion[i] - without_lesion[i];
  return out;
}

}  // namespace petrecon::eval
