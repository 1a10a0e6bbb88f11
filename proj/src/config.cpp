#include "petrecon/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "petrecon/errors.hpp"

namespace petrecon::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* type) {
  throw ConfigError("key '" + key + "': cannot parse '" + value + "' as " + type);
}

// ---- value codecs --------------------------------------------------------

template <typename T>
struct Codec;

template <>
struct Codec<int> {
  static std::string show(int v) { return std::to_string(v); }
  static int read(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      const long v = std::stol(s, &used);
      if (used != s.size() || v < INT32_MIN || v > INT32_MAX) throw std::invalid_argument(s);
      return static_cast<int>(v);
    } catch (const std::exception&) {
      bad_value(key, s, "an integer");
    }
  }
};

template <>
struct Codec<unsigned> {
  static std::string show(unsigned v) { return std::to_string(v); }
  static unsigned read(const std::string& key, const std::string& s) {
    const int v = Codec<int>::read(key, s);
    if (v < 0) bad_value(key, s, "a non-negative integer");
    return static_cast<unsigned>(v);
  }
};

template <>
struct Codec<std::uint64_t> {
  static std::string show(std::uint64_t v) { return std::to_string(v); }
  static std::uint64_t read(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
      const unsigned long long v = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      bad_value(key, s, "a non-negative integer");
    }
  }
};

template <>
struct Codec<double> {
  static std::string show(double v) { return fmt(v); }
  static double read(const std::string& key, const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      bad_value(key, s, "a number");
    }
  }
};

template <>
struct Codec<bool> {
  static std::string show(bool v) { return v ? "true" : "false"; }
  static bool read(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    bad_value(key, s, "a boolean");
  }
};

template <>
struct Codec<std::string> {
  static std::string show(const std::string& v) { return v; }
  static std::string read(const std::string&, const std::string& s) { return s; }
};

template <typename T>
struct Codec<std::vector<T>> {
  static std::string show(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + Codec<T>::show(v[i]);
    return out;
  }
  static std::vector<T> read(const std::string& key, const std::string& s) {
    std::vector<T> out;
    if (trim(s).empty()) return out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) out.push_back(Codec<T>::read(key, trim(item)));
    return out;
  }
};

template <>
struct Codec<std::optional<double>> {
  static std::string show(const std::optional<double>& v) { return v ? fmt(*v) : "auto"; }
  static std::optional<double> read(const std::string& key, const std::string& s) {
    if (s == "auto") return std::nullopt;
    return Codec<double>::read(key, s);
  }
};

// ---- field registry ------------------------------------------------------

struct Field {
  std::string section;  // "" for top-level keys
  std::string key;
  std::string doc;
  std::function<std::string(const RunConfig&)> show;
  std::function<void(RunConfig&, const std::string&)> read;
  std::function<void(const RunConfig&)> check;

  std::string full_name() const { return section.empty() ? key : section + "." + key; }
};

template <typename T>
Field make_field(std::string section, std::string key, std::string doc, T& (*access)(RunConfig&),
                 std::function<bool(const T&)> ok = {}, std::string requirement = {}) {
  Field f{std::move(section), std::move(key), std::move(doc), {}, {}, {}};
  const std::string name = f.full_name();
  f.show = [access](const RunConfig& c) { return Codec<T>::show(access(const_cast<RunConfig&>(c))); };
  f.read = [access, name](RunConfig& c, const std::string& s) { access(c) = Codec<T>::read(name, s); };
  if (ok) {
    f.check = [access, ok, name, requirement](const RunConfig& c) {
      if (!ok(access(const_cast<RunConfig&>(c)))) throw ConfigError("key '" + name + "' " + requirement);
    };
  }
  return f;
}

template <typename T>
std::function<bool(const T&)> at_least(T lo) {
  return [lo](const T& v) { return v >= lo; };
}
std::function<bool(const double&)> positive() {
  return [](const double& v) { return v > 0.0; };
}
std::function<bool(const std::vector<int>&)> all_at_least(int lo, bool nonempty = true) {
  return [lo, nonempty](const std::vector<int>& v) {
    if (nonempty && v.empty()) return false;
    for (int x : v) {
      if (x < lo) return false;
    }
    return true;
  };
}
std::function<bool(const std::vector<double>&)> all_nonnegative() {
  return [](const std::vector<double>& v) {
    if (v.empty()) return false;
    for (double x : v) {
      if (x < 0.0) return false;
    }
    return true;
  };
}

#define ACCESS(type, expr) +[](RunConfig& c) -> type& { return expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(make_field<std::uint64_t>("", "seed", "global seed for every random stream", ACCESS(std::uint64_t, c.seed)));
    f.push_back(make_field<std::string>("", "output_dir", "artifact directory, relative to the config file",
                                        ACCESS(std::string, c.output_dir),
                                        [](const std::string& s) { return !s.empty(); }, "must not be empty"));
    f.push_back(make_field<unsigned>("", "threads", "worker thread cap (0 = all cores); results do not depend on it",
                                     ACCESS(unsigned, c.threads)));

    f.push_back(make_field<int>("grid", "nx", "voxels along x", ACCESS(int, c.grid.nx), at_least(1), "must be >= 1"));
    f.push_back(make_field<int>("grid", "ny", "voxels along y", ACCESS(int, c.grid.ny), at_least(1), "must be >= 1"));
    f.push_back(make_field<int>("grid", "nz", "slices", ACCESS(int, c.grid.nz), at_least(1), "must be >= 1"));
    f.push_back(make_field<double>("grid", "voxel_size", "in-plane voxel side, mm", ACCESS(double, c.grid.voxel_size),
                                   positive(), "must be > 0"));
    f.push_back(make_field<double>("grid", "slice_thickness", "axial slice spacing, mm",
                                   ACCESS(double, c.grid.slice_thickness), positive(), "must be > 0"));

    f.push_back(make_field<int>("scanner", "n_angles", "projection angles over [0, pi)",
                                ACCESS(int, c.scanner.n_angles), at_least(1), "must be >= 1"));
    f.push_back(make_field<int>("scanner", "n_bins", "radial bins per angle", ACCESS(int, c.scanner.n_bins),
                                at_least(1), "must be >= 1"));
    f.push_back(make_field<double>("scanner", "bin_spacing", "radial bin width, mm",
                                   ACCESS(double, c.scanner.bin_spacing), positive(), "must be > 0"));
    f.push_back(make_field<int>("scanner", "rays_per_bin", "sub-rays averaged per bin",
                                ACCESS(int, c.scanner.rays_per_bin), at_least(1), "must be >= 1"));

    f.push_back(make_field<int>("phantom", "n_train", "training phantoms", ACCESS(int, c.phantom.n_train), at_least(1),
                                "must be >= 1"));
    f.push_back(make_field<int>("phantom", "train_lesions", "lung lesions per training phantom",
                                ACCESS(int, c.phantom.train_lesions), at_least(0), "must be >= 0"));
    f.push_back(make_field<int>("phantom", "test_lesions", "lung lesions in the test phantom",
                                ACCESS(int, c.phantom.test_lesions), at_least(1), "must be >= 1"));
    f.push_back(make_field<double>("phantom", "test_lesion_diameter", "test lesion diameter, mm",
                                   ACCESS(double, c.phantom.test_lesion_diameter), positive(), "must be > 0"));
    f.push_back(make_field<double>("phantom", "lesion_diameter_min", "smallest training lesion diameter, mm",
                                   ACCESS(double, c.phantom.shape.lesion_diameter_min), positive(), "must be > 0"));
    f.push_back(make_field<double>("phantom", "lesion_diameter_max", "largest training lesion diameter, mm",
                                   ACCESS(double, c.phantom.shape.lesion_diameter_max), positive(), "must be > 0"));
    f.push_back(make_field<double>("phantom", "organ_size_cv", "relative spread of organ sizes between phantoms",
                                   ACCESS(double, c.phantom.shape.organ_size_cv), at_least(0.0), "must be >= 0"));
    f.push_back(make_field<double>("phantom", "organ_shift", "in-plane organ position jitter, mm",
                                   ACCESS(double, c.phantom.shape.organ_shift), at_least(0.0), "must be >= 0"));
    f.push_back(make_field<double>("phantom", "kinetics_cv", "coefficient of variation of kinetic parameters",
                                   ACCESS(double, c.phantom.kinetics_cv), at_least(0.0), "must be >= 0"));
    f.push_back(make_field<double>("phantom", "frame_start", "frame start, minutes post injection",
                                   ACCESS(double, c.phantom.frame.t_start), at_least(0.0), "must be >= 0"));
    f.push_back(make_field<double>("phantom", "frame_end", "frame end, minutes post injection",
                                   ACCESS(double, c.phantom.frame.t_end), positive(), "must be > 0"));
    f.push_back(make_field<double>("phantom", "input_a1", "blood input A1", ACCESS(double, c.phantom.input.A1)));
    f.push_back(make_field<double>("phantom", "input_a2", "blood input A2", ACCESS(double, c.phantom.input.A2)));
    f.push_back(make_field<double>("phantom", "input_a3", "blood input A3", ACCESS(double, c.phantom.input.A3)));
    f.push_back(make_field<double>("phantom", "input_lambda1", "blood input decay 1, 1/min",
                                   ACCESS(double, c.phantom.input.lambda1), positive(), "must be > 0"));
    f.push_back(make_field<double>("phantom", "input_lambda2", "blood input decay 2, 1/min",
                                   ACCESS(double, c.phantom.input.lambda2), positive(), "must be > 0"));
    f.push_back(make_field<double>("phantom", "input_lambda3", "blood input decay 3, 1/min",
                                   ACCESS(double, c.phantom.input.lambda3), positive(), "must be > 0"));

    f.push_back(make_field<double>("acquisition", "target_true_counts", "expected trues per slice (high count)",
                                   ACCESS(double, c.acquisition.target_true_counts), positive(), "must be > 0"));
    f.push_back(make_field<double>(
        "acquisition", "background_fraction", "share of noise-free prompts from scatter + randoms",
        ACCESS(double, c.acquisition.background_fraction), [](const double& v) { return v >= 0.0 && v < 1.0; },
        "must lie in [0, 1)"));
    f.push_back(make_field<double>("acquisition", "thin_ratio", "keep probability for low-count data",
                                   ACCESS(double, c.acquisition.thin_ratio),
                                   [](const double& v) { return v > 0.0 && v <= 1.0; }, "must lie in (0, 1]"));

    f.push_back(make_field<int>("training", "label_iterations", "MLEM iterations for high-count labels",
                                ACCESS(int, c.training.label_iterations), at_least(1), "must be >= 1"));
    f.push_back(make_field<std::vector<int>>("training", "input_iterations",
                                             "MLEM iterations of the low-count inputs",
                                             ACCESS(std::vector<int>, c.training.input_iterations), all_at_least(1),
                                             "must be a non-empty list of values >= 1"));
    f.push_back(make_field<int>("training", "epochs", "training epochs", ACCESS(int, c.training.train.epochs),
                                at_least(0), "must be >= 0"));
    f.push_back(make_field<int>("training", "batch_size", "mini-batch size", ACCESS(int, c.training.train.batch_size),
                                at_least(1), "must be >= 1"));
    f.push_back(make_field<double>("training", "learning_rate", "Adam learning rate",
                                   ACCESS(double, c.training.train.adam.learning_rate), positive(), "must be > 0"));
    f.push_back(make_field<double>("training", "lr_decay", "learning-rate factor applied after each epoch",
                                   ACCESS(double, c.training.train.lr_decay),
                                   [](const double& v) { return v > 0.0 && v <= 1.0; }, "must lie in (0, 1]"));
    f.push_back(make_field<bool>("training", "augment", "random rotations, flips and shifts",
                                 ACCESS(bool, c.training.train.augment)));
    f.push_back(make_field<int>("training", "max_shift", "largest augmentation shift, voxels",
                                ACCESS(int, c.training.train.max_shift), at_least(0), "must be >= 0"));

    f.push_back(make_field<std::vector<int>>("network", "channels", "feature channels per scale",
                                             ACCESS(std::vector<int>, c.network.channels), all_at_least(1),
                                             "must be a non-empty list of values >= 1"));
    f.push_back(make_field<int>("network", "convs_per_scale", "conv blocks per scale",
                                ACCESS(int, c.network.convs_per_scale), at_least(1), "must be >= 1"));
    f.push_back(make_field<bool>("network", "batch_norm", "batch normalization after each conv",
                                 ACCESS(bool, c.network.batch_norm)));
    f.push_back(make_field<bool>("network", "residual", "add the centre input slice to the output",
                                 ACCESS(bool, c.network.residual)));
    f.push_back(make_field<double>("network", "bn_momentum", "running-statistics momentum",
                                   ACCESS(double, c.network.bn_momentum),
                                   [](const double& v) { return v >= 0.0 && v < 1.0; }, "must lie in [0, 1)"));
    f.push_back(make_field<double>("network", "bn_epsilon", "batch-norm variance offset",
                                   ACCESS(double, c.network.bn_epsilon), positive(), "must be > 0"));

    f.push_back(make_field<int>("recon.mlem", "iterations", "MLEM iterations for `reconstruct`",
                                ACCESS(int, c.mlem.iterations), at_least(1), "must be >= 1"));
    f.push_back(make_field<double>("recon.mlem", "fwhm", "Gaussian post-filter FWHM for method gauss, mm",
                                   ACCESS(double, c.mlem.fwhm), at_least(0.0), "must be >= 0"));

    f.push_back(make_field<double>("recon.mapem", "beta", "penalty weight for `reconstruct`",
                                   ACCESS(double, c.mapem.penalty.beta), at_least(0.0), "must be >= 0"));
    f.push_back(make_field<double>("recon.mapem", "sigma_fraction", "fair-penalty sigma as a fraction of the mean",
                                   ACCESS(double, c.mapem.penalty.sigma_fraction), positive(), "must be > 0"));
    f.push_back(make_field<int>("recon.mapem", "warmup_iterations", "MLEM warm-up iterations",
                                ACCESS(int, c.mapem.penalty.warmup_iterations), at_least(0), "must be >= 0"));
    f.push_back(make_field<int>("recon.mapem", "iterations", "MAP-EM iterations after warm-up",
                                ACCESS(int, c.mapem.iterations), at_least(1), "must be >= 1"));

    f.push_back(make_field<std::optional<double>>(
        "recon.admm", "rho", "ADMM penalty ('auto' = rho_scale * median(p) / median(x_init))",
        ACCESS(std::optional<double>, c.admm.rho), [](const std::optional<double>& v) { return !v || *v > 0.0; },
        "must be 'auto' or > 0"));
    f.push_back(make_field<double>("recon.admm", "rho_scale", "factor of the automatic rho",
                                   ACCESS(double, c.admm.rho_scale), positive(), "must be > 0"));
    f.push_back(make_field<int>("recon.admm", "max_iterations", "outer iterations",
                                ACCESS(int, c.admm.max_iterations), at_least(1), "must be >= 1"));
    f.push_back(make_field<int>("recon.admm", "sub_iterations", "accelerated steps per alpha subproblem",
                                ACCESS(int, c.admm.sub_iterations), at_least(1), "must be >= 1"));
    f.push_back(make_field<double>("recon.admm", "initial_step", "initial alpha step L",
                                   ACCESS(double, c.admm.initial_step), positive(), "must be > 0"));
    f.push_back(make_field<double>("recon.admm", "shrink", "step factor after a rejected alpha step",
                                   ACCESS(double, c.admm.shrink), [](const double& v) { return v > 0.0 && v < 1.0; },
                                   "must lie in (0, 1)"));
    f.push_back(make_field<int>("recon.admm", "init_mlem_iterations", "MLEM iterations before ADMM",
                                ACCESS(int, c.admm.init_mlem_iterations), at_least(1), "must be >= 1"));

    f.push_back(make_field<int>("eval", "realizations", "low-count noise realizations",
                                ACCESS(int, c.eval.realizations), at_least(2), "must be >= 2"));
    f.push_back(make_field<int>("eval", "background_rois", "background ROIs", ACCESS(int, c.eval.background_rois),
                                at_least(1), "must be >= 1"));
    f.push_back(make_field<int>("eval", "roi_radius", "background ROI radius, voxels", ACCESS(int, c.eval.roi_radius),
                                at_least(0), "must be >= 0"));
    f.push_back(make_field<std::string>("eval", "background_tissue", "tissue hosting the background ROIs",
                                        ACCESS(std::string, c.eval.background_tissue)));
    f.push_back(make_field<std::vector<int>>("eval", "mlem_iterations", "MLEM sweep (iterations)",
                                             ACCESS(std::vector<int>, c.eval.mlem_iterations), all_at_least(1),
                                             "must be a non-empty list of values >= 1"));
    f.push_back(make_field<int>("eval", "gauss_iteration", "MLEM iteration filtered by the gauss sweep",
                                ACCESS(int, c.eval.gauss_iteration), at_least(1), "must be >= 1"));
    f.push_back(make_field<std::vector<double>>("eval", "gauss_fwhm", "gauss sweep (FWHM, mm)",
                                                ACCESS(std::vector<double>, c.eval.gauss_fwhm), all_nonnegative(),
                                                "must be a non-empty list of values >= 0"));
    f.push_back(make_field<std::vector<int>>("eval", "denoise_iterations",
                                             "cnn-denoise sweep (MLEM iteration of the input)",
                                             ACCESS(std::vector<int>, c.eval.denoise_iterations), all_at_least(1),
                                             "must be a non-empty list of values >= 1"));
    f.push_back(make_field<std::vector<int>>("eval", "admm_iterations", "cnn-admm sweep (outer iteration)",
                                             ACCESS(std::vector<int>, c.eval.admm_iterations), all_at_least(1),
                                             "must be a non-empty list of values >= 1"));
    f.push_back(make_field<std::vector<double>>("eval", "mapem_beta", "mapem sweep (beta)",
                                                ACCESS(std::vector<double>, c.eval.mapem_beta), all_nonnegative(),
                                                "must be a non-empty list of values >= 0"));
    return f;
  }();
  return table;
}

#undef ACCESS

template <typename T>
bool strictly_increasing(const std::vector<T>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i - 1] < v[i])) return false;
  }
  return true;
}

}  // namespace

std::filesystem::path RunConfig::output_path() const {
  const std::filesystem::path p(output_dir);
  return p.is_absolute() ? p : base_dir / p;
}

void validate(const RunConfig& c) {
  for (const auto& f : fields()) {
    if (f.check) f.check(c);
  }
  if (!(c.phantom.frame.t_start < c.phantom.frame.t_end)) {
    throw ConfigError("key 'phantom.frame_end' must exceed phantom.frame_start");
  }
  if (c.phantom.shape.lesion_diameter_min > c.phantom.shape.lesion_diameter_max) {
    throw ConfigError("key 'phantom.lesion_diameter_max' must be >= phantom.lesion_diameter_min");
  }
  const auto max_it = [](const std::vector<int>& v) { return v.empty() ? 0 : v.back(); };
  if (!strictly_increasing(c.training.input_iterations)) {
    throw ConfigError("key 'training.input_iterations' must be strictly increasing");
  }
  if (!strictly_increasing(c.eval.mlem_iterations)) throw ConfigError("key 'eval.mlem_iterations' must be strictly increasing");
  if (!strictly_increasing(c.eval.denoise_iterations)) {
    throw ConfigError("key 'eval.denoise_iterations' must be strictly increasing");
  }
  if (!strictly_increasing(c.eval.admm_iterations)) throw ConfigError("key 'eval.admm_iterations' must be strictly increasing");
  if (max_it(c.eval.admm_iterations) > c.admm.max_iterations) {
    throw ConfigError("key 'eval.admm_iterations' exceeds recon.admm.max_iterations");
  }
  if (!strictly_increasing(c.eval.gauss_fwhm)) throw ConfigError("key 'eval.gauss_fwhm' must be strictly increasing");
  if (!strictly_increasing(c.eval.mapem_beta)) throw ConfigError("key 'eval.mapem_beta' must be strictly increasing");
  try {
    c.network.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("section 'network': ") + e.what());
  }
  const int factor = 1 << (c.network.scales() - 1);
  if (c.grid.nx % factor != 0 || c.grid.ny % factor != 0) {
    throw ConfigError("keys 'grid.nx'/'grid.ny' must be multiples of 2^(scales-1) = " + std::to_string(factor));
  }
  if (c.grid.nx != c.grid.ny) throw ConfigError("keys 'grid.nx' and 'grid.ny' must be equal");
}

RunConfig parse_config(const std::string& text) {
  std::map<std::string, const Field*> by_name;
  std::map<std::string, bool> sections{{"", true}};
  for (const auto& f : fields()) {
    by_name[f.full_name()] = &f;
    sections[f.section] = true;
  }
  RunConfig cfg;
  std::map<std::string, bool> seen;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw ConfigError("unknown section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string name = section.empty() ? key : section + "." + key;
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw ConfigError("unknown key '" + name + "'");
    if (seen[name]) throw ConfigError("key '" + name + "' given twice");
    seen[name] = true;
    it->second->read(cfg, value);
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str());
  cfg.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return cfg;
}

namespace {
std::string render(const RunConfig& cfg, bool with_docs) {
  std::string out;
  std::string section = "\x01";
  for (const auto& f : fields()) {
    if (f.section != section) {
      section = f.section;
      if (!section.empty()) out += "\n[" + section + "]\n";
    }
    if (with_docs) out += "# " + f.doc + "\n";
    out += f.key + " = " + f.show(cfg) + "\n";
  }
  return out;
}
}  // namespace

std::string serialize(const RunConfig& cfg) { return render(cfg, false); }

std::string defaults_text() { return render(RunConfig{}, true); }

std::string config_hash(const RunConfig& cfg) {
  // The thread cap does not change any result, so it is left out.
  RunConfig canonical = cfg;
  canonical.threads = 0;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize(canonical)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool operator==(const RunConfig& a, const RunConfig& b) { return serialize(a) == serialize(b); }

}  // namespace petrecon::config
