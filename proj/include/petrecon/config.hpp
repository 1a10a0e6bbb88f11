#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "petrecon/admm.hpp"
#include "petrecon/classic.hpp"
#include "petrecon/kinetics.hpp"
#include "petrecon/network.hpp"
#include "petrecon/phantom.hpp"
#include "petrecon/projector.hpp"
#include "petrecon/trainer.hpp"
#include "petrecon/volume.hpp"

namespace petrecon::config {

struct PhantomSettings {
  int n_train = 18;
  int train_lesions = 3;
  int test_lesions = 5;
  double test_lesion_diameter = 12.8;
  phantom::DeskPhantomOptions shape;  // n_lesions is set per phantom
  double kinetics_cv = 0.1;
  kinetics::TimeFrame frame;
  kinetics::InputFunctionParams input;
};

struct AcquisitionSettings {
  double target_true_counts = 2e5;
  double background_fraction = 0.6;
  double thin_ratio = 0.1;
};

struct TrainingSettings {
  int label_iterations = 60;
  std::vector<int> input_iterations{20, 40, 60};
  nn::TrainConfig train;
};

struct MlemSettings {
  int iterations = 60;
  double fwhm = 8.0;  // mm, post-filter used by the gauss method
};

struct MapEmSettings {
  recon::PenaltyConfig penalty;
  int iterations = 50;
};

struct EvalSettings {
  int realizations = 20;
  int background_rois = 42;
  int roi_radius = 3;
  std::string background_tissue = "liver";
  std::vector<int> mlem_iterations{10, 20, 30, 40, 60, 80, 100};
  int gauss_iteration = 60;
  std::vector<double> gauss_fwhm{0, 4, 6, 8, 10, 12, 14, 16, 18, 20, 24};
  std::vector<int> denoise_iterations{10, 20, 30, 40, 60, 80, 100};
  std::vector<int> admm_iterations{1, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20};
  std::vector<double> mapem_beta{0.001, 0.003, 0.01, 0.03, 0.1};
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  unsigned threads = 0;
  ImageGrid grid{64, 64, 9, 4.0, 4.0};
  projector::ScannerGeometry scanner;
  PhantomSettings phantom;
  AcquisitionSettings acquisition;
  TrainingSettings training;
  nn::NetworkConfig network;
  MlemSettings mlem;
  MapEmSettings mapem;
  admm::AdmmConfig admm;
  EvalSettings eval;

  /// Directory of the config file; relative paths resolve against it.
  std::filesystem::path base_dir = ".";

  std::filesystem::path output_path() const;
};

/// Parses `[section]` / `key = value` text ('#' and ';' start comments).
/// Unknown keys, malformed values and out-of-range settings raise
/// ConfigError naming the key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, in canonical order.
std::string serialize(const RunConfig& cfg);
/// serialize() of the defaults with one comment line per key.
std::string defaults_text();

/// Cross-field checks (also run by parse_config).
void validate(const RunConfig& cfg);

/// FNV-1a 64-bit of serialize(cfg) (thread cap excluded) as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace petrecon::config
