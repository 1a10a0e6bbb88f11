#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "petrecon/config.hpp"
#include "petrecon/metrics.hpp"

namespace petrecon::pipeline {

namespace fs = std::filesystem;

inline const std::vector<std::string> kMethods{"mlem", "mapem", "gauss", "cnn-denoise", "cnn-admm"};
inline const std::vector<std::string> kSubcommands{"phantom",     "simulate", "build-train-set", "train",
                                                   "reconstruct", "evaluate", "plot",            "all"};

struct ReconstructOptions {
  std::vector<std::string> methods{"mlem"};
  std::optional<double> fwhm;  // overrides recon.mlem.fwhm for gauss
  std::optional<double> beta;  // overrides recon.mapem.beta
  int realization = 0;
};

using Logger = std::function<void(const std::string&)>;

/// Runs subcommands against one configuration. Every artifact lands under
/// the configured output directory and is recorded in manifest.json with the
/// config hash.
class Pipeline {
 public:
  explicit Pipeline(config::RunConfig cfg, Logger log = {});

  const config::RunConfig& config() const { return cfg_; }
  const fs::path& output_dir() const { return out_; }

  void phantom();
  void simulate();
  void build_train_set();
  void train();
  void reconstruct(const ReconstructOptions& opt);
  void evaluate();
  void plot();
  /// phantom, simulate, build-train-set, train, reconstruct (every method), evaluate, plot.
  void all();

  /// Dispatches a subcommand by name.
  void run(const std::string& subcommand, const ReconstructOptions& opt = {});

  /// Seconds spent in the most recent train() and evaluate() calls.
  double last_train_seconds() const { return train_seconds_; }
  double last_evaluate_seconds() const { return evaluate_seconds_; }

 private:
  const projector::SystemMatrix& matrix();

  config::RunConfig cfg_;
  fs::path out_;
  Logger log_;
  std::shared_ptr<const projector::SystemMatrix> matrix_;
  double train_seconds_ = 0.0;
  double evaluate_seconds_ = 0.0;
};

/// Artifact paths relative to the output directory.
namespace paths {
std::string train_activity(int i);
std::string train_labels(int i);
inline constexpr const char* kTestActivity = "phantoms/test_activity.piv";
inline constexpr const char* kTestNoLesionActivity = "phantoms/test_nolesion_activity.piv";
inline constexpr const char* kTestLabels = "phantoms/test_labels.piv";
inline constexpr const char* kTissues = "phantoms/tissues.json";
std::string train_high(int i);
std::string train_low(int i);
std::string test_low(int r, bool with_lesion = true);
inline constexpr const char* kScales = "data/scales.json";
std::string train_label_image(int i);
std::string train_input_image(int i, int iteration);
inline constexpr const char* kWeights = "weights/network.pnw";
inline constexpr const char* kLossHistory = "weights/loss_history.csv";
std::string recon(const std::string& method);
inline constexpr const char* kReconDiagnostics = "recon/cnn-admm_diagnostics.csv";
inline constexpr const char* kCurves = "eval/curves.csv";
inline constexpr const char* kRealizations = "eval/realizations.csv";
inline constexpr const char* kComparison = "eval/comparison.csv";
inline constexpr const char* kAdmmDiagnostics = "eval/admm_diagnostics.csv";
inline constexpr const char* kAdmmSubObjectives = "eval/admm_subobjectives.csv";
inline constexpr const char* kDenoiseEfficacy = "eval/denoise_efficacy.csv";
inline constexpr const char* kLesionDifference = "eval/lesion_difference.csv";
std::string lesion_difference_image(const std::string& method);
inline constexpr const char* kPlot = "plots/cr_std.svg";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace paths

}  // namespace petrecon::pipeline
