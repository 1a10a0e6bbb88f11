#include <CLI11.hpp>

#include <iostream>

#include "petrecon/config.hpp"
#include "petrecon/errors.hpp"
#include "petrecon/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kMissingArtifact = 3, kNumerical = 4 };

}  // namespace

int main(int argc, char** argv) {
  using namespace petrecon;
  CLI::App app{"Desk-scale PET simulation and reconstruction"};
  std::string subcommand;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool print_defaults = false;
  std::vector<std::string> methods;
  std::optional<double> fwhm;
  std::optional<double> beta;
  int realization = 0;

  app.add_option("subcommand", subcommand, "phantom | simulate | build-train-set | train | reconstruct | evaluate | plot | all")
      ->check(CLI::IsMember(pipeline::kSubcommands));
  app.add_option("--config", config_path, "run configuration file");
  app.add_option("--seed", seed, "override the configured global seed");
  app.add_option("--threads", threads, "worker thread cap (0 = all cores)");
  app.add_flag("--print-defaults", print_defaults, "print every configuration key with its default and exit");
  app.add_option("--method", methods, "reconstruct: mlem, mapem, gauss, cnn-denoise, cnn-admm (repeatable)")
      ->delimiter(',')
      ->check(CLI::IsMember(pipeline::kMethods));
  app.add_option("--fwhm", fwhm, "reconstruct: Gaussian post-filter FWHM in mm (method gauss)");
  app.add_option("--beta", beta, "reconstruct: penalty weight (method mapem)");
  app.add_option("--realization", realization, "reconstruct: test realization index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (print_defaults) {
    std::cout << config::defaults_text();
    return kOk;
  }
  if (subcommand.empty()) {
    std::cerr << "error: a subcommand is required\n" << app.help();
    return kConfig;
  }
  if (config_path.empty()) {
    std::cerr << "error: --config is required\n";
    return kConfig;
  }

  try {
    config::RunConfig cfg = config::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    pipeline::Pipeline p(cfg, [](const std::string& msg) { std::cerr << msg << std::endl; });
    pipeline::ReconstructOptions opt;
    if (!methods.empty()) opt.methods = methods;
    opt.fwhm = fwhm;
    opt.beta = beta;
    opt.realization = realization;
    p.run(subcommand, opt);
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissingArtifact;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kMissingArtifact;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
}
