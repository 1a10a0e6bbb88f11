#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace petrecon::kinetics {

/// Three-exponential plasma input
///   C_p(t) = (A1 t - A2 - A3) e^{-l1 t} + A2 e^{-l2 t} + A3 e^{-l3 t},
/// t in minutes. Defaults are the common FDG constants.
struct InputFunctionParams {
  double A1 = 851.1225;
  double A2 = 21.8798;
  double A3 = 20.8113;
  double lambda1 = 4.133859;
  double lambda2 = 0.01043449;
  double lambda3 = 0.1190996;
};

/// Rate constants of the two-tissue model. K1 in mL/min/cm^3, k2..k4 in 1/min,
/// V is the fractional blood volume.
struct KineticParams {
  double K1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double k4 = 0.0;
  double V = 0.0;

  void validate() const;
  friend bool operator==(const KineticParams&, const KineticParams&) = default;
};

struct TimeFrame {
  double t_start = 20.0;
  double t_end = 60.0;
  void validate() const;
};

double blood_input(double t, const InputFunctionParams& p = {});
double blood_input_derivative(double t, const InputFunctionParams& p = {});

struct InputPeak {
  double time;
  double value;
};
/// Maximum of C_p, located by bisection on the analytic derivative.
InputPeak blood_input_peak(const InputFunctionParams& p = {});

inline constexpr double kDefaultMaxStep = 0.01;  // minutes

/// Tissue curve C_T = (1-V)(C_f + C_b) + V C_p at each time in `times`
/// (strictly increasing, times[0] == 0), with
///   dC_f/dt = K1 C_p - (k2 + k3) C_f + k4 C_b,   dC_b/dt = k3 C_f - k4 C_b,
/// integrated by classical RK4 with steps no longer than `max_step`.
std::vector<double> two_tissue_tac(const KineticParams& k, const InputFunctionParams& input,
                                   std::span<const double> times, double max_step = kDefaultMaxStep);

/// Mean of C_T over the frame: (1/(t1-t0)) * integral of C_T from t0 to t1.
double frame_average(const KineticParams& k, const InputFunctionParams& input, const TimeFrame& frame,
                     double max_step = kDefaultMaxStep);

/// Draws each parameter from N(mean, (cv*mean)^2) truncated to its valid range
/// ([0, inf), V in [0, 1]) by rejection. Deterministic per seed.
KineticParams sample_kinetics(const KineticParams& mean, double cv, std::uint64_t seed);

/// Mean FDG kinetic parameters per tissue, keyed by tissue name:
/// "myocardium", "liver", "lung", "kidney", "spleen", "pancreas",
/// "soft tissue", "marrow", "lung lesion".
const std::map<std::string, KineticParams>& reference_fdg_kinetics();

}  // namespace petrecon::kinetics
