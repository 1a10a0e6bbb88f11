#include "petrecon/kinetics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "petrecon/errors.hpp"

namespace petrecon::kinetics {

void KineticParams::validate() const {
  if (K1 < 0 || k2 < 0 || k3 < 0 || k4 < 0 || V < 0 || V > 1) {
    throw ConfigError("kinetic parameters must be non-negative with V <= 1");
  }
}

void TimeFrame::validate() const {
  if (!(t_start >= 0.0) || !(t_end > t_start)) {
    throw ConfigError("time frame needs 0 <= t_start < t_end");
  }
}

double blood_input(double t, const InputFunctionParams& p) {
  if (t < 0.0) throw DomainError("blood input is defined for t >= 0");
  // Differences of exponentials via expm1 give an exact zero at t = 0.
  const double e1 = std::exp(-p.lambda1 * t);
  const double d2 = -std::exp(-p.lambda2 * t) * std::expm1(-(p.lambda1 - p.lambda2) * t);
  const double d3 = -std::exp(-p.lambda3 * t) * std::expm1(-(p.lambda1 - p.lambda3) * t);
  return p.A1 * t * e1 + p.A2 * d2 + p.A3 * d3;
}

double blood_input_derivative(double t, const InputFunctionParams& p) {
  if (t < 0.0) throw DomainError("blood input is defined for t >= 0");
  const double e1 = std::exp(-p.lambda1 * t);
  return e1 * (p.A1 * (1.0 - p.lambda1 * t) + (p.A2 + p.A3) * p.lambda1) -
         p.A2 * p.lambda2 * std::exp(-p.lambda2 * t) - p.A3 * p.lambda3 * std::exp(-p.lambda3 * t);
}

InputPeak blood_input_peak(const InputFunctionParams& p) {
  double lo = 0.0;
  double hi = 1e-3;
  while (blood_input_derivative(hi, p) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e4) throw DomainError("blood input has no interior maximum");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (blood_input_derivative(mid, p) > 0.0 ? lo : hi) = mid;
  }
  const double t = 0.5 * (lo + hi);
  return {t, blood_input(t, p)};
}

namespace {

// State: free, bound, running integral of C_T.
using State = std::array<double, 3>;

State rhs(const KineticParams& k, const InputFunctionParams& in, double t, const State& y) {
  const double cp = blood_input(t, in);
  return {k.K1 * cp - (k.k2 + k.k3) * y[0] + k.k4 * y[1], k.k3 * y[0] - k.k4 * y[1],
          (1.0 - k.V) * (y[0] + y[1]) + k.V * cp};
}

State rk4(const KineticParams& k, const InputFunctionParams& in, double t, const State& y, double h) {
  auto axpy = [](const State& a, double s, const State& b) {
    return State{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]};
  };
  const State k1 = rhs(k, in, t, y);
  const State k2 = rhs(k, in, t + 0.5 * h, axpy(y, 0.5 * h, k1));
  const State k3 = rhs(k, in, t + 0.5 * h, axpy(y, 0.5 * h, k2));
  const State k4 = rhs(k, in, t + h, axpy(y, h, k3));
  State out;
  for (int i = 0; i < 3; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

// Integrates to every time in `times`, returning the state at each.
std::vector<State> integrate(const KineticParams& k, const InputFunctionParams& in,
                             std::span<const double> times, double max_step) {
  if (times.empty() || times[0] != 0.0) throw DomainError("time grid must start at 0");
  if (!(max_step > 0.0)) throw DomainError("ODE step must be > 0");
  std::vector<State> out;
  out.reserve(times.size());
  State y{0.0, 0.0, 0.0};
  out.push_back(y);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = times[i] - times[i - 1];
    if (!(dt > 0.0)) throw DomainError("time grid must be strictly increasing");
    const int n = static_cast<int>(std::ceil(dt / max_step - 1e-9));
    const double h = dt / n;
    for (int s = 0; s < n; ++s) y = rk4(k, in, times[i - 1] + s * h, y, h);
    out.push_back(y);
  }
  return out;
}

}  // namespace

std::vector<double> two_tissue_tac(const KineticParams& k, const InputFunctionParams& input,
                                   std::span<const double> times, double max_step) {
  k.validate();
  const auto states = integrate(k, input, times, max_step);
  std::vector<double> tac(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double v = (1.0 - k.V) * (states[i][0] + states[i][1]) + k.V * blood_input(times[i], input);
    tac[i] = std::max(0.0, v);
  }
  return tac;
}

double frame_average(const KineticParams& k, const InputFunctionParams& input, const TimeFrame& frame,
                     double max_step) {
  k.validate();
  frame.validate();
  std::vector<double> times{0.0};
  if (frame.t_start > 0.0) times.push_back(frame.t_start);
  times.push_back(frame.t_end);
  const auto states = integrate(k, input, times, max_step);
  const double integral = states.back()[2] - states[times.size() - 2][2];
  return std::max(0.0, integral / (frame.t_end - frame.t_start));
}

KineticParams sample_kinetics(const KineticParams& mean, double cv, std::uint64_t seed) {
  mean.validate();
  if (cv < 0.0) throw DomainError("coefficient of variation must be >= 0");
  std::mt19937_64 rng(seed);
  auto draw = [&](double m, double upper) {
    if (cv == 0.0 || m == 0.0) return m;
    std::normal_distribution<double> dist(m, cv * m);
    for (;;) {
      const double v = dist(rng);
      if (v >= 0.0 && v <= upper) return v;
    }
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  KineticParams out;
  out.K1 = draw(mean.K1, kInf);
  out.k2 = draw(mean.k2, kInf);
  out.k3 = draw(mean.k3, kInf);
  out.k4 = draw(mean.k4, kInf);
  out.V = draw(mean.V, 1.0);
  return out;
}

const std::map<std::string, KineticParams>& reference_fdg_kinetics() {
  static const std::map<std::string, KineticParams> table{
      {"myocardium", {0.6, 1.2, 0.1, 0.001, 0.0}},
      {"liver", {0.864, 0.981, 0.005, 0.016, 0.0}},
      {"lung", {0.108, 0.735, 0.016, 0.013, 0.017}},
      {"kidney", {0.263, 0.299, 0.0, 0.0, 0.438}},
      {"spleen", {1.207, 1.909, 0.008, 0.014, 0.0}},
      {"pancreas", {0.648, 1.64, 0.027, 0.016, 0.107}},
      {"soft tissue", {0.047, 0.325, 0.084, 0.0, 0.019}},
      {"marrow", {0.425, 1.055, 0.023, 0.013, 0.04}},
      {"lung lesion", {0.63, 0.842, 0.092, 0.014, 0.132}},
  };
  return table;
}

}  // namespace petrecon::kinetics
