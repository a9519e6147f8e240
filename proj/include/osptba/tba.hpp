#pragma once

// Truncated thermodynamic Bethe ansatz for the osp(1|2) chain: the η_m
// fixed-point system, the free energy, string densities and thermodynamics.
//
//   ln η_1 = πβJ/cosh πu - K*ln(1+1/η_1) + K*ln(1+η_2)
//   ln η_m = K*ln(1+η_{m-1}) - K*ln(1+1/η_m) + K*ln(1+η_{m+1}),  m >= 2
//
// truncated at m = M with η_{M+1} frozen at its asymptotic value
// (M+1)(M+4)/2.

#include <vector>

#include "osptba/kernels.hpp"

namespace osptba {

struct TbaConfig {
  int truncation = 30;  // M
  double half_extent = 20.0;
  int points = 4096;
  double damping = 0.5;      // mixing ω
  double tolerance = 1e-10;  // sup-norm of the fixed-point change
  int max_iterations = 5000;
  int anderson_depth = 10;  // 0: plain damped iteration
  // Steps preconditioned by the inverse Jacobian at the β = 0 state, mixing 1.
  bool precondition = true;
  double tail_tolerance = 1e-3;
  int density_dilation = 64;  // density box half-extent / TBA box half-extent
  int density_points = 32768;

  // M = 30 for T >= 0.1, 60 below.
  static int default_truncation(double temperature) { return temperature < 0.1 ? 60 : 30; }

  Grid grid() const { return Grid(half_extent, points); }
  Grid density_grid() const { return Grid(half_extent * density_dilation, density_points); }
  void validate() const;
};

struct TbaState {
  Grid grid;
  int truncation = 0;
  std::vector<SampledFunction> log_eta;  // ln η_m, m = 1..M (index m-1)
  double beta = 0.0;
  double coupling = 0.0;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;

  double temperature() const { return 1.0 / beta; }
  // max_m |ln η_m(u) - ln η_m(-u)|
  double asymmetry() const;
  // max_m edge deviation of ln η_m from ln(m(m+3)/2)
  double tail_deviation() const;
};

// η_m = m(m+3)/2, m = 1..M: the β = 0 solution and the |u| -> ∞ limits.
std::vector<double> high_t_constants(int truncation);

// ln(1 + e^x) without overflow.
double softplus(double x);

// Constants plus the driving term on m = 1.
TbaState initialize_eta(const TbaConfig& config, double beta, double coupling);

// One damped step ln η <- (1-ω) ln η + ω F(ln η).
TbaState iterate_once(const TbaState& state, double damping);

// Sup-norm of F(ln η) - ln η.
double fixed_point_residual(const TbaState& state);

// Iterates to the fixed point (Anderson-accelerated when depth > 0). The
// returned state carries converged/iterations/residual; a non-converged
// state is returned, not thrown. Throws NumericalError on non-finite values.
TbaState solve(const TbaConfig& config, double beta, double coupling);

// f = J(4π/(3√3) - 1) - T ∫ R(u) ln(1 + η_1(u)) du. Throws ConvergenceError
// for a non-converged state.
double free_energy(const TbaState& state);

// Residual of ln(1+η_m) = 2πβJ f_m + sum_l A_ml ln(1+1/η_l), the l > M part
// taken at the frozen constants. Entry m-1 is the max over |u| <= window.
std::vector<double> integral_equation_residual(const TbaState& state, const TbaConfig& config, double window = 10.0);

struct DensityState {
  Grid grid;  // wide grid, η_m frozen at its constant outside the TBA box
  int truncation = 0;
  std::vector<SampledFunction> rho_p;
  std::vector<SampledFunction> rho_h;
  // Contributions of the frozen strings m > M.
  double tail_energy = 0.0;   // sum_{m>M} ∫ 2π f_m ρ_m^p
  double tail_entropy = 0.0;  // per-site entropy of m > M
  int solver_iterations = 0;
  double solver_error = 0.0;
};

// ρ_m^p and ρ_m^h = η_m ρ_m^p from the inverted density equations,
// ρ_m^p + ρ_m^h = δ_{m1} K + K*(ρ_m^p + ρ_{m-1}^h + ρ_{m+1}^h), with the
// m > M hierarchy summed exactly in Fourier space. Throws NumericalError on
// densities below -1e-8.
DensityState recover_densities(const TbaState& state, const TbaConfig& config);

// |e^{-m|k|/2} - ρ̂_m^h(k) - sum_l Â_lm(k) ρ̂_l^p(k)| maximized over m <= M and
// the given k.
double density_equation_residual(const DensityState& dens, const std::vector<double>& ks);

struct ThermoResult {
  double free_energy = 0.0;
  double energy = 0.0;
  double entropy = 0.0;
  double gap = 0.0;  // (e - T s) - f
};

// e = J(sum_m ∫ 2π f_m ρ_m^p - 1), s = sum_m ∫ [ρ ln ρ - ρ^h ln ρ^h - ρ^p ln ρ^p].
// Throws NumericalError when |gap| > gap_tolerance.
ThermoResult thermo_observables(const DensityState& dens, const TbaState& state, double gap_tolerance = 1e-4);

// ε_m(u) = 2πJ f_m(u), the J > 0 low-temperature limit of T ln η_m.
double epsilon_low_t(int m, double u, double coupling);

}  // namespace osptba
