#pragma once

// Bethe-root machinery: Q-functions, the dressed vacuum form, the Bethe
// equations in product and logarithmic form, a Newton solver and string
// configurations.

#include <complex>
#include <vector>

namespace osptba {

using cplx = std::complex<double>;

inline constexpr double kRootCollision = 1e-8;

// Root set {u_j} with quantum number n = roots.size() on an N-site chain.
class BetheState {
 public:
  BetheState(int sites, std::vector<cplx> roots);

  int sites() const noexcept { return sites_; }
  int n() const noexcept { return static_cast<int>(roots_.size()); }
  const std::vector<cplx>& roots() const noexcept { return roots_; }

 private:
  int sites_;
  std::vector<cplx> roots_;
};

// e(u) = (u + i/2)/(u - i/2).
cplx e_factor(cplx u);

// Q(u) = prod_j (u - u_j); 1 for n = 0.
cplx q_function(cplx u, const BetheState& state);

// Dressed vacuum form Λ(u). The transfer matrix eigenvalue is i^N Λ(u).
cplx dvf_eigenvalue(cplx u, const BetheState& state);

// Component k: LHS_k - RHS_k of the product-form Bethe equations.
std::vector<cplx> bae_residual(const BetheState& state);

// Logarithm of LHS_k / RHS_k with the imaginary part on (-π, π].
std::vector<cplx> bae_log_residual(const BetheState& state);

struct NewtonOptions {
  double tolerance = 1e-12;  // on max |log residual|
  int max_iterations = 100;
};

struct BetheSolution {
  BetheState state;
  int iterations = 0;
  double log_residual = 0.0;      // max |ln(LHS/RHS)|
  double product_residual = 0.0;  // max |LHS - RHS|
};

// Damped complex Newton on the logarithmic form with the analytic Jacobian.
// Throws ConvergenceError on non-convergence, a singular Jacobian or
// colliding roots.
BetheSolution solve_bae_newton(const BetheState& initial, const NewtonOptions& options = {});

// E = J (sum_j 1/(u_j^2 + 1/4) - N). Throws NumericalError when the sum is
// not real to 1e-10.
double energy_from_roots(const BetheState& state, double coupling);

// u^{m,α} = center + (i/2)(m + 1 - 2α), α = 1..m.
std::vector<cplx> expand_string(int m, double center);

// θ(u) = 2 arctan(2u).
double theta(double u);

// Scattering factor E_ml(u) and its phase Θ_ml(u).
cplx scattering_E(int m, int l, double u);
double big_theta(int m, int l, double u);

// ∂Θ_ml/∂u.
double big_theta_derivative(int m, int l, double u);

struct StringPart {
  int length = 1;
  std::vector<double> centers;
};

struct StringConfig {
  int sites = 0;
  std::vector<StringPart> parts;

  int total_roots() const;
  std::vector<cplx> expand() const;
};

// Quantum numbers I_k^m indexed like config.parts[p].centers[k].
using QuantumNumbers = std::vector<std::vector<double>>;

// Component (m,k): N θ(u_k^m/m) - 2π I_k^m - sum_{l,j} Θ_ml(u_k^m - u_j^l),
// flattened in parts/centers order.
std::vector<double> log_bae_residual(const StringConfig& config, const QuantumNumbers& quantum);

// Jacobian of log_bae_residual with respect to the flattened centers.
std::vector<std::vector<double>> log_bae_jacobian(const StringConfig& config);

// I_k^m = (N θ(u/m) - sum Θ)/(2π) rounded to the nearest half-integer.
QuantumNumbers infer_quantum_numbers(const StringConfig& config);

// Largest distance from each root to its nearest ideal string position,
// after greedy one-to-one matching.
double string_deviation(const std::vector<cplx>& roots, const StringConfig& config);

}  // namespace osptba
