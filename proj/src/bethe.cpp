#include "osptba/bethe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "osptba/errors.hpp"
#include "osptba/kernels.hpp"

namespace osptba {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPoleDistance = 1e-12;
const cplx kI(0.0, 1.0);

int parity_sign(int k) { return k % 2 == 0 ? 1 : -1; }

// Q(x) with a pole guard: a factor closer than kPoleDistance to zero means x
// sits on a root.
cplx guarded_q(cplx x, const BetheState& state, const char* where) {
  cplx q = 1.0;
  for (const cplx& r : state.roots()) {
    const cplx f = x - r;
    if (std::abs(f) < kPoleDistance) throw PoleError(std::string(where) + ": Q vanishes in a denominator");
    q *= f;
  }
  return q;
}

double wrap_phase(double phi) {
  phi = std::remainder(phi, 2.0 * kPi);
  return phi <= -kPi ? phi + 2.0 * kPi : phi;
}

// Coefficients of Θ_ml = sum_j c_j θ(u/j); the [0] term has no phase.
std::vector<std::pair<int, int>> theta_coefficients(int m, int l) {
  auto out = takahashi_coefficients(m, l);
  std::erase_if(out, [](const auto& jc) { return jc.first == 0; });
  return out;
}

double theta_derivative(double u) { return 4.0 / (1.0 + 4.0 * u * u); }

double min_separation(const std::vector<cplx>& roots) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < roots.size(); ++a)
    for (std::size_t b = a + 1; b < roots.size(); ++b) best = std::min(best, std::abs(roots[a] - roots[b]));
  return best;
}

double max_abs(const std::vector<cplx>& v) {
  double m = 0.0;
  for (const cplx& z : v) m = std::max(m, std::abs(z));
  return m;
}

// Log residual and its analytic Jacobian.
std::pair<Eigen::VectorXcd, Eigen::MatrixXcd> log_system(const std::vector<cplx>& roots, int sites) {
  const int n = static_cast<int>(roots.size());
  Eigen::VectorXcd g(n);
  Eigen::MatrixXcd jac = Eigen::MatrixXcd::Zero(n, n);
  const BetheState state(sites, roots);
  const std::vector<cplx> logs = bae_log_residual(state);
  for (int k = 0; k < n; ++k) {
    const cplx uk = roots[static_cast<std::size_t>(k)];
    g(k) = logs[static_cast<std::size_t>(k)];
    cplx diag = static_cast<double>(sites) * (1.0 / (uk + 0.5 * kI) - 1.0 / (uk - 0.5 * kI));
    for (int j = 0; j < n; ++j) {
      if (j == k) continue;
      const cplx d = uk - roots[static_cast<std::size_t>(j)];
      const cplx w = 1.0 / (d - 0.5 * kI) + 1.0 / (d + kI) - 1.0 / (d + 0.5 * kI) - 1.0 / (d - kI);
      diag -= w;
      jac(k, j) = w;
    }
    jac(k, k) = diag;
  }
  return {g, jac};
}

}  // namespace

BetheState::BetheState(int sites, std::vector<cplx> roots) : sites_(sites), roots_(std::move(roots)) {
  if (sites < 1) throw std::invalid_argument("BetheState: N must be >= 1");
  if (static_cast<int>(roots_.size()) > sites) throw std::invalid_argument("BetheState: n must be <= N");
  if (min_separation(roots_) <= kRootCollision) throw std::invalid_argument("BetheState: roots collide");
}

cplx e_factor(cplx u) {
  const cplx den = u - 0.5 * kI;
  if (std::abs(den) < kPoleDistance) throw PoleError("e(u) has a pole at u = i/2");
  return (u + 0.5 * kI) / den;
}

cplx q_function(cplx u, const BetheState& state) {
  cplx q = 1.0;
  for (const cplx& r : state.roots()) q *= u - r;
  return q;
}

cplx dvf_eigenvalue(cplx u, const BetheState& state) {
  const int n_sites = state.sites();
  const double s = parity_sign(n_sites - state.n());
  const cplx q_half = guarded_q(u + 0.5 * kI, state, "dvf_eigenvalue");
  const cplx q_one = guarded_q(u + kI, state, "dvf_eigenvalue");
  const cplx three_half = u + 1.5 * kI;
  if (std::abs(three_half) < kPoleDistance) throw PoleError("dvf_eigenvalue: pole at u = -3i/2");

  const cplx t1 = s * std::pow(u + kI, n_sites) * q_function(u - 0.5 * kI, state) / q_half;
  const cplx t2 = std::pow(u, n_sites) * q_function(u, state) * q_function(three_half, state) / (q_half * q_one);
  const cplx t3 = s * std::pow(u * (u + 0.5 * kI) / three_half, n_sites) * q_function(u + 2.0 * kI, state) / q_one;
  return t1 + t2 + t3;
}

std::vector<cplx> bae_residual(const BetheState& state) {
  const double s = parity_sign(state.sites() - state.n());
  std::vector<cplx> out;
  out.reserve(state.roots().size());
  for (const cplx& uk : state.roots()) {
    const cplx lhs = std::pow(e_factor(uk), state.sites());
    const cplx den = guarded_q(uk + 0.5 * kI, state, "bae_residual") * guarded_q(uk - kI, state, "bae_residual");
    const cplx rhs = -s * q_function(uk - 0.5 * kI, state) * q_function(uk + kI, state) / den;
    out.push_back(lhs - rhs);
  }
  return out;
}

std::vector<cplx> bae_log_residual(const BetheState& state) {
  const auto& roots = state.roots();
  // ln(-(-1)^{N-n}) on the principal branch: 0 or iπ.
  const cplx log_sign = parity_sign(state.sites() - state.n()) == -1 ? cplx(0.0) : cplx(0.0, kPi);
  std::vector<cplx> out;
  out.reserve(roots.size());
  for (std::size_t k = 0; k < roots.size(); ++k) {
    const cplx uk = roots[k];
    cplx g = static_cast<double>(state.sites()) * std::log(e_factor(uk)) - log_sign;
    for (std::size_t j = 0; j < roots.size(); ++j) {
      if (j == k) continue;
      const cplx d = uk - roots[j];
      const cplx den1 = d + 0.5 * kI;
      const cplx den2 = d - kI;
      if (std::abs(den1) < kPoleDistance || std::abs(den2) < kPoleDistance) {
        throw PoleError("bae_log_residual: Q vanishes in a denominator");
      }
      g -= std::log(d - 0.5 * kI) + std::log(d + kI) - std::log(den1) - std::log(den2);
    }
    out.emplace_back(g.real(), wrap_phase(g.imag()));
  }
  return out;
}

BetheSolution solve_bae_newton(const BetheState& initial, const NewtonOptions& options) {
  const int sites = initial.sites();
  std::vector<cplx> roots = initial.roots();
  if (roots.empty()) return {initial, 0, 0.0, 0.0};

  auto norm_at = [&](const std::vector<cplx>& r) -> double {
    try {
      return max_abs(bae_log_residual(BetheState(sites, r)));
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  double res = norm_at(roots);
  if (!std::isfinite(res)) throw ConvergenceError("solve_bae_newton: seed sits on a pole", 0, res);

  for (int it = 0; it <= options.max_iterations; ++it) {
    if (res < options.tolerance) {
      BetheState state(sites, roots);
      const double prod = max_abs(bae_residual(state));
      return {std::move(state), it, res, prod};
    }
    if (it == options.max_iterations) break;

    auto [g, jac] = log_system(roots, sites);
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(jac);
    if (lu.rank() < jac.rows()) throw ConvergenceError("solve_bae_newton: singular Jacobian", it, res);
    const Eigen::VectorXcd step = lu.solve(g);

    double lambda = 1.0;
    std::vector<cplx> trial(roots.size());
    double trial_res = std::numeric_limits<double>::infinity();
    while (true) {
      for (std::size_t k = 0; k < roots.size(); ++k) trial[k] = roots[k] - lambda * step(static_cast<Eigen::Index>(k));
      if (min_separation(trial) <= kRootCollision) {
        trial_res = std::numeric_limits<double>::infinity();
      } else {
        trial_res = norm_at(trial);
      }
      if (trial_res < res || lambda < 1e-4) break;
      lambda *= 0.5;
    }
    if (min_separation(trial) <= kRootCollision) {
      throw ConvergenceError("solve_bae_newton: roots collided", it + 1, res);
    }
    if (!std::isfinite(trial_res)) throw ConvergenceError("solve_bae_newton: step hit a pole", it + 1, res);
    roots = trial;
    res = trial_res;
  }
  throw ConvergenceError("solve_bae_newton: no convergence after " + std::to_string(options.max_iterations) +
                             " iterations",
                         options.max_iterations, res);
}

double energy_from_roots(const BetheState& state, double coupling) {
  cplx sum = 0.0;
  for (const cplx& u : state.roots()) {
    const cplx den = u * u + 0.25;
    if (std::abs(den) < kPoleDistance) throw PoleError("energy_from_roots: root at ±i/2");
    sum += 1.0 / den;
  }
  if (std::abs(sum.imag()) > 1e-10 * std::max(1.0, std::abs(sum.real()))) {
    throw NumericalError("energy_from_roots: roots are not conjugate-paired (Im = " +
                         std::to_string(sum.imag()) + ")");
  }
  return coupling * (sum.real() - state.sites());
}

std::vector<cplx> expand_string(int m, double center) {
  if (m < 1) throw std::invalid_argument("expand_string: m must be >= 1");
  std::vector<cplx> out;
  out.reserve(static_cast<std::size_t>(m));
  for (int alpha = 1; alpha <= m; ++alpha) out.emplace_back(center, 0.5 * (m + 1 - 2 * alpha));
  return out;
}

double theta(double u) { return 2.0 * std::atan(2.0 * u); }

cplx scattering_E(int m, int l, double u) {
  cplx out = 1.0;
  for (const auto& [j, c] : theta_coefficients(m, l)) out *= std::pow(e_factor(u / j), c);
  return out;
}

double big_theta(int m, int l, double u) {
  double out = 0.0;
  for (const auto& [j, c] : theta_coefficients(m, l)) out += c * theta(u / j);
  return out;
}

double big_theta_derivative(int m, int l, double u) {
  double out = 0.0;
  for (const auto& [j, c] : theta_coefficients(m, l)) out += c * theta_derivative(u / j) / j;
  return out;
}

int StringConfig::total_roots() const {
  int n = 0;
  for (const auto& p : parts) n += p.length * static_cast<int>(p.centers.size());
  return n;
}

std::vector<cplx> StringConfig::expand() const {
  std::vector<cplx> out;
  for (const auto& p : parts)
    for (double c : p.centers) {
      const auto s = expand_string(p.length, c);
      out.insert(out.end(), s.begin(), s.end());
    }
  return out;
}

namespace {

struct FlatCenter {
  int length;
  double center;
};

std::vector<FlatCenter> flatten(const StringConfig& config) {
  std::vector<FlatCenter> out;
  for (const auto& p : config.parts) {
    if (p.length < 1) throw std::invalid_argument("string length must be >= 1");
    for (double c : p.centers) out.push_back({p.length, c});
  }
  return out;
}

// N θ(u/m) - sum Θ for each center.
std::vector<double> counting_phase(const StringConfig& config) {
  const auto flat = flatten(config);
  std::vector<double> out;
  out.reserve(flat.size());
  for (const auto& a : flat) {
    double v = config.sites * theta(a.center / a.length);
    for (const auto& b : flat) v -= big_theta(a.length, b.length, a.center - b.center);
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::vector<double> log_bae_residual(const StringConfig& config, const QuantumNumbers& quantum) {
  if (quantum.size() != config.parts.size()) throw std::invalid_argument("log_bae_residual: shape mismatch");
  std::vector<double> flat_i;
  for (std::size_t p = 0; p < quantum.size(); ++p) {
    if (quantum[p].size() != config.parts[p].centers.size()) {
      throw std::invalid_argument("log_bae_residual: shape mismatch");
    }
    flat_i.insert(flat_i.end(), quantum[p].begin(), quantum[p].end());
  }
  std::vector<double> out = counting_phase(config);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] -= 2.0 * kPi * flat_i[k];
  return out;
}

std::vector<std::vector<double>> log_bae_jacobian(const StringConfig& config) {
  const auto flat = flatten(config);
  const std::size_t n = flat.size();
  std::vector<std::vector<double>> jac(n, std::vector<double>(n, 0.0));
  for (std::size_t p = 0; p < n; ++p) {
    const auto& a = flat[p];
    double diag = config.sites * theta_derivative(a.center / a.length) / a.length;
    for (std::size_t q = 0; q < n; ++q) {
      if (q == p) continue;
      const double d = big_theta_derivative(a.length, flat[q].length, a.center - flat[q].center);
      diag -= d;
      jac[p][q] = d;
    }
    jac[p][p] = diag;
  }
  return jac;
}

QuantumNumbers infer_quantum_numbers(const StringConfig& config) {
  const std::vector<double> phase = counting_phase(config);
  QuantumNumbers out;
  std::size_t k = 0;
  for (const auto& p : config.parts) {
    std::vector<double> row;
    for (std::size_t c = 0; c < p.centers.size(); ++c, ++k) {
      row.push_back(std::round(phase[k] / kPi) / 2.0);
    }
    out.push_back(std::move(row));
  }
  return out;
}

double string_deviation(const std::vector<cplx>& roots, const StringConfig& config) {
  const std::vector<cplx> ideal = config.expand();
  if (ideal.size() != roots.size()) throw std::invalid_argument("string_deviation: root count mismatch");
  std::vector<bool> used_root(roots.size(), false), used_ideal(ideal.size(), false);
  double worst = 0.0;
  for (std::size_t step = 0; step < roots.size(); ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < roots.size(); ++i) {
      if (used_root[i]) continue;
      for (std::size_t j = 0; j < ideal.size(); ++j) {
        if (used_ideal[j]) continue;
        const double d = std::abs(roots[i] - ideal[j]);
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    used_root[bi] = used_ideal[bj] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace osptba
