#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "osptba/errors.hpp"
#include "osptba/tba.hpp"

using namespace osptba;

namespace {

constexpr double kPi = std::numbers::pi;
const double kLn3 = std::log(3.0);

TbaConfig config_for(int truncation, double tail_tolerance = 1e-3) {
  TbaConfig c;
  c.truncation = truncation;
  c.tail_tolerance = tail_tolerance;
  return c;
}

// Converged states are shared between tests.
const TbaState& solved(double temperature, double coupling, int truncation, double tail_tolerance = 1e-3) {
  static std::map<std::tuple<double, double, int, double>, TbaState> cache;
  static std::mutex mutex;
  std::lock_guard lock(mutex);
  const auto key = std::make_tuple(temperature, coupling, truncation, tail_tolerance);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, solve(config_for(truncation, tail_tolerance), 1.0 / temperature, coupling)).first;
  }
  return it->second;
}

int node_at(const Grid& g, double u) { return static_cast<int>(std::lround((u + g.half_extent()) / g.spacing())); }

}  // namespace

TEST(HighTemperature, Constants) {
  const auto c = high_t_constants(50);
  EXPECT_DOUBLE_EQ(c[0], 2.0);
  EXPECT_DOUBLE_EQ(c[1], 5.0);
  for (int m = 2; m <= 49; ++m) {
    const double em = c[static_cast<std::size_t>(m - 1)];
    const double lhs = em * em;
    const double rhs = (1.0 + c[static_cast<std::size_t>(m)]) * (1.0 + c[static_cast<std::size_t>(m - 2)]) / (1.0 + 1.0 / em);
    EXPECT_NEAR(lhs / rhs, 1.0, 1e-12) << "m=" << m;
  }
  EXPECT_THROW(high_t_constants(0), std::invalid_argument);
}

TEST(HighTemperature, ZeroBetaIsFixedPoint) {
  const TbaConfig config = config_for(30);
  const TbaState init = initialize_eta(config, 0.0, -1.0);
  EXPECT_LT(fixed_point_residual(init), 1e-12);
  const TbaState next = iterate_once(init, 0.5);
  for (int m = 1; m <= 30; ++m) {
    for (double v : next.log_eta[static_cast<std::size_t>(m - 1)].values) {
      ASSERT_NEAR(v, std::log(0.5 * m * (m + 3)), 1e-12);
    }
  }
  const TbaState s = solve(config, 0.0, -1.0);
  ASSERT_TRUE(s.converged);
  for (int m = 1; m <= 30; ++m) {
    for (double v : s.log_eta[static_cast<std::size_t>(m - 1)].values) {
      ASSERT_NEAR(std::exp(v), 0.5 * m * (m + 3), 1e-10 * 0.5 * m * (m + 3));
    }
  }
}

TEST(Initialization, TailsAndFiniteness) {
  const TbaConfig config = config_for(30);
  const TbaState s = initialize_eta(config, 1.0, -1.0);
  EXPECT_NEAR(s.log_eta[0].tail_constant, std::log(2.0), 1e-15);
  EXPECT_NEAR(s.log_eta[0].values.front(), std::log(2.0), 1e-12);
  EXPECT_NEAR(s.log_eta[4].tail_constant, std::log(20.0), 1e-15);
  for (double beta : {1e-3, 1.0, 1e3}) {
    for (double j : {-1.0, 1.0}) {
      for (const auto& g : initialize_eta(config, beta, j).log_eta) {
        for (double v : g.values) ASSERT_TRUE(std::isfinite(v));
      }
    }
  }
}

TEST(Iteration, DrivingTermAtOrigin) {
  const TbaConfig config = config_for(30);
  TbaState s = initialize_eta(config, 0.0, 1.0);
  s.beta = 1.0;
  const TbaState next = iterate_once(s, 1.0);
  const int i0 = node_at(s.grid, 0.0);
  EXPECT_NEAR(next.log_eta[0].values[static_cast<std::size_t>(i0)] - std::log(2.0), kPi, 1e-12);
  EXPECT_NEAR(initialize_eta(config, 1.0, 1.0).log_eta[0].values[static_cast<std::size_t>(i0)] - std::log(2.0), kPi,
              1e-15);
}

TEST(Iteration, PreservesEvenness) {
  const TbaConfig config = config_for(30);
  TbaState s = initialize_eta(config, 2.0, -1.0);
  for (int k = 0; k < 3; ++k) s = iterate_once(s, 0.5);
  EXPECT_LT(s.asymmetry(), 1e-12);
  EXPECT_EQ(s.iterations, 3);
  EXPECT_THROW(iterate_once(s, 0.0), std::invalid_argument);
  EXPECT_THROW(iterate_once(s, 1.5), std::invalid_argument);
}

TEST(Iteration, DampingMixesOldAndNew) {
  const TbaConfig config = config_for(8);
  const TbaState s = initialize_eta(config, 1.0, -1.0);
  const TbaState full = iterate_once(s, 1.0);
  const TbaState half = iterate_once(s, 0.5);
  for (int m = 0; m < 8; ++m) {
    for (std::size_t i = 0; i < s.log_eta[0].values.size(); i += 97) {
      const double expected = 0.5 * s.log_eta[static_cast<std::size_t>(m)].values[i] +
                              0.5 * full.log_eta[static_cast<std::size_t>(m)].values[i];
      ASSERT_NEAR(half.log_eta[static_cast<std::size_t>(m)].values[i], expected, 1e-13);
    }
  }
}

TEST(Solve, NearHighTemperatureConvergesQuickly) {
  const TbaState s = solve(config_for(30), 0.01, -1.0);
  EXPECT_TRUE(s.converged);
  EXPECT_LT(s.iterations, 50);
  EXPECT_LT(s.residual, 1e-10);
}

TEST(Solve, ReferenceFreeEnergies) {
  // Independent dense-array implementation of the same truncated system.
  EXPECT_NEAR(free_energy(solved(1.0, -1.0, 30)), -1.6792680716, 1e-9);
  EXPECT_NEAR(free_energy(solved(0.5, -1.0, 30)), -1.48166052, 1e-8);
  EXPECT_NEAR(free_energy(solved(2.0, -1.0, 30)), -2.42137817, 1e-8);
}

TEST(Solve, PlainIterationAgreesWithPreconditioned) {
  TbaConfig plain = config_for(30);
  plain.precondition = false;
  const TbaState s = solve(plain, 0.5, -1.0);
  ASSERT_TRUE(s.converged);
  EXPECT_NEAR(free_energy(s), free_energy(solved(2.0, -1.0, 30)), 1e-9);
}

TEST(Solve, ConvergedStateIsEvenAndPositive) {
  for (double t : {0.2, 1.0, 2.0}) {
    const TbaState& s = solved(t, -1.0, 30);
    ASSERT_TRUE(s.converged);
    EXPECT_LT(s.asymmetry(), 1e-10);
    EXPECT_LT(fixed_point_residual(s), 1e-10);
    for (const auto& g : s.log_eta) {
      for (double v : g.values) ASSERT_GT(std::exp(v), 0.0);
    }
  }
}

TEST(Solve, UnconvergedStateIsReported) {
  TbaConfig c = config_for(30);
  c.max_iterations = 2;
  c.precondition = false;
  const TbaState s = solve(c, 1.0, -1.0);
  EXPECT_FALSE(s.converged);
  EXPECT_GT(s.residual, 1e-10);
  EXPECT_THROW(free_energy(s), ConvergenceError);
  EXPECT_THROW(recover_densities(s, c), ConvergenceError);
}

TEST(Solve, TailViolationIsAnError) {
  // Ferromagnetic low-temperature tails decay like β/u² and exceed a tight tolerance.
  EXPECT_THROW(solve(config_for(30, 1e-6), 50.0, 1.0), NumericalError);
}

TEST(Solve, IntegralEquationResidual) {
  const TbaState& s = solved(1.0, -1.0, 30);
  const auto res = integral_equation_residual(s, config_for(30));
  for (std::size_t m = 0; m < res.size(); ++m) EXPECT_LT(res[m], 1e-6) << "m=" << m + 1;
}

TEST(Solve, TruncationDoublingAtHighTemperature) {
  for (double t : {1.0, 2.0}) {
    EXPECT_LT(std::abs(free_energy(solved(t, -1.0, 30)) - free_energy(solved(t, -1.0, 60))), 1e-8) << "T=" << t;
  }
}

TEST(Solve, TruncationRobustness) {
  for (double t : {0.2, 0.5, 1.0, 2.0}) {
    EXPECT_LT(std::abs(free_energy(solved(t, -1.0, 30)) - free_energy(solved(t, -1.0, 60))), 1e-6) << "T=" << t;
  }
}

TEST(Solve, TailsMatchConstants) {
  for (double t : {0.05, 1.0, 2.0}) {
    const int m = TbaConfig::default_truncation(t);
    EXPECT_LT(solved(t, -1.0, m).tail_deviation(), 1e-6) << "T=" << t;
  }
}

TEST(FreeEnergy, LowTemperatureLimits) {
  EXPECT_NEAR(free_energy(solved(0.02, -1.0, 60)), -(4.0 * kPi / (3.0 * std::sqrt(3.0)) - 1.0), 1e-2);
  EXPECT_NEAR(free_energy(solved(0.02, 1.0, 60, 0.1)), -1.0, 1e-2);
}

TEST(FreeEnergy, OverTemperatureNonincreasing) {
  const std::vector<double> ts = {0.25, 0.5, 1.0, 2.0, 4.0};
  for (std::size_t i = 1; i < ts.size(); ++i) {
    EXPECT_LE(free_energy(solved(ts[i], -1.0, 30)) / ts[i], free_energy(solved(ts[i - 1], -1.0, 30)) / ts[i - 1])
        << "T=" << ts[i];
  }
}

TEST(FreeEnergy, ThermodynamicStability) {
  const std::vector<double> ts = {0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> f;
  for (double t : ts) f.push_back(free_energy(solved(t, -1.0, 30)));
  for (std::size_t i = 1; i < ts.size(); ++i) EXPECT_LT(f[i], f[i - 1]);
  for (std::size_t i = 1; i + 1 < ts.size(); ++i) {
    // Concavity on the nonuniform grid: f(t_i) above the chord.
    const double w = (ts[i] - ts[i - 1]) / (ts[i + 1] - ts[i - 1]);
    EXPECT_GT(f[i], (1.0 - w) * f[i - 1] + w * f[i + 1]);
  }
}

TEST(Densities, NonnegativeAndConsistentAtUnitTemperature) {
  const TbaConfig c = config_for(30);
  const TbaState& s = solved(1.0, -1.0, 30);
  const DensityState d = recover_densities(s, c);
  ASSERT_EQ(d.rho_p.size(), 30u);
  for (std::size_t m = 0; m < d.rho_p.size(); ++m) {
    for (std::size_t i = 0; i < d.rho_p[m].values.size(); ++i) {
      ASSERT_GE(d.rho_p[m].values[i], -1e-8);
      ASSERT_GE(d.rho_h[m].values[i], -1e-8);
    }
  }
  // ρ^h = η ρ^p inside the TBA box (u = 0 is a node of both grids).
  const int i = node_at(d.grid, 0.0);
  const int j = node_at(s.grid, 0.0);
  EXPECT_NEAR(d.rho_h[0].values[static_cast<std::size_t>(i)],
              std::exp(s.log_eta[0].values[static_cast<std::size_t>(j)]) * d.rho_p[0].values[static_cast<std::size_t>(i)],
              1e-12);
  EXPECT_LT(density_equation_residual(d, {0.0, 0.1, 0.7, 3.0}), 1e-6);
  const ThermoResult r = thermo_observables(d, s);
  EXPECT_LT(std::abs(r.gap), 1e-4);
  EXPECT_NEAR(r.free_energy, free_energy(s), 1e-15);
}

TEST(Densities, HighTemperatureLimit) {
  const TbaConfig c = config_for(30);
  const TbaState s0 = solve(c, 0.0, -1.0);
  const DensityState d0 = recover_densities(s0, c);
  EXPECT_LT(density_equation_residual(d0, {0.0, 0.3, 1.0, 3.0}), 1e-6);
  const TbaState& s = solved(100.0, -1.0, 30);
  const ThermoResult r = thermo_observables(recover_densities(s, c), s);
  EXPECT_NEAR(r.entropy, kLn3, 1e-3);
}

TEST(Densities, FerromagneticGroundStateEmptiesParticles) {
  const TbaConfig warm = config_for(30);
  const TbaConfig cold = config_for(60, 0.1);
  const DensityState hot = recover_densities(solved(1.0, 1.0, 30), warm);
  const TbaState& s = solved(0.02, 1.0, 60, 0.1);
  const DensityState frozen = recover_densities(s, cold);
  double peak_hot = 0.0;
  double peak_cold = 0.0;
  for (double v : hot.rho_p[0].values) peak_hot = std::max(peak_hot, v);
  for (double v : frozen.rho_p[0].values) peak_cold = std::max(peak_cold, v);
  EXPECT_LT(peak_cold, 0.05 * peak_hot);
  const ThermoResult r = thermo_observables(frozen, s, 1e-3);
  EXPECT_NEAR(r.energy, -1.0, 1e-2);
}

TEST(LowTemperature, DressedEnergies) {
  EXPECT_NEAR(epsilon_low_t(1, 0.0, 1.0), 4.0, 1e-14);
  EXPECT_NEAR(epsilon_low_t(3, 0.4, 2.5), 2.5 * epsilon_low_t(3, 0.4, 1.0), 1e-14);
  EXPECT_THROW(epsilon_low_t(1, 0.0, 0.0), std::invalid_argument);
  EXPECT_THROW(epsilon_low_t(1, 0.0, -1.0), std::invalid_argument);

  const double t = 0.05;
  const TbaState& s = solved(t, 1.0, 60, 0.1);
  for (double u : {0.0, 0.5, 1.0}) {
    const double v = t * s.log_eta[0].values[static_cast<std::size_t>(node_at(s.grid, u))];
    EXPECT_NEAR(v / epsilon_low_t(1, s.grid.node(node_at(s.grid, u)), 1.0), 1.0, 2e-2) << "u=" << u;
  }
  const double v2 = t * s.log_eta[1].values[static_cast<std::size_t>(node_at(s.grid, 0.0))];
  EXPECT_NEAR(v2 / epsilon_low_t(2, 0.0, 1.0), 1.0, 2e-2);
}

TEST(Config, Validation) {
  TbaConfig c;
  EXPECT_NO_THROW(c.validate());
  c.truncation = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TbaConfig{};
  c.damping = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TbaConfig{};
  c.points = 1000;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TbaConfig{};
  c.density_points = 8192;  // spacing no longer a multiple of the TBA spacing
  c.density_dilation = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(TbaConfig::default_truncation(0.05), 60);
  EXPECT_EQ(TbaConfig::default_truncation(0.1), 30);
}
