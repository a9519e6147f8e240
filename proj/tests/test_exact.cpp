#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "osptba/algebra.hpp"
#include "osptba/errors.hpp"
#include "osptba/exact.hpp"

using namespace osptba;

TEST(Spectrum, TwoSiteValues) {
  const SpectrumResult s = spectrum(2, 1.0);
  ASSERT_EQ(s.eigenvalues.size(), 9u);
  EXPECT_TRUE(std::is_sorted(s.eigenvalues.begin(), s.eigenvalues.end()));
  EXPECT_EQ(std::count_if(s.eigenvalues.begin(), s.eigenvalues.end(),
                          [](double e) { return std::abs(e + 2.0) < 1e-12; }),
            5);
  EXPECT_NEAR(s.eigenvalues[5], -2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.eigenvalues[6], 2.0, 1e-12);
  EXPECT_NEAR(s.eigenvalues[8], 10.0 / 3.0, 1e-12);
  EXPECT_LT(s.max_imaginary, 1e-10);
}

TEST(Spectrum, MatchesDenseHamiltonian) {
  for (int n = 2; n <= 4; ++n) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> dense(build_hamiltonian(n, 1.0).entries(), false);
    std::vector<double> ref;
    for (const auto& z : dense.eigenvalues()) ref.push_back(z.real());
    std::sort(ref.begin(), ref.end());
    const SpectrumResult s = spectrum(n, 1.0);
    ASSERT_EQ(s.eigenvalues.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(s.eigenvalues[i], ref[i], 1e-9);
  }
}

TEST(Spectrum, SignFlipNegates) {
  const SpectrumResult p = spectrum(4, 1.0);
  const SpectrumResult m = spectrum(4, -1.0);
  const std::size_t n = p.eigenvalues.size();
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(m.eigenvalues[i], -p.eigenvalues[n - 1 - i], 1e-12);
  EXPECT_NEAR(p.eigenvalues.back(), 5.94846323, 1e-7);
}

TEST(Spectrum, SizeGuard) {
  EXPECT_THROW(spectrum(1, 1.0), SizeGuardError);
  EXPECT_THROW(spectrum(kExactMaxSites + 1, 1.0), SizeGuardError);
}

TEST(GroundEnergy, Ferromagnet) {
  for (int n = 2; n <= 6; ++n) EXPECT_NEAR(ground_energy(n, 1.0), -1.0, 1e-10) << "N=" << n;
  EXPECT_EQ(ground_energy(4, 0.0), 0.0);
}

TEST(GroundEnergy, AntiferromagnetFixtures) {
  EXPECT_NEAR(ground_energy(2, -1.0), -1.6666667, 1e-7);
  EXPECT_NEAR(ground_energy(3, -1.0), -1.5387620, 1e-7);
  EXPECT_NEAR(ground_energy(4, -1.0), -1.4871158, 1e-7);
  EXPECT_NEAR(ground_energy(6, -1.0), -1.4490263, 1e-7);
}

TEST(GroundEnergy, AntiferromagnetApproachesThermodynamicLimit) {
  const double e_inf = -(4.0 * M_PI / (3.0 * std::sqrt(3.0)) - 1.0);
  const double e8 = ground_energy(8, -1.0);
  EXPECT_NEAR(e8, -1.4356164, 1e-7);
  EXPECT_LT(std::abs(e8 - e_inf), std::abs(ground_energy(6, -1.0) - e_inf));
  EXPECT_LT(std::abs(e8 - e_inf), 2e-2);
}

TEST(FreeEnergy, Limits) {
  const double t_high = 1e6;
  EXPECT_NEAR(free_energy_exact(4, 1.0, t_high) / t_high, -std::log(3.0), 1e-4);
  const SpectrumResult s = spectrum(4, -1.0);
  EXPECT_NEAR(free_energy_exact(s, 1e-3), s.eigenvalues.front() / 4.0, 1e-3);
  EXPECT_THROW(free_energy_exact(4, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(free_energy_exact(4, 1.0, -1.0), std::invalid_argument);
}

TEST(FreeEnergy, FiniteSizeFixturesAndTrend) {
  const double f4 = free_energy_exact(4, -1.0, 2.0);
  const double f6 = free_energy_exact(6, -1.0, 2.0);
  const double f8 = free_energy_exact(8, -1.0, 2.0);
  EXPECT_NEAR(f4, -2.429397934392347, 1e-10);
  EXPECT_NEAR(f6, -2.4218499523696697, 1e-10);
  EXPECT_NEAR(f8, -2.421398640621083, 1e-10);
  EXPECT_LT(std::abs(f8 - f6), std::abs(f6 - f4));
}

TEST(FreeEnergy, EnergyRoutesAgree) {
  // <E> from the weights versus -T^2 d(f/T)/dT by central differences.
  const SpectrumResult s = spectrum(4, -1.0);
  for (double t : {0.3, 1.0, 3.0}) {
    const ExactThermo th = thermo_exact(s, t);
    double direct = 0.0, z = 0.0;
    for (double e : s.eigenvalues) {
      const double w = std::exp(-(e - s.eigenvalues.front()) / t);
      direct += w * e;
      z += w;
    }
    EXPECT_NEAR(th.energy, direct / z / 4.0, 1e-10);
    const double dt = 1e-4 * t;
    const double g = [&](double x) { return free_energy_exact(s, x) / x; }(t + dt);
    const double gm = [&](double x) { return free_energy_exact(s, x) / x; }(t - dt);
    EXPECT_NEAR(th.energy, -t * t * (g - gm) / (2.0 * dt), 1e-6);
  }
}

TEST(FreeEnergy, ConcaveNonincreasing) {
  const SpectrumResult s = spectrum(5, -1.0);
  std::vector<double> f;
  for (int i = 1; i <= 40; ++i) f.push_back(free_energy_exact(s, 0.1 * i));
  for (std::size_t i = 1; i < f.size(); ++i) EXPECT_LE(f[i], f[i - 1] + 1e-12);
  for (std::size_t i = 1; i + 1 < f.size(); ++i) EXPECT_LE(f[i + 1] - 2 * f[i] + f[i - 1], 1e-12);
}

TEST(FreeEnergy, HighTemperatureEntropy) {
  const SpectrumResult s = spectrum(6, -1.0);
  EXPECT_NEAR(thermo_exact(s, 1e4).entropy, std::log(3.0), 1e-6);
}

TEST(Cache, ConcurrentAccessSharesEntry) {
  SpectrumCache cache;
  std::vector<std::shared_ptr<const SpectrumResult>> got(4);
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < got.size(); ++i) pool.emplace_back([&, i] { got[i] = cache.get(3, -1.0); });
  for (auto& t : pool) t.join();
  for (const auto& p : got) EXPECT_EQ(p, cache.get(3, -1.0));
  EXPECT_EQ(got[0]->eigenvalues.size(), 27u);
}
