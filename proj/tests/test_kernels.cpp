#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "osptba/errors.hpp"
#include "osptba/kernels.hpp"

using namespace osptba;

namespace {

constexpr double kPi = std::numbers::pi;
const Grid kDefault(20.0, 4096);

// Trapezoid Fourier transform of an even function sampled on [-L, L].
double cosine_transform(const Grid& g, double (*f)(double, int), int m, double k) {
  double sum = 0.0;
  for (int i = 0; i < g.points(); ++i) sum += f(g.node(i), m) * std::cos(k * g.node(i));
  return g.spacing() * sum;
}

double lorentz(double u, int m) { return f_m_kernel(m, u); }
double sech_half(double u, int) { return K_kernel(u); }

}  // namespace

TEST(Grid, Geometry) {
  const Grid g(20.0, 4096);
  EXPECT_DOUBLE_EQ(g.spacing(), 40.0 / 4096);
  EXPECT_DOUBLE_EQ(g.node(0), -20.0);
  EXPECT_DOUBLE_EQ(g.node(2048), 0.0);
  EXPECT_THROW(Grid(20.0, 3000), std::invalid_argument);
  EXPECT_THROW(Grid(-1.0, 64), std::invalid_argument);
}

TEST(Kernels, PointValues) {
  EXPECT_DOUBLE_EQ(f_m_kernel(1, 0.0), 2.0 / kPi);
  EXPECT_DOUBLE_EQ(K_kernel(0.0), 0.5);
  EXPECT_NEAR(R_kernel(0.0), 4.0 / (3.0 * std::sqrt(3.0)), 1e-15);
  EXPECT_NEAR(R_kernel(0.0), 0.76980, 1e-5);
  for (double u : {1e-9, 1e-4, 0.3, 0.999999, 1.000001, 2.5, 40.0, 100.0}) {
    EXPECT_DOUBLE_EQ(R_kernel(u), R_kernel(-u));
    EXPECT_GT(R_kernel(u), 0.0);
  }
  // Branches agree where they meet.
  EXPECT_NEAR(R_kernel(1.0 - 1e-12), R_kernel(1.0 + 1e-12), 1e-11);
  EXPECT_NEAR(R_kernel(1e-8 * 0.999), R_kernel(1.0001e-8), 1e-14);
  const double u = 0.7;
  EXPECT_NEAR(R_kernel(u), 2.0 * std::sinh(4.0 * kPi * u / 3.0) / (std::sqrt(3.0) * std::sinh(2.0 * kPi * u)),
              1e-15);
}

TEST(Kernels, NormalizationsOnDefaultGrid) {
  const Kernel k = Kernel::sech();
  const double int_k = trapezoid(SampledFunction::sample(kDefault, K_kernel)) + k.tail_mass(20.0);
  EXPECT_NEAR(int_k, 0.5, 1e-8);
  for (int m = 1; m <= 10; ++m) {
    const Kernel f = Kernel::lorentzian(m);
    const double in_box = trapezoid(SampledFunction::sample(kDefault, [m](double u) { return f_m_kernel(m, u); }));
    EXPECT_NEAR(in_box + f.tail_mass(20.0), 1.0, 1e-6) << "m=" << m;
  }
  const double int_r = trapezoid(SampledFunction::sample(kDefault, R_kernel)) + R_tail_mass(20.0);
  EXPECT_NEAR(int_r, 1.0, 1e-6);
}

TEST(Kernels, LorentzianNormalizationWideBox) {
  const Grid g(40.0, 8192);
  for (int m : {1, 3, 7}) {
    const double in_box = trapezoid(SampledFunction::sample(g, [m](double u) { return f_m_kernel(m, u); }));
    // Box part against the arctan antiderivative.
    EXPECT_NEAR(in_box, 2.0 / kPi * std::atan(2.0 * 40.0 / m), 1e-9);
    EXPECT_NEAR(in_box + Kernel::lorentzian(m).tail_mass(40.0), 1.0, 1e-6);
  }
}

TEST(Kernels, FourierTransforms) {
  for (double k : {0.0, 0.4, 1.3, 3.0}) {
    EXPECT_NEAR(cosine_transform(kDefault, sech_half, 0, k), fourier_K(k), 1e-6) << "k=" << k;
  }
  const Grid wide(4000.0, 131072);
  for (int m : {1, 2, 5}) {
    for (double k : {0.3, 1.0, 2.5}) {
      EXPECT_NEAR(cosine_transform(wide, lorentz, m, k), fourier_f(m, k), 1e-6) << "m=" << m << " k=" << k;
    }
  }
}

TEST(Fourier, ATermByTerm) {
  for (int m = 1; m <= 5; ++m)
    for (int l = 1; l <= 5; ++l)
      for (double k : {-2.0, 0.05, 0.7, 3.0}) {
        EXPECT_NEAR(fourier_A(m, l, k), fourier_A(l, m, k), 1e-15);
        double direct = 0.0;
        for (const auto& [j, c] : takahashi_coefficients(m, l)) direct += c * std::exp(-0.5 * j * std::abs(k));
        EXPECT_NEAR(fourier_A(m, l, k), direct, 1e-8) << m << l << " k=" << k;
      }
}

TEST(Fourier, BLimitAtZero) {
  for (int m = 1; m <= 6; ++m)
    for (int l = 1; l <= 6; ++l) {
      EXPECT_EQ(fourier_B(m, l, 0.0), 2.0 * std::min(l, m));
      EXPECT_NEAR(fourier_B(m, l, 1e-9), 2.0 * std::min(l, m), 1e-6);
      EXPECT_NEAR(fourier_B(m, l, -1e-3), fourier_B(m, l, 1e-3), 1e-15);
    }
}

TEST(Fourier, BInverseStencil) {
  const auto row1 = b_inverse_row(1);
  ASSERT_EQ(row1.size(), 2u);
  EXPECT_EQ(row1[0].m, 1);
  EXPECT_EQ(row1[1].m, 2);
  const auto row5 = b_inverse_row(5);
  ASSERT_EQ(row5.size(), 3u);
  const double k = 0.7;
  EXPECT_DOUBLE_EQ(b_inverse(5, 4, k), b_inverse(5, 6, k));
  EXPECT_DOUBLE_EQ(b_inverse(5, 4, k), -0.5 / std::cosh(0.35));
  EXPECT_EQ(b_inverse(5, 7, k), 0.0);
}

TEST(Fourier, BInverseTimesBIsIdentity) {
  for (double k : {0.1, 0.7, 3.0}) {
    for (int n = 1; n <= 10; ++n)
      for (int l = 1; l <= 10; ++l) {
        double sum = 0.0;
        for (int m = 1; m <= 200; ++m) sum += b_inverse(n, m, k) * fourier_B(m, l, k);
        EXPECT_NEAR(sum, n == l ? 1.0 : 0.0, 1e-8) << "k=" << k << " n=" << n << " l=" << l;
      }
  }
}

TEST(Convolve, ConstantResponse) {
  const SampledFunction c(kDefault, std::vector<double>(4096, 1.7), 1.7);
  const SampledFunction out = convolve(Kernel::sech(), c, 1e-12);
  EXPECT_DOUBLE_EQ(out.tail_constant, 0.85);
  for (double v : out.values) EXPECT_NEAR(v, 0.85, 1e-14);
}

TEST(Convolve, LinearityWithConstant) {
  const auto g = SampledFunction::sample(kDefault, [](double u) { return std::exp(-u * u); });
  const double a = -0.6, b = 2.2;
  std::vector<double> mixed(g.values.size());
  for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] = a * g.values[i] + b;
  const Convolver conv(kDefault, Kernel::lorentzian(2));
  const SampledFunction lhs = conv(SampledFunction(kDefault, mixed, b), 1e-10);
  const SampledFunction base = conv(g, 1e-10);
  for (std::size_t i = 0; i < mixed.size(); ++i) EXPECT_NEAR(lhs.values[i], a * base.values[i] + b, 1e-13);
}

TEST(Convolve, LorentzianSemigroup) {
  const Grid g(40.0, 8192);
  const auto f2 = SampledFunction::sample(g, [](double u) { return f_m_kernel(2, u); });
  const SampledFunction out = convolve(Kernel::lorentzian(1), f2, 1e-3);
  for (int i = 0; i < g.points(); ++i) {
    const double u = g.node(i);
    if (std::abs(u) <= 5.0) EXPECT_NEAR(out.values[static_cast<std::size_t>(i)], f_m_kernel(3, u), 1e-6) << u;
  }
}

TEST(Convolve, EvenInEvenOut) {
  const auto g = SampledFunction::sample(kDefault, [](double u) { return 1.0 / std::cosh(u) + std::exp(-0.3 * u * u); });
  EXPECT_LT(g.asymmetry(), 1e-15);
  const SampledFunction out = convolve(Kernel::sech(), g, 1e-6);
  EXPECT_LT(out.asymmetry(), 1e-14);
}

TEST(Convolve, SpectralMatchesDirectQuadrature) {
  const Grid g(10.0, 512);
  const auto s = SampledFunction::sample(g, [](double u) { return std::exp(-(u - 0.4) * (u - 0.4)) * (1 + 0.2 * u); });
  const SampledFunction spectral = convolve(Kernel::sech(), s, 1e-10);
  const double h = g.spacing();
  for (int i = 0; i < g.points(); ++i) {
    double direct = 0.0;
    for (int j = 0; j <= g.points(); ++j) {
      const double w = (j == 0 || j == g.points()) ? 0.5 : 1.0;
      const double v = s.values[static_cast<std::size_t>(j % g.points())];
      direct += w * h * K_kernel(g.node(i) - g.node(j)) * v;
    }
    EXPECT_NEAR(spectral.values[static_cast<std::size_t>(i)], direct, 1e-8);
  }
}

TEST(Convolve, TailGuard) {
  const auto g = SampledFunction::sample(kDefault, [](double u) { return 1.0 + 0.1 * u; }, 1.0);
  EXPECT_THROW(convolve(Kernel::sech(), g, 1e-6), NumericalError);
  const Convolver conv(kDefault, Kernel::sech());
  EXPECT_THROW(conv(SampledFunction(Grid(20.0, 64), std::vector<double>(64), 0.0), 1.0), std::invalid_argument);
}

TEST(ApplyA, LorentzianInput) {
  const Grid g(80.0, 16384);
  const int p = 1;
  const auto fp = SampledFunction::sample(g, [p](double u) { return f_m_kernel(p, u); });
  for (int m = 1; m <= 2; ++m)
    for (int l = 1; l <= 2; ++l) {
      const SampledFunction out = apply_A(m, l, fp);
      // [j] f_p = f_{p+j}; [0] f_p = f_p.
      for (int i = 0; i < g.points(); i += 7) {
        const double u = g.node(i);
        if (std::abs(u) > 3.0) continue;
        double expected = 0.0;
        for (const auto& [j, c] : takahashi_coefficients(m, l)) expected += c * f_m_kernel(p + j, u);
        EXPECT_NEAR(out.values[static_cast<std::size_t>(i)], expected, 1e-6) << m << l << " u=" << u;
      }
      for (double k : {0.2, 1.0, 2.0}) {
        double spectrum = 0.0;
        for (const auto& [j, c] : takahashi_coefficients(m, l)) spectrum += c * fourier_f(p + j, k);
        EXPECT_NEAR(spectrum, fourier_A(m, l, k) * fourier_f(p, k), 1e-12);
      }
    }
}

TEST(ApplyA, SymmetryAndIdentityTerm) {
  const auto g = SampledFunction::sample(kDefault, [](double u) { return std::exp(-u * u); });
  const SampledFunction a = apply_A(2, 3, g);
  const SampledFunction b = apply_A(3, 2, g);
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_DOUBLE_EQ(a.values[i], b.values[i]);

  // For m = l the [0] term contributes the input itself.
  const SampledFunction diag = apply_A(1, 1, g);
  std::vector<double> conv1(g.values.size()), conv2(g.values.size());
  Convolver(kDefault, Kernel::lorentzian(1)).apply(g.values, 0.0, conv1);
  Convolver(kDefault, Kernel::lorentzian(2)).apply(g.values, 0.0, conv2);
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    EXPECT_NEAR(diag.values[i] - (conv2[i] - conv1[i]), g.values[i], 1e-14);
  }
  EXPECT_THROW(apply_A(300, 200, g), std::invalid_argument);
}
