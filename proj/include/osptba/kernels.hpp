#pragma once

// Integral kernels, their Fourier transforms and grid convolution with
// asymptotic-constant splitting.
//
// Fourier convention: F[f](k) = ∫ f(u) e^{-iku} du.

#include <complex>
#include <memory>
#include <span>
#include <vector>

namespace osptba {

// Uniform grid u_i = -L + i h, i = 0..M_g-1, h = 2L/M_g, M_g a power of two.
class Grid {
 public:
  Grid(double half_extent, int points);

  double half_extent() const noexcept { return half_extent_; }
  int points() const noexcept { return points_; }
  double spacing() const noexcept { return 2.0 * half_extent_ / points_; }
  double node(int i) const noexcept { return -half_extent_ + i * spacing(); }
  std::vector<double> nodes() const;

  bool operator==(const Grid&) const = default;

 private:
  double half_extent_;
  int points_;
};

// Samples of a real function with its value at |u| -> ∞.
struct SampledFunction {
  Grid grid;
  std::vector<double> values;
  double tail_constant = 0.0;

  SampledFunction(const Grid& g, std::vector<double> v, double tail = 0.0);

  template <class F>
  static SampledFunction sample(const Grid& g, F&& f, double tail = 0.0) {
    std::vector<double> v(static_cast<std::size_t>(g.points()));
    for (int i = 0; i < g.points(); ++i) v[static_cast<std::size_t>(i)] = f(g.node(i));
    return SampledFunction(g, std::move(v), tail);
  }

  // max(|v_0 - tail|, |v_last - tail|)
  double edge_deviation() const;
  // max_i |v(u_i) - v(-u_i)| over the nodes whose mirror image is a node.
  double asymmetry() const;
};

double f_m_kernel(int m, double u);  // m / (2π(u² + m²/4))
double K_kernel(double u);           // 1 / (2 cosh πu)
double R_kernel(double u);           // 2 sinh(4πu/3) / (√3 sinh 2πu)

double fourier_f(int m, double k);  // e^{-m|k|/2}
double fourier_K(double k);         // 1 / (2 cosh(k/2))
double fourier_B(int m, int l, double k);
double fourier_A(int m, int l, double k);  // (1 - 1/(2cosh(k/2))) B_ml(k)

// Nonzero entries of row n of B^{-1}(k): coefficient = constant * w^power with
// w = 1/(2cosh(k/2)).
struct StencilEntry {
  int m;
  double constant;
  int power;
};
std::vector<StencilEntry> b_inverse_row(int n);
double b_inverse(int n, int m, double k);

// Coefficients c_j of A_ml = sum_j c_j [j], j = |l-m| .. l+m; [0] is the identity.
std::vector<std::pair<int, int>> takahashi_coefficients(int m, int l);

// Trapezoid sum h * sum_i v_i over [-L, L], the +L value mirroring -L.
double trapezoid(const SampledFunction& g);

// ∫_{|u|>L} R(u) du to leading exponential order.
double R_tail_mass(double half_extent);

// Convolution kernel: either K or a Lorentzian f_m.
class Kernel {
 public:
  static Kernel sech();
  static Kernel lorentzian(int m);

  double operator()(double u) const;
  double integral() const;           // ∫ over the real line
  double spectrum(double k) const;   // analytic Fourier transform
  double tail_mass(double half_extent) const;  // ∫_{|u|>L}
  int order() const noexcept { return m_; }  // 0 for K

 private:
  explicit Kernel(int m) : m_(m) {}
  int m_;
};

// (κ * g)(u_i) = ∫ κ(u_i - v) g(v) dv on a fixed grid.
//
// The decaying part g - tail is integrated with the trapezoid rule on the
// closed interval [-L, L], the value at +L taken equal to the value at -L
// (exact for even data, and it keeps the discrete operator reflection
// symmetric). The sum is evaluated by FFT with zero padding to 2 M_g, so
// there is no wraparound. The constant part is added analytically.
class Convolver {
 public:
  Convolver(const Grid& grid, const Kernel& kernel);
  ~Convolver();
  Convolver(const Convolver&) = delete;
  Convolver& operator=(const Convolver&) = delete;

  const Grid& grid() const noexcept { return grid_; }
  const Kernel& kernel() const noexcept { return kernel_; }

  // Throws NumericalError when g.edge_deviation() > tail_tolerance.
  SampledFunction operator()(const SampledFunction& g, double tail_tolerance) const;

  // out = κ * (values - tail) + tail ∫κ, no tail check.
  void apply(std::span<const double> values, double tail, std::span<double> out) const;

  // Frequencies k_j = 2π j / (2 M_g h), j = 0..M_g, of the padded transform.
  std::vector<double> frequencies() const;

  // Padded transform of the trapezoid-weighted samples (M_g + 1 entries).
  std::vector<std::complex<double>> forward(std::span<const double> values) const;
  // First M_g samples of the inverse padded transform, normalized.
  void backward(std::span<const std::complex<double>> spectrum, std::span<double> out) const;
  // Transform of the sampled kernel, h κ(offset).
  const std::vector<std::complex<double>>& kernel_spectrum() const noexcept { return kernel_hat_; }

  // out = inverse FFT of FFT(values) * κ̂_sampled * multiplier (no tail split).
  void apply_multiplier(std::span<const double> values, std::span<const std::complex<double>> multiplier,
                        std::span<double> out) const;

 private:
  struct Plans;
  Grid grid_;
  Kernel kernel_;
  std::vector<std::complex<double>> kernel_hat_;
  std::unique_ptr<Plans> plans_;
};

SampledFunction convolve(const Kernel& kernel, const SampledFunction& g, double tail_tolerance);

// Real-space action of A_ml: sum_j c_j [j] g with [0] g = g. The result keeps
// the tail constant tail * sum_j c_j.
SampledFunction apply_A(int m, int l, const SampledFunction& g, int max_order = 400);

}  // namespace osptba
