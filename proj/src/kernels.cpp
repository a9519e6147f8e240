#include "osptba/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <fftw3.h>

#include "osptba/errors.hpp"

namespace osptba {
namespace {

constexpr double kPi = std::numbers::pi;

// The FFTW planner is not reentrant; execution on fresh arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct RealBuffer {
  explicit RealBuffer(std::size_t n) : data(fftw_alloc_real(n)) {
    if (!data) throw std::bad_alloc();
  }
  ~RealBuffer() { fftw_free(data); }
  RealBuffer(const RealBuffer&) = delete;
  RealBuffer& operator=(const RealBuffer&) = delete;
  double* data;
};

struct ComplexBuffer {
  explicit ComplexBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {
    if (!data) throw std::bad_alloc();
  }
  ~ComplexBuffer() { fftw_free(data); }
  ComplexBuffer(const ComplexBuffer&) = delete;
  ComplexBuffer& operator=(const ComplexBuffer&) = delete;
  fftw_complex* data;
};

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

Grid::Grid(double half_extent, int points) : half_extent_(half_extent), points_(points) {
  if (!(half_extent > 0.0) || !std::isfinite(half_extent)) throw std::invalid_argument("Grid: L must be positive");
  if (points < 2 || !is_power_of_two(points)) throw std::invalid_argument("Grid: points must be a power of two");
}

std::vector<double> Grid::nodes() const {
  std::vector<double> out(static_cast<std::size_t>(points_));
  for (int i = 0; i < points_; ++i) out[static_cast<std::size_t>(i)] = node(i);
  return out;
}

SampledFunction::SampledFunction(const Grid& g, std::vector<double> v, double tail)
    : grid(g), values(std::move(v)), tail_constant(tail) {
  if (static_cast<int>(values.size()) != grid.points()) {
    throw std::invalid_argument("SampledFunction: value count does not match the grid");
  }
}

double SampledFunction::edge_deviation() const {
  return std::max(std::abs(values.front() - tail_constant), std::abs(values.back() - tail_constant));
}

double SampledFunction::asymmetry() const {
  const std::size_t n = values.size();
  double worst = 0.0;
  for (std::size_t i = 1; i < n; ++i) worst = std::max(worst, std::abs(values[i] - values[n - i]));
  return worst;
}

double f_m_kernel(int m, double u) {
  if (m < 1) throw std::invalid_argument("f_m_kernel: m must be >= 1");
  const double half = 0.5 * m;
  return m / (2.0 * kPi * (u * u + half * half));
}

double K_kernel(double u) { return 0.5 / std::cosh(kPi * u); }

double R_kernel(double u) {
  const double a = std::abs(u);
  if (a < 1e-8) return 4.0 / (3.0 * std::sqrt(3.0)) * (1.0 + (8.0 * kPi * kPi / 27.0 - 2.0 * kPi * kPi / 3.0) * a * a);
  if (a < 1.0) return 2.0 * std::sinh(4.0 * kPi * a / 3.0) / (std::sqrt(3.0) * std::sinh(2.0 * kPi * a));
  // Overflow-free form for large |u|.
  return 2.0 / std::sqrt(3.0) * std::exp(-2.0 * kPi * a / 3.0) * (-std::expm1(-8.0 * kPi * a / 3.0)) /
         (-std::expm1(-4.0 * kPi * a));
}

double fourier_f(int m, double k) {
  if (m < 1) throw std::invalid_argument("fourier_f: m must be >= 1");
  return std::exp(-0.5 * m * std::abs(k));
}

double fourier_K(double k) { return 0.5 / std::cosh(0.5 * k); }

double fourier_B(int m, int l, double k) {
  if (m < 1 || l < 1) throw std::invalid_argument("fourier_B: indices must be >= 1");
  const double x = 0.5 * std::abs(k);
  if (x == 0.0) return 2.0 * std::min(l, m);
  const int lo = std::abs(l - m);
  const int hi = l + m;
  // (e^{-lo x} - e^{-hi x}) coth x, cancellation-free near x = 0.
  return std::exp(-lo * x) * (-std::expm1(-(hi - lo) * x)) / std::tanh(x);
}

double fourier_A(int m, int l, double k) { return (1.0 - fourier_K(k)) * fourier_B(m, l, k); }

std::vector<StencilEntry> b_inverse_row(int n) {
  if (n < 1) throw std::invalid_argument("b_inverse_row: n must be >= 1");
  std::vector<StencilEntry> out;
  if (n >= 2) out.push_back({n - 1, -1.0, 1});
  out.push_back({n, 1.0, 0});
  out.push_back({n + 1, -1.0, 1});
  return out;
}

double b_inverse(int n, int m, double k) {
  const double w = fourier_K(k);
  for (const auto& e : b_inverse_row(n)) {
    if (e.m == m) return e.constant * std::pow(w, e.power);
  }
  return 0.0;
}

std::vector<std::pair<int, int>> takahashi_coefficients(int m, int l) {
  if (m < 1 || l < 1) throw std::invalid_argument("takahashi_coefficients: indices must be >= 1");
  const int lo = std::abs(l - m);
  const int hi = l + m;
  std::vector<std::pair<int, int>> out;
  for (int j = lo; j <= hi; ++j) {
    int c = 0;
    if (j == lo || j == hi) {
      c = 1;
    } else {
      c = (j - lo) % 2 == 0 ? 2 : -1;
    }
    out.emplace_back(j, c);
  }
  return out;
}

double Kernel::tail_mass(double half_extent) const {
  if (m_ == 0) return 2.0 / kPi * std::atan(std::exp(-kPi * half_extent));
  return 2.0 / kPi * std::atan(0.5 * m_ / half_extent);
}

double trapezoid(const SampledFunction& g) {
  // Interior nodes once, -L and +L at half weight each with v(+L) = v(-L).
  double sum = 0.0;
  for (double v : g.values) sum += v;
  return g.grid.spacing() * sum;
}

double R_tail_mass(double half_extent) {
  return 2.0 * std::sqrt(3.0) / kPi * std::exp(-2.0 * kPi * half_extent / 3.0);
}

Kernel Kernel::sech() { return Kernel(0); }

Kernel Kernel::lorentzian(int m) {
  if (m < 1) throw std::invalid_argument("Kernel::lorentzian: m must be >= 1");
  return Kernel(m);
}

double Kernel::operator()(double u) const { return m_ == 0 ? K_kernel(u) : f_m_kernel(m_, u); }

double Kernel::integral() const { return m_ == 0 ? 0.5 : 1.0; }

double Kernel::spectrum(double k) const { return m_ == 0 ? fourier_K(k) : fourier_f(m_, k); }

struct Convolver::Plans {
  int padded = 0;
  RealBuffer real;
  ComplexBuffer spec;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  explicit Plans(int n) : padded(n), real(static_cast<std::size_t>(n)), spec(static_cast<std::size_t>(n / 2 + 1)) {
    std::lock_guard lock(planner_mutex());
    forward = fftw_plan_dft_r2c_1d(n, real.data, spec.data, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(n, spec.data, real.data, FFTW_ESTIMATE);
    if (!forward || !backward) throw NumericalError("FFTW planning failed");
  }
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
};

Convolver::Convolver(const Grid& grid, const Kernel& kernel)
    : grid_(grid), kernel_(kernel), plans_(std::make_unique<Plans>(2 * grid.points())) {
  const int n = grid_.points();
  const int p = 2 * n;
  const double h = grid_.spacing();
  RealBuffer samples(static_cast<std::size_t>(p));
  ComplexBuffer hat(static_cast<std::size_t>(p / 2 + 1));
  // Offsets 0..n at the front, -(n-1)..-1 at the back.
  for (int o = 0; o <= n; ++o) samples.data[o] = h * kernel_(o * h);
  for (int o = 1; o < n; ++o) samples.data[p - o] = h * kernel_(-o * h);
  fftw_execute_dft_r2c(plans_->forward, samples.data, hat.data);
  kernel_hat_.resize(static_cast<std::size_t>(p / 2 + 1));
  for (int j = 0; j <= p / 2; ++j) kernel_hat_[static_cast<std::size_t>(j)] = {hat.data[j][0], hat.data[j][1]};
}

Convolver::~Convolver() = default;

std::vector<double> Convolver::frequencies() const {
  const int p = 2 * grid_.points();
  std::vector<double> k(static_cast<std::size_t>(p / 2 + 1));
  for (int j = 0; j <= p / 2; ++j) k[static_cast<std::size_t>(j)] = 2.0 * kPi * j / (p * grid_.spacing());
  return k;
}

std::vector<std::complex<double>> Convolver::forward(std::span<const double> values) const {
  const int n = grid_.points();
  const int p = 2 * n;
  if (static_cast<int>(values.size()) != n) throw std::invalid_argument("Convolver: size mismatch");
  RealBuffer buf(static_cast<std::size_t>(p));
  ComplexBuffer spec(static_cast<std::size_t>(p / 2 + 1));
  std::fill(buf.data, buf.data + p, 0.0);
  for (int i = 1; i < n; ++i) buf.data[i] = values[static_cast<std::size_t>(i)];
  // Trapezoid end weights; the +L node mirrors the -L node.
  buf.data[0] = 0.5 * values[0];
  buf.data[n] = 0.5 * values[0];
  fftw_execute_dft_r2c(plans_->forward, buf.data, spec.data);
  std::vector<std::complex<double>> out(static_cast<std::size_t>(p / 2 + 1));
  for (int j = 0; j <= p / 2; ++j) out[static_cast<std::size_t>(j)] = {spec.data[j][0], spec.data[j][1]};
  return out;
}

void Convolver::backward(std::span<const std::complex<double>> spectrum, std::span<double> out) const {
  const int n = grid_.points();
  const int p = 2 * n;
  if (spectrum.size() != kernel_hat_.size() || static_cast<int>(out.size()) != n) {
    throw std::invalid_argument("Convolver: size mismatch");
  }
  RealBuffer buf(static_cast<std::size_t>(p));
  ComplexBuffer spec(static_cast<std::size_t>(p / 2 + 1));
  for (int j = 0; j <= p / 2; ++j) {
    spec.data[j][0] = spectrum[static_cast<std::size_t>(j)].real();
    spec.data[j][1] = spectrum[static_cast<std::size_t>(j)].imag();
  }
  fftw_execute_dft_c2r(plans_->backward, spec.data, buf.data);
  const double scale = 1.0 / p;
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = buf.data[i] * scale;
}

void Convolver::apply_multiplier(std::span<const double> values, std::span<const std::complex<double>> multiplier,
                                 std::span<double> out) const {
  if (!multiplier.empty() && multiplier.size() != kernel_hat_.size()) {
    throw std::invalid_argument("Convolver: multiplier size mismatch");
  }
  auto spec = forward(values);
  for (std::size_t j = 0; j < spec.size(); ++j) {
    spec[j] *= kernel_hat_[j];
    if (!multiplier.empty()) spec[j] *= multiplier[j];
  }
  backward(spec, out);
}

void Convolver::apply(std::span<const double> values, double tail, std::span<double> out) const {
  const std::size_t n = values.size();
  std::vector<double> decaying(n);
  for (std::size_t i = 0; i < n; ++i) decaying[i] = values[i] - tail;
  apply_multiplier(decaying, {}, out);
  const double constant = tail * kernel_.integral();
  for (double& x : out) x += constant;
}

SampledFunction Convolver::operator()(const SampledFunction& g, double tail_tolerance) const {
  if (!(g.grid == grid_)) throw std::invalid_argument("Convolver: grid mismatch");
  const double dev = g.edge_deviation();
  if (!(dev <= tail_tolerance)) {
    throw NumericalError("convolve: edge values differ from the tail constant by " + std::to_string(dev));
  }
  SampledFunction out(grid_, std::vector<double>(g.values.size()), g.tail_constant * kernel_.integral());
  apply(g.values, g.tail_constant, out.values);
  return out;
}

SampledFunction convolve(const Kernel& kernel, const SampledFunction& g, double tail_tolerance) {
  return Convolver(g.grid, kernel)(g, tail_tolerance);
}

SampledFunction apply_A(int m, int l, const SampledFunction& g, int max_order) {
  if (m + l > max_order) throw std::invalid_argument("apply_A: l + m exceeds the configured maximum");
  SampledFunction out(g.grid, std::vector<double>(g.values.size(), 0.0), 0.0);
  std::vector<double> term(g.values.size());
  for (const auto& [j, c] : takahashi_coefficients(m, l)) {
    if (j == 0) {
      term = g.values;
    } else {
      Convolver(g.grid, Kernel::lorentzian(j)).apply(g.values, g.tail_constant, term);
    }
    for (std::size_t i = 0; i < term.size(); ++i) out.values[i] += c * term[i];
    out.tail_constant += c * g.tail_constant;
  }
  return out;
}

}  // namespace osptba
