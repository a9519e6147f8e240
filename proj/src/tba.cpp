#include "osptba/tba.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/IterativeSolvers>

#include "osptba/errors.hpp"

namespace osptba::detail {
class DensityOperator;
}

namespace Eigen::internal {
template <>
struct traits<osptba::detail::DensityOperator> : public traits<Eigen::SparseMatrix<double>> {};
}  // namespace Eigen::internal

namespace osptba {
namespace detail {

// a_m = c_m/(1+c_m), b_m = 1/(1+c_m) at the constant state η_m = c_m.
struct ChainCoefficients {
  std::vector<double> a;
  std::vector<double> b;
};

ChainCoefficients constant_state_coefficients(int truncation) {
  ChainCoefficients c;
  for (int m = 1; m <= truncation; ++m) {
    const double eta = 0.5 * m * (m + 3);
    c.a.push_back(eta / (1.0 + eta));
    c.b.push_back(1.0 / (1.0 + eta));
  }
  return c;
}

// Solves x_m - K*(b_m x_m + a_{m-1} x_{m-1} + a_{m+1} x_{m+1}) - [m=M] K*Λ*(a_M x_M) = f_m
// mode by mode (tridiagonal in m). Only (P - I) f goes through the transform,
// so the identity part is exact at every node.
void invert_constant_state(const Convolver& conv, const ChainCoefficients& c,
                           std::span<const std::complex<double>> closure, const Eigen::VectorXd& f,
                           Eigen::VectorXd& out) {
  const int mt = static_cast<int>(c.a.size());
  const int np = conv.grid().points();
  std::vector<std::vector<std::complex<double>>> spec(static_cast<std::size_t>(mt));
  for (int m = 0; m < mt; ++m) {
    spec[static_cast<std::size_t>(m)] =
        conv.forward(std::span<const double>(f.data() + static_cast<std::ptrdiff_t>(m) * np, static_cast<std::size_t>(np)));
  }
  const auto source = spec;
  const auto& kh = conv.kernel_spectrum();
  std::vector<std::complex<double>> upper(static_cast<std::size_t>(mt));
  for (std::size_t q = 0; q < kh.size(); ++q) {
    const std::complex<double> k = kh[q];
    for (int m = 0; m < mt; ++m) {  // Thomas algorithm
      const auto sm = static_cast<std::size_t>(m);
      std::complex<double> d = 1.0 - k * c.b[sm];
      if (m + 1 == mt && !closure.empty()) d -= k * closure[q] * c.a[sm];
      std::complex<double> rhs = spec[sm][q];
      if (m > 0) {
        const std::complex<double> lower = -k * c.a[sm - 1];
        d -= lower * upper[sm - 1];
        rhs -= lower * spec[sm - 1][q];
      }
      if (m + 1 < mt) upper[sm] = -k * c.a[sm + 1] / d;
      spec[sm][q] = rhs / d;
    }
    for (int m = mt - 2; m >= 0; --m) {
      const auto sm = static_cast<std::size_t>(m);
      spec[sm][q] -= upper[sm] * spec[sm + 1][q];
    }
  }
  out = f;
  std::vector<double> delta(static_cast<std::size_t>(np));
  for (int m = 0; m < mt; ++m) {
    auto& sm = spec[static_cast<std::size_t>(m)];
    const auto& src = source[static_cast<std::size_t>(m)];
    for (std::size_t q = 0; q < sm.size(); ++q) sm[q] -= src[q];
    conv.backward(sm, delta);
    for (int i = 0; i < np; ++i) out[static_cast<std::ptrdiff_t>(m) * np + i] += delta[static_cast<std::size_t>(i)];
  }
}

// y -> y_m - K*(n_m y_m + (1-n_{m-1}) y_{m-1} + (1-n_{m+1}) y_{m+1})
//          - [m=M] K*Λ*((1-n_M) y_M)
// acting on the total densities y_m = ρ_m^p + ρ_m^h, n_m = 1/(1+η_m).
class DensityOperator : public Eigen::EigenBase<DensityOperator> {
 public:
  using Scalar = double;
  using RealScalar = double;
  using StorageIndex = int;
  enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

  DensityOperator(const Convolver& conv, const std::vector<std::vector<double>>& vacancy,
                  const std::vector<std::complex<double>>& closure)
      : conv_(&conv), n_(&vacancy), closure_(&closure) {}

  Eigen::Index rows() const { return static_cast<Eigen::Index>(n_->size()) * conv_->grid().points(); }
  const Convolver& convolver() const { return *conv_; }
  int truncation() const { return static_cast<int>(n_->size()); }
  const std::vector<std::complex<double>>& closure() const { return *closure_; }
  Eigen::Index cols() const { return rows(); }

  template <typename Rhs>
  Eigen::Product<DensityOperator, Rhs, Eigen::AliasFreeProduct> operator*(const Eigen::MatrixBase<Rhs>& x) const {
    return Eigen::Product<DensityOperator, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
  }

  void apply(const Eigen::VectorXd& y, Eigen::VectorXd& out) const {
    const auto& n = *n_;
    const int mt = static_cast<int>(n.size());
    const int np = conv_->grid().points();
    const auto& kh = conv_->kernel_spectrum();
    out.resize(y.size());
    std::vector<double> w(static_cast<std::size_t>(np));
    std::vector<double> conv(static_cast<std::size_t>(np));
    for (int m = 0; m < mt; ++m) {
      const double* ym = y.data() + static_cast<std::ptrdiff_t>(m) * np;
      for (int i = 0; i < np; ++i) {
        const auto s = static_cast<std::size_t>(i);
        double v = n[m][s] * ym[i];
        if (m > 0) v += (1.0 - n[m - 1][s]) * ym[i - np];
        if (m + 1 < mt) v += (1.0 - n[m + 1][s]) * ym[i + np];
        w[s] = v;
      }
      auto spec = conv_->forward(w);
      if (m + 1 == mt) {
        for (int i = 0; i < np; ++i) w[static_cast<std::size_t>(i)] = (1.0 - n[m][static_cast<std::size_t>(i)]) * ym[i];
        const auto top = conv_->forward(w);
        for (std::size_t j = 0; j < spec.size(); ++j) spec[j] += (*closure_)[j] * top[j];
      }
      for (std::size_t j = 0; j < spec.size(); ++j) spec[j] *= kh[j];
      conv_->backward(spec, conv);
      for (int i = 0; i < np; ++i) out[static_cast<std::ptrdiff_t>(m) * np + i] = ym[i] - conv[static_cast<std::size_t>(i)];
    }
  }

 private:
  const Convolver* conv_;
  const std::vector<std::vector<double>>* n_;
  const std::vector<std::complex<double>>* closure_;
};

// Inverse of the operator above at the constant state, for GMRES.
class DensityPreconditioner {
 public:
  DensityPreconditioner() = default;
  template <typename M>
  explicit DensityPreconditioner(const M& op) { compute(op); }
  template <typename M>
  DensityPreconditioner& analyzePattern(const M&) { return *this; }
  template <typename M>
  DensityPreconditioner& factorize(const M& op) { return compute(op); }
  DensityPreconditioner& compute(const DensityOperator& op) {
    op_ = &op;
    coeffs_ = constant_state_coefficients(op.truncation());
    return *this;
  }
  template <typename Rhs>
  Eigen::VectorXd solve(const Rhs& b) const {
    Eigen::VectorXd f = b;
    Eigen::VectorXd out;
    invert_constant_state(op_->convolver(), coeffs_, op_->closure(), f, out);
    return out;
  }
  Eigen::ComputationInfo info() { return Eigen::Success; }

 private:
  const DensityOperator* op_ = nullptr;
  ChainCoefficients coeffs_;
};

}  // namespace detail
}  // namespace osptba

namespace Eigen::internal {

template <typename Rhs>
struct generic_product_impl<osptba::detail::DensityOperator, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<osptba::detail::DensityOperator, Rhs,
                                generic_product_impl<osptba::detail::DensityOperator, Rhs>> {
  using Scalar = typename Product<osptba::detail::DensityOperator, Rhs>::Scalar;

  template <typename Dest>
  static void scaleAndAddTo(Dest& dst, const osptba::detail::DensityOperator& lhs, const Rhs& rhs,
                            const Scalar& alpha) {
    Eigen::VectorXd x = rhs;
    Eigen::VectorXd y;
    lhs.apply(x, y);
    dst += alpha * y;
  }
};

}  // namespace Eigen::internal

namespace osptba {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kChainLength = 20000;  // frozen strings summed up to this length

double eta_constant(int m) { return 0.5 * m * (m + 3); }

// (1+c) ln(1+c) - c ln c: entropy per unit particle density at η = c.
double entropy_weight(double c) { return (1.0 + c) * std::log1p(c) - c * std::log(c); }

void check_finite(const Eigen::VectorXd& v, const char* where) {
  if (!v.allFinite()) throw NumericalError(std::string(where) + ": non-finite ln η");
}

Eigen::VectorXd pack(const TbaState& s) {
  const int np = s.grid.points();
  Eigen::VectorXd x(static_cast<Eigen::Index>(s.truncation) * np);
  for (int m = 0; m < s.truncation; ++m) {
    for (int i = 0; i < np; ++i) x[static_cast<Eigen::Index>(m) * np + i] = s.log_eta[static_cast<std::size_t>(m)].values[static_cast<std::size_t>(i)];
  }
  return x;
}

void unpack(const Eigen::VectorXd& x, TbaState& s) {
  const int np = s.grid.points();
  for (int m = 0; m < s.truncation; ++m) {
    auto& v = s.log_eta[static_cast<std::size_t>(m)].values;
    for (int i = 0; i < np; ++i) v[static_cast<std::size_t>(i)] = x[static_cast<Eigen::Index>(m) * np + i];
  }
}

// Right-hand side F(x) of the truncated TBA system.
class TbaMap {
 public:
  TbaMap(const Grid& grid, int truncation, double beta, double coupling)
      : grid_(grid), mt_(truncation), conv_(grid, Kernel::sech()), drive_(static_cast<std::size_t>(grid.points())) {
    for (int i = 0; i < grid.points(); ++i) {
      drive_[static_cast<std::size_t>(i)] = kPi * beta * coupling / std::cosh(kPi * grid.node(i));
    }
    for (int m = 1; m <= mt_ + 1; ++m) {
      const double c = eta_constant(m);
      plus_.push_back(std::log1p(c));
      minus_.push_back(std::log1p(1.0 / c));
    }
  }

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    const int np = grid_.points();
    Eigen::VectorXd out(x.size());
    std::vector<double> lp(static_cast<std::size_t>(mt_) * np);
    std::vector<double> lm(static_cast<std::size_t>(mt_) * np);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      lp[static_cast<std::size_t>(j)] = softplus(x[j]);
      lm[static_cast<std::size_t>(j)] = softplus(-x[j]);
    }
    std::vector<double> src(static_cast<std::size_t>(np));
    std::vector<double> res(static_cast<std::size_t>(np));
    for (int m = 0; m < mt_; ++m) {
      // K*(ln(1+η_{m-1}) - ln(1+1/η_m) + ln(1+η_{m+1})) as a single convolution.
      double tail = -minus_[static_cast<std::size_t>(m)];
      tail += m + 1 < mt_ ? plus_[static_cast<std::size_t>(m + 1)] : plus_[static_cast<std::size_t>(mt_)];
      if (m > 0) tail += plus_[static_cast<std::size_t>(m - 1)];
      for (int i = 0; i < np; ++i) {
        const std::size_t s = static_cast<std::size_t>(m) * np + i;
        double v = -lm[s];
        v += m + 1 < mt_ ? lp[s + np] : plus_[static_cast<std::size_t>(mt_)];
        if (m > 0) v += lp[s - np];
        src[static_cast<std::size_t>(i)] = v;
      }
      conv_.apply(src, tail, res);
      for (int i = 0; i < np; ++i) {
        double v = res[static_cast<std::size_t>(i)];
        if (m == 0) v += drive_[static_cast<std::size_t>(i)];
        out[static_cast<Eigen::Index>(m) * np + i] = v;
      }
    }
    return out;
  }

 private:
  Grid grid_;
  int mt_;
  Convolver conv_;
  std::vector<double> drive_;
  std::vector<double> plus_;   // ln(1 + c_m), m = 1..M+1
  std::vector<double> minus_;  // ln(1 + 1/c_m)
};

// (I - L)^{-1} with L the Jacobian of F at the constant state η_m = c_m.
class ChordPreconditioner {
 public:
  ChordPreconditioner(const Grid& grid, int truncation)
      : conv_(grid, Kernel::sech()), coeffs_(detail::constant_state_coefficients(truncation)) {}

  Eigen::VectorXd operator()(const Eigen::VectorXd& f) const {
    Eigen::VectorXd out(f.size());
    detail::invert_constant_state(conv_, coeffs_, {}, f, out);
    return out;
  }

 private:
  Convolver conv_;
  detail::ChainCoefficients coeffs_;
};

void check_tails(const TbaState& s, double tolerance) {
  const double dev = s.tail_deviation();
  if (!(dev <= tolerance)) {
    throw NumericalError("TBA: ln η deviates from its asymptotic constant by " + std::to_string(dev) +
                         " at the grid edge");
  }
}

// Wide-grid index of the first TBA-grid node and the sampling stride.
std::pair<int, int> embedding(const Grid& narrow, const Grid& wide) {
  const double ratio = wide.spacing() / narrow.spacing();
  const int stride = static_cast<int>(std::lround(ratio));
  const double offset = (wide.half_extent() - narrow.half_extent()) / wide.spacing();
  const int i0 = static_cast<int>(std::lround(offset));
  if (stride < 1 || std::abs(ratio - stride) > 1e-9 || std::abs(offset - i0) > 1e-9 ||
      wide.half_extent() < narrow.half_extent()) {
    throw std::invalid_argument("density grid nodes must be a subset-compatible dilation of the TBA grid");
  }
  return {i0, stride};
}

// ln η_m on the wide grid, frozen at ln c_m outside the TBA box.
std::vector<std::vector<double>> widen(const TbaState& state, const Grid& wide) {
  const auto [i0, stride] = embedding(state.grid, wide);
  const int nw = wide.points();
  const int inner = state.grid.points() / stride;
  std::vector<std::vector<double>> x(static_cast<std::size_t>(state.truncation));
  for (int m = 0; m < state.truncation; ++m) {
    auto& xm = x[static_cast<std::size_t>(m)];
    xm.assign(static_cast<std::size_t>(nw), std::log(eta_constant(m + 1)));
    const auto& v = state.log_eta[static_cast<std::size_t>(m)].values;
    for (int j = 0; j < inner; ++j) xm[static_cast<std::size_t>(i0 + j)] = v[static_cast<std::size_t>(j * stride)];
  }
  return x;
}

// s_m(k) of the frozen hierarchy ρ̂_m^p = s_m X̂_{m-1} (X = hole density),
//   s_m = K̂ / (1 + c_m - K̂ - K̂ c_m c_{m+1} s_{m+1}),
// for m = M+1..kChainLength; entry 0 is m = M+1.
std::vector<std::vector<double>> chain_ratios(int truncation, const std::vector<double>& ks, std::size_t keep_all,
                                              const std::vector<std::size_t>& keep) {
  const std::size_t count = static_cast<std::size_t>(kChainLength - truncation);
  std::vector<std::vector<double>> out(count);
  std::vector<double> s(ks.size(), 0.0);
  std::vector<double> kh(ks.size());
  for (std::size_t j = 0; j < ks.size(); ++j) kh[j] = fourier_K(ks[j]);
  for (int m = kChainLength; m > truncation; --m) {
    const double c = eta_constant(m);
    const double c1 = eta_constant(m + 1);
    for (std::size_t j = 0; j < ks.size(); ++j) s[j] = kh[j] / (1.0 + c - kh[j] - kh[j] * c * c1 * s[j]);
    const std::size_t idx = static_cast<std::size_t>(m - truncation - 1);
    const std::size_t n = idx == 0 ? keep_all : std::min(keep_all, keep.empty() ? keep_all : keep[idx]);
    out[idx].assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return out;
}

// Real part of ∫ g(u) e^{-iku} du by the trapezoid rule on the wide grid.
double fourier_sample(const SampledFunction& g, double k) {
  const Grid& grid = g.grid;
  double sum = 0.0;
  for (int i = 0; i < grid.points(); ++i) {
    // Node 0 carries -L and its mirror +L at half weight each.
    sum += g.values[static_cast<std::size_t>(i)] * std::cos(k * grid.node(i));
  }
  return grid.spacing() * sum;
}

}  // namespace

void TbaConfig::validate() const {
  if (truncation < 2) throw std::invalid_argument("TbaConfig: truncation must be >= 2");
  if (!(half_extent > 0.0)) throw std::invalid_argument("TbaConfig: half extent must be positive");
  (void)grid();
  (void)density_grid();
  if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("TbaConfig: damping must lie in (0, 1]");
  if (!(tolerance > 0.0)) throw std::invalid_argument("TbaConfig: tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("TbaConfig: max_iterations must be >= 1");
  if (anderson_depth < 0) throw std::invalid_argument("TbaConfig: anderson_depth must be >= 0");
  if (!(tail_tolerance > 0.0)) throw std::invalid_argument("TbaConfig: tail tolerance must be positive");
  if (density_dilation < 1) throw std::invalid_argument("TbaConfig: density_dilation must be >= 1");
  (void)embedding(grid(), density_grid());
}

double TbaState::asymmetry() const {
  double worst = 0.0;
  for (const auto& g : log_eta) worst = std::max(worst, g.asymmetry());
  return worst;
}

double TbaState::tail_deviation() const {
  double worst = 0.0;
  for (const auto& g : log_eta) worst = std::max(worst, g.edge_deviation());
  return worst;
}

std::vector<double> high_t_constants(int truncation) {
  if (truncation < 1) throw std::invalid_argument("high_t_constants: truncation must be >= 1");
  std::vector<double> c(static_cast<std::size_t>(truncation));
  for (int m = 1; m <= truncation; ++m) c[static_cast<std::size_t>(m - 1)] = eta_constant(m);
  return c;
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

TbaState initialize_eta(const TbaConfig& config, double beta, double coupling) {
  config.validate();
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("initialize_eta: beta must be >= 0");
  if (!std::isfinite(coupling)) throw std::invalid_argument("initialize_eta: coupling must be finite");
  TbaState s{config.grid(), config.truncation, {}, beta, coupling, false, 0, 0.0};
  s.log_eta.reserve(static_cast<std::size_t>(config.truncation));
  for (int m = 1; m <= config.truncation; ++m) {
    const double c = std::log(eta_constant(m));
    if (m == 1) {
      s.log_eta.push_back(SampledFunction::sample(
          s.grid, [&](double u) { return c + kPi * beta * coupling / std::cosh(kPi * u); }, c));
    } else {
      s.log_eta.push_back(SampledFunction::sample(s.grid, [c](double) { return c; }, c));
    }
  }
  return s;
}

double fixed_point_residual(const TbaState& state) {
  const Eigen::VectorXd x = pack(state);
  const TbaMap map(state.grid, state.truncation, state.beta, state.coupling);
  return (map(x) - x).lpNorm<Eigen::Infinity>();
}

TbaState iterate_once(const TbaState& state, double damping) {
  if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("iterate_once: damping must lie in (0, 1]");
  const Eigen::VectorXd x = pack(state);
  const TbaMap map(state.grid, state.truncation, state.beta, state.coupling);
  const Eigen::VectorXd f = map(x);
  check_finite(f, "iterate_once");
  TbaState next = state;
  unpack((1.0 - damping) * x + damping * f, next);
  next.iterations = state.iterations + 1;
  next.residual = (f - x).lpNorm<Eigen::Infinity>();
  next.converged = false;
  return next;
}

TbaState solve(const TbaConfig& config, double beta, double coupling) {
  TbaState state = initialize_eta(config, beta, coupling);
  const TbaMap map(state.grid, state.truncation, beta, coupling);
  std::optional<ChordPreconditioner> chord;
  if (config.precondition) chord.emplace(state.grid, state.truncation);

  Eigen::VectorXd x = pack(state);
  Eigen::VectorXd best = x;
  double best_res = std::numeric_limits<double>::infinity();
  double omega = chord ? 1.0 : config.damping;
  std::vector<Eigen::VectorXd> xs;
  std::vector<Eigen::VectorXd> fs;
  double res = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < config.max_iterations; ++it) {
    const Eigen::VectorXd g = map(x);
    check_finite(g, "solve");
    Eigen::VectorXd f = g - x;
    res = f.lpNorm<Eigen::Infinity>();
    if (res < best_res) {
      best_res = res;
      best = x;
    } else if (res > 10.0 * best_res) {
      // Blow-up: restart from the best iterate with half the mixing.
      omega = std::max(0.5 * omega, 1e-3);
      xs.clear();
      fs.clear();
      x = best;
      continue;
    }
    if (res < config.tolerance) break;
    if (chord) f = (*chord)(f);

    xs.push_back(x);
    fs.push_back(f);
    if (static_cast<int>(xs.size()) > config.anderson_depth + 1) {
      xs.erase(xs.begin());
      fs.erase(fs.begin());
    }
    Eigen::VectorXd next = x + omega * f;
    if (xs.size() > 1) {
      const auto cols = static_cast<Eigen::Index>(xs.size() - 1);
      Eigen::MatrixXd dx(x.size(), cols);
      Eigen::MatrixXd df(x.size(), cols);
      for (Eigen::Index c = 0; c < cols; ++c) {
        dx.col(c) = xs[static_cast<std::size_t>(c + 1)] - xs[static_cast<std::size_t>(c)];
        df.col(c) = fs[static_cast<std::size_t>(c + 1)] - fs[static_cast<std::size_t>(c)];
      }
      const Eigen::VectorXd gamma = df.colPivHouseholderQr().solve(f);
      if (gamma.allFinite()) next -= (dx + omega * df) * gamma;
    }
    x = std::move(next);
  }
  const bool converged = res < config.tolerance;
  if (!converged) x = best;
  unpack(x, state);
  state.iterations = it;
  state.residual = converged ? res : best_res;
  state.converged = converged;
  if (converged) check_tails(state, config.tail_tolerance);
  return state;
}

double free_energy(const TbaState& state) {
  if (!state.converged) {
    throw ConvergenceError("free_energy: state not converged", state.iterations, state.residual);
  }
  const double ln3 = std::log(3.0);
  const Grid& g = state.grid;
  const auto& x = state.log_eta.front().values;
  double sum = 0.0;
  for (int i = 0; i < g.points(); ++i) sum += R_kernel(g.node(i)) * (softplus(x[static_cast<std::size_t>(i)]) - ln3);
  const double integral = ln3 + g.spacing() * sum;
  return state.coupling * (4.0 * kPi / (3.0 * std::sqrt(3.0)) - 1.0) - integral / state.beta;
}

std::vector<double> integral_equation_residual(const TbaState& state, const TbaConfig& config, double window) {
  const Grid wide = config.density_grid();
  const auto x = widen(state, wide);
  const int mt = state.truncation;
  const int nw = wide.points();
  const Convolver base(wide, Kernel::sech());

  // Decaying parts ln(1+1/η_l) - ln(1+1/c_l), transformed once.
  std::vector<std::vector<std::complex<double>>> dm(static_cast<std::size_t>(mt));
  std::vector<double> buf(static_cast<std::size_t>(nw));
  for (int l = 0; l < mt; ++l) {
    const double c = std::log1p(1.0 / eta_constant(l + 1));
    for (int i = 0; i < nw; ++i) buf[static_cast<std::size_t>(i)] = softplus(-x[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)]) - c;
    dm[static_cast<std::size_t>(l)] = base.forward(buf);
  }
  // Sampled Lorentzian spectra [j], j = 1..2M.
  std::vector<std::vector<std::complex<double>>> lor(static_cast<std::size_t>(2 * mt + 1));
  for (int j = 1; j <= 2 * mt; ++j) lor[static_cast<std::size_t>(j)] = Convolver(wide, Kernel::lorentzian(j)).kernel_spectrum();

  // l > M at the constants: sum_{l>M} min(m,l) ln(1+1/c_l) = m ln((M+3)/(M+1)).
  const double tail_sum = std::log(static_cast<double>(mt + 3) / (mt + 1));
  std::vector<double> out(static_cast<std::size_t>(mt), 0.0);
  std::vector<double> conv(static_cast<std::size_t>(nw));
  const std::size_t nk = dm.front().size();
  for (int m = 1; m <= mt; ++m) {
    std::vector<std::complex<double>> acc(nk, 0.0);
    double constant = m * tail_sum;
    std::vector<double> local(static_cast<std::size_t>(nw), 0.0);
    for (int l = 1; l <= mt; ++l) {
      constant += std::min(m, l) * std::log1p(1.0 / eta_constant(l));
      const auto& d = dm[static_cast<std::size_t>(l - 1)];
      for (const auto& [j, c] : takahashi_coefficients(m, l)) {
        if (j == 0) {
          const double cl = std::log1p(1.0 / eta_constant(l));
          for (int i = 0; i < nw; ++i) {
            local[static_cast<std::size_t>(i)] += c * (softplus(-x[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(i)]) - cl);
          }
        } else {
          const auto& kj = lor[static_cast<std::size_t>(j)];
          for (std::size_t q = 0; q < nk; ++q) acc[q] += static_cast<double>(c) * kj[q] * d[q];
        }
      }
    }
    base.backward(acc, conv);
    const double drive = 2.0 * kPi * state.beta * state.coupling;
    double worst = 0.0;
    for (int i = 0; i < nw; ++i) {
      const double u = wide.node(i);
      if (std::abs(u) > window) continue;
      const auto s = static_cast<std::size_t>(i);
      const double lhs = softplus(x[static_cast<std::size_t>(m - 1)][s]);
      const double rhs = drive * f_m_kernel(m, u) + constant + conv[s] + local[s];
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    out[static_cast<std::size_t>(m - 1)] = worst;
  }
  return out;
}

DensityState recover_densities(const TbaState& state, const TbaConfig& config) {
  if (!state.converged) {
    throw ConvergenceError("recover_densities: state not converged", state.iterations, state.residual);
  }
  const Grid wide = config.density_grid();
  const int mt = state.truncation;
  const int nw = wide.points();
  const auto x = widen(state, wide);

  std::vector<std::vector<double>> vacancy(static_cast<std::size_t>(mt));  // n_m = 1/(1+η_m)
  for (int m = 0; m < mt; ++m) {
    auto& n = vacancy[static_cast<std::size_t>(m)];
    n.resize(static_cast<std::size_t>(nw));
    for (int i = 0; i < nw; ++i) n[static_cast<std::size_t>(i)] = std::exp(-softplus(x[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)]));
  }

  const Convolver conv(wide, Kernel::sech());
  const std::vector<double> ks = conv.frequencies();
  const double dk = ks[1] - ks[0];
  // Frequencies kept per chain level: e^{-mk/2} below e^{-40}.
  std::vector<std::size_t> keep(static_cast<std::size_t>(kChainLength - mt));
  for (std::size_t idx = 0; idx < keep.size(); ++idx) {
    const double m = static_cast<double>(mt + 1 + static_cast<int>(idx));
    keep[idx] = std::min(ks.size(), static_cast<std::size_t>(std::ceil(80.0 / (m * dk))) + 1);
  }
  const auto chain = chain_ratios(mt, ks, ks.size(), keep);
  std::vector<std::complex<double>> closure(ks.size());
  const double c_top = eta_constant(mt + 1);
  for (std::size_t j = 0; j < ks.size(); ++j) closure[j] = c_top * chain.front()[j];

  detail::DensityOperator op(conv, vacancy, closure);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(op.rows());
  for (int i = 0; i < nw; ++i) b[i] = K_kernel(wide.node(i));

  Eigen::GMRES<detail::DensityOperator, detail::DensityPreconditioner> gmres;
  gmres.set_restart(100);
  gmres.setTolerance(1e-10);
  gmres.setMaxIterations(2000);
  gmres.compute(op);
  const Eigen::VectorXd y = gmres.solve(b);
  if (gmres.info() != Eigen::Success || !y.allFinite()) {
    throw ConvergenceError("recover_densities: GMRES did not converge", static_cast<int>(gmres.iterations()),
                           gmres.error());
  }

  DensityState d{wide, mt, {}, {}, 0.0, 0.0, static_cast<int>(gmres.iterations()), gmres.error()};
  double lowest = 0.0;
  for (int m = 0; m < mt; ++m) {
    std::vector<double> p(static_cast<std::size_t>(nw));
    std::vector<double> h(static_cast<std::size_t>(nw));
    for (int i = 0; i < nw; ++i) {
      const auto s = static_cast<std::size_t>(i);
      const double total = y[static_cast<Eigen::Index>(m) * nw + i];
      const double n = vacancy[static_cast<std::size_t>(m)][s];
      p[s] = n * total;
      h[s] = (1.0 - n) * total;
      lowest = std::min({lowest, p[s], h[s]});
    }
    d.rho_p.emplace_back(wide, std::move(p));
    d.rho_h.emplace_back(wide, std::move(h));
  }
  if (lowest < -1e-8) throw NumericalError("recover_densities: negative density " + std::to_string(lowest));

  // Frozen strings m > M, driven by the hole density of M.
  const double u0 = wide.node(0);
  const auto hat = conv.forward(d.rho_h.back().values);
  std::vector<double> prod(ks.size());
  for (std::size_t j = 0; j < ks.size(); ++j) {
    prod[j] = (wide.spacing() * hat[j] * std::exp(std::complex<double>(0.0, -ks[j] * u0))).real();
  }
  for (int m = mt + 1; m < kChainLength; ++m) {
    const auto& s = chain[static_cast<std::size_t>(m - mt - 1)];
    const double c = eta_constant(m);
    d.tail_entropy += entropy_weight(c) * s[0] * prod[0];
    double energy = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      const double rho = s[j] * prod[j];
      const double w = j == 0 ? 0.5 * dk : dk;
      energy += w * std::exp(-0.5 * m * ks[j]) * rho;
      prod[j] = c * rho;
    }
    d.tail_energy += 2.0 * energy;
  }
  return d;
}

double density_equation_residual(const DensityState& dens, const std::vector<double>& ks) {
  const int mt = dens.truncation;
  const auto chain = chain_ratios(mt, ks, ks.size(), {});
  double worst = 0.0;
  for (std::size_t q = 0; q < ks.size(); ++q) {
    const double k = ks[q];
    std::vector<double> p(static_cast<std::size_t>(mt));
    for (int l = 0; l < mt; ++l) p[static_cast<std::size_t>(l)] = fourier_sample(dens.rho_p[static_cast<std::size_t>(l)], k);
    const double hole_top = fourier_sample(dens.rho_h.back(), k);
    for (int m = 1; m <= mt; ++m) {
      double r = fourier_f(m, k) - fourier_sample(dens.rho_h[static_cast<std::size_t>(m - 1)], k);
      for (int l = 1; l <= mt; ++l) r -= fourier_A(l, m, k) * p[static_cast<std::size_t>(l - 1)];
      double x = hole_top;
      for (int l = mt + 1; l < kChainLength; ++l) {
        const double rho = chain[static_cast<std::size_t>(l - mt - 1)][q] * x;
        const double term = fourier_A(l, m, k) * rho;
        r -= term;
        x = eta_constant(l) * rho;
        if (l > mt + 50 && std::abs(term) < 1e-18) break;
      }
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

ThermoResult thermo_observables(const DensityState& dens, const TbaState& state, double gap_tolerance) {
  const Grid& g = dens.grid;
  const auto x = widen(state, g);
  double energy = 0.0;
  double entropy = 0.0;
  for (int m = 0; m < dens.truncation; ++m) {
    const auto& p = dens.rho_p[static_cast<std::size_t>(m)].values;
    const auto& h = dens.rho_h[static_cast<std::size_t>(m)].values;
    for (int i = 0; i < g.points(); ++i) {
      const auto s = static_cast<std::size_t>(i);
      const double xi = x[static_cast<std::size_t>(m)][s];
      energy += 2.0 * kPi * f_m_kernel(m + 1, g.node(i)) * p[s];
      // ρ H(n) with -ln n = ln(1+η), -ln(1-n) = ln(1+1/η)
      entropy += p[s] * softplus(xi) + h[s] * softplus(-xi);
    }
  }
  ThermoResult r;
  r.energy = state.coupling * (g.spacing() * energy + dens.tail_energy - 1.0);
  r.entropy = g.spacing() * entropy + dens.tail_entropy;
  r.free_energy = free_energy(state);
  r.gap = r.energy - state.temperature() * r.entropy - r.free_energy;
  if (!(std::abs(r.gap) <= gap_tolerance)) {
    throw NumericalError("thermo_observables: e - T s differs from f by " + std::to_string(r.gap));
  }
  return r;
}

double epsilon_low_t(int m, double u, double coupling) {
  if (!(coupling > 0.0)) throw std::invalid_argument("epsilon_low_t: requires J > 0");
  return 2.0 * kPi * coupling * f_m_kernel(m, u);
}

}  // namespace osptba
