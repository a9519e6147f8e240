#include "osptba/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>
#include <CLI11.hpp>
#include <json.hpp>

#include "osptba/algebra.hpp"
#include "osptba/bethe.hpp"
#include "osptba/errors.hpp"
#include "osptba/exact.hpp"
#include "osptba/kernels.hpp"

namespace osptba::cli {
namespace {

using json = nlohmann::json;
using cplx = std::complex<double>;

constexpr double kPi = std::numbers::pi;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

double rounded(double x) { return std::isfinite(x) ? std::stod(format_number(x)) : x; }

json number_or_null(double x) { return std::isfinite(x) ? json(rounded(x)) : json(nullptr); }

json complex_list(const std::vector<cplx>& roots) {
  json out = json::array();
  for (const cplx& z : roots) out.push_back({rounded(z.real()), rounded(z.imag())});
  return out;
}

template <class T>
T get_as(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config: bad value for '") + key + "'");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw UsageError(std::string("config: unknown key '") + key + "' in " + where);
    }
  }
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open " + path + " for writing");
  file << text;
  if (!file) throw std::runtime_error("write to " + path + " failed");
}

// Closed-form single-root solutions e(u)^N = (-1)^N, u = cot(φ/2)/2.
std::vector<double> single_roots(int sites) {
  std::vector<double> out;
  for (int k = 0; k < sites; ++k) {
    const double phi = kPi + 2.0 * kPi * k / sites;
    if (std::abs(std::remainder(phi, 2.0 * kPi)) < 1e-12) continue;
    out.push_back(0.5 / std::tan(0.5 * phi));
  }
  std::sort(out.begin(), out.end());
  return out;
}

cplx parse_complex(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  if (s.empty()) throw UsageError("seeds: empty root");
  auto to_double = [&](const std::string& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      throw UsageError("seeds: cannot parse '" + s + "'");
    }
    if (used != t.size()) throw UsageError("seeds: cannot parse '" + s + "'");
    return v;
  };
  if (s.back() != 'i') return {to_double(s), 0.0};
  const std::string body = s.substr(0, s.size() - 1);
  std::size_t split = std::string::npos;
  for (std::size_t p = body.size(); p-- > 1;) {
    if ((body[p] == '+' || body[p] == '-') && body[p - 1] != 'e' && body[p - 1] != 'E') {
      split = p;
      break;
    }
  }
  const std::string re = split == std::string::npos ? "" : body.substr(0, split);
  std::string im = split == std::string::npos ? body : body.substr(split);
  if (im.empty() || im == "+") im = "1";
  if (im == "-") im = "-1";
  return {re.empty() ? 0.0 : to_double(re), to_double(im)};
}

std::vector<cplx> sorted_roots(std::vector<cplx> r) {
  std::sort(r.begin(), r.end(), [](const cplx& a, const cplx& b) {
    if (std::abs(a.real() - b.real()) > 1e-9) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return r;
}

SpectrumCache& shared_cache() {
  static SpectrumCache cache;
  return cache;
}

double max_distance(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::vector<double> temperature_grid(const TemperatureRange& r) {
  if (r.steps < 1) throw UsageError("temperature range: steps must be >= 1");
  if (!(r.min > 0.0) || !(r.max >= r.min)) throw UsageError("temperature range: need 0 < min <= max");
  std::vector<double> t(static_cast<std::size_t>(r.steps));
  for (int i = 0; i < r.steps; ++i) {
    const double x = r.steps == 1 ? 0.0 : static_cast<double>(i) / (r.steps - 1);
    t[static_cast<std::size_t>(i)] =
        r.logarithmic ? r.min * std::pow(r.max / r.min, x) : r.min + (r.max - r.min) * x;
  }
  return t;
}

std::vector<double> RunConfig::resolved_temperatures() const {
  std::vector<double> t = !temperatures.empty() ? temperatures : range ? temperature_grid(*range) : std::vector<double>{};
  if (t.empty()) throw UsageError("no temperatures given");
  for (double x : t) {
    if (!(x > 0.0) || !std::isfinite(x)) throw UsageError("temperatures must be positive and finite");
  }
  return t;
}

TbaConfig RunConfig::tba_config(double temperature) const {
  TbaConfig c;
  c.truncation = truncation.value_or(TbaConfig::default_truncation(temperature));
  c.half_extent = half_extent;
  c.points = points;
  c.damping = damping;
  c.tolerance = tolerance;
  c.max_iterations = max_iterations;
  c.tail_tolerance = tail_tolerance;
  // Density grid: every 8th node, box 64 times wider.
  c.density_points = 8 * points;
  return c;
}

void RunConfig::validate() const {
  if (!std::isfinite(coupling)) throw UsageError("J must be finite");
  if (truncation && *truncation < 2) throw UsageError("M_trunc must be >= 2");
  if (format != "csv" && format != "json") throw UsageError("format must be csv or json");
  if (!(gap_tolerance > 0.0)) throw UsageError("gap tolerance must be positive");
  if (points < 64) throw UsageError("grid points must be a power of two >= 64");
  try {
    tba_config(1.0).validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

RunConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("config: top level must be an object");
  reject_unknown(j, {"J", "temperatures", "M_trunc", "grid", "damping", "tolerances", "max_iterations", "output"},
                 "config");
  RunConfig c;
  if (j.contains("J")) c.coupling = get_as<double>(j["J"], "J");
  if (j.contains("temperatures")) {
    const json& t = j["temperatures"];
    if (t.is_array()) {
      c.temperatures = get_as<std::vector<double>>(t, "temperatures");
    } else if (t.is_object()) {
      reject_unknown(t, {"min", "max", "steps", "spacing"}, "temperatures");
      TemperatureRange r;
      r.min = get_as<double>(t.value("min", json(0.0)), "temperatures.min");
      r.max = get_as<double>(t.value("max", json(0.0)), "temperatures.max");
      r.steps = get_as<int>(t.value("steps", json(0)), "temperatures.steps");
      const std::string spacing = get_as<std::string>(t.value("spacing", json("linear")), "temperatures.spacing");
      if (spacing != "linear" && spacing != "log") throw UsageError("config: spacing must be linear or log");
      r.logarithmic = spacing == "log";
      c.range = r;
    } else {
      throw UsageError("config: temperatures must be a list or a range object");
    }
  }
  if (j.contains("M_trunc") && !j["M_trunc"].is_null()) c.truncation = get_as<int>(j["M_trunc"], "M_trunc");
  if (j.contains("grid")) {
    const json& g = j["grid"];
    reject_unknown(g, {"L", "points"}, "grid");
    if (g.contains("L")) c.half_extent = get_as<double>(g["L"], "grid.L");
    if (g.contains("points")) c.points = get_as<int>(g["points"], "grid.points");
  }
  if (j.contains("damping")) c.damping = get_as<double>(j["damping"], "damping");
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    reject_unknown(t, {"fixed_point", "tail", "gap"}, "tolerances");
    if (t.contains("fixed_point")) c.tolerance = get_as<double>(t["fixed_point"], "tolerances.fixed_point");
    if (t.contains("tail")) c.tail_tolerance = get_as<double>(t["tail"], "tolerances.tail");
    if (t.contains("gap")) c.gap_tolerance = get_as<double>(t["gap"], "tolerances.gap");
  }
  if (j.contains("max_iterations")) c.max_iterations = get_as<int>(j["max_iterations"], "max_iterations");
  if (j.contains("output")) {
    const json& o = j["output"];
    reject_unknown(o, {"path", "format"}, "output");
    if (o.contains("path")) c.output = get_as<std::string>(o["path"], "output.path");
    if (o.contains("format")) c.format = get_as<std::string>(o["format"], "output.format");
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

int worker_limit() {
  if (const char* env = std::getenv("OSPTBA_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(std::min<long>(v, 256));
  }
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

SweepRow sweep_row(const RunConfig& config, double temperature) {
  SweepRow row;
  row.temperature = temperature;
  row.coupling = config.coupling;
  row.free_energy = row.energy = row.entropy = kNan;
  const TbaConfig tc = config.tba_config(temperature);
  row.truncation = tc.truncation;
  try {
    const TbaState s = solve(tc, 1.0 / temperature, config.coupling);
    row.iterations = s.iterations;
    row.residual = s.residual;
    if (!s.converged) {
      row.error = "not converged after " + std::to_string(s.iterations) + " iterations (residual " +
                  format_number(s.residual) + ")";
      return row;
    }
    row.free_energy = free_energy(s);
    const ThermoResult t = thermo_observables(recover_densities(s, tc), s, std::numeric_limits<double>::infinity());
    row.energy = t.energy;
    row.entropy = t.entropy;
    if (!(std::abs(t.gap) <= config.gap_tolerance)) {
      row.error = "e - T s differs from f by " + format_number(t.gap);
      return row;
    }
    row.ok = true;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

std::vector<SweepRow> run_sweep(const RunConfig& config, int workers) {
  const std::vector<double> temps = config.resolved_temperatures();
  std::vector<SweepRow> rows(temps.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < temps.size(); i = next++) rows[i] = sweep_row(config, temps[i]);
  };
  const int n = std::clamp(workers, 1, static_cast<int>(temps.size()));
  std::vector<std::jthread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "T,J,f,e,s,iterations,residual,M_trunc\n";
  for (const auto& r : rows) {
    out += format_number(r.temperature) + ',' + format_number(r.coupling) + ',' + format_number(r.free_energy) + ',' +
           format_number(r.energy) + ',' + format_number(r.entropy) + ',' + std::to_string(r.iterations) + ',' +
           format_number(r.residual) + ',' + std::to_string(r.truncation) + '\n';
  }
  return out;
}

std::string sweep_json(const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json rec = {{"T", number_or_null(r.temperature)}, {"J", number_or_null(r.coupling)},
                {"f", number_or_null(r.free_energy)}, {"e", number_or_null(r.energy)},
                {"s", number_or_null(r.entropy)},     {"iterations", r.iterations},
                {"residual", number_or_null(r.residual)}, {"M_trunc", r.truncation},
                {"ok", r.ok}};
    if (!r.ok) rec["error"] = r.error;
    out.push_back(std::move(rec));
  }
  return out.dump(2) + '\n';
}

std::vector<CheckResult> validation_suite() {
  std::vector<CheckResult> checks;
  auto add = [&](std::string name, double value, double tol) {
    checks.push_back({std::move(name), value, tol, value < tol});
  };

  std::mt19937 rng(20240601u);
  std::uniform_real_distribution<double> uv(-1.0, 1.0);
  double ybe = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double u = uv(rng);
    const double v = uv(rng);
    ybe = std::max(ybe, check_graded_ybe(u, v));
  }
  add("graded Yang-Baxter", ybe, 1e-12);

  const Grid grid(20.0, 4096);
  add("normalization of K", std::abs(trapezoid(SampledFunction::sample(grid, K_kernel)) +
                                     Kernel::sech().tail_mass(20.0) - 0.5),
      1e-8);
  double lorentz = 0.0;
  for (int m = 1; m <= 10; ++m) {
    const double mass = trapezoid(SampledFunction::sample(grid, [m](double u) { return f_m_kernel(m, u); })) +
                        Kernel::lorentzian(m).tail_mass(20.0);
    lorentz = std::max(lorentz, std::abs(mass - 1.0));
  }
  add("normalization of f_m, m<=10", lorentz, 1e-6);
  add("normalization of R",
      std::abs(trapezoid(SampledFunction::sample(grid, R_kernel)) + R_tail_mass(20.0) - 1.0), 1e-6);

  double binv = 0.0;
  for (double k : {0.1, 0.7, 3.0}) {
    for (int n = 1; n <= 10; ++n) {
      for (int l = 1; l <= 10; ++l) {
        double sum = 0.0;
        for (int m = 1; m <= 200; ++m) sum += b_inverse(n, m, k) * fourier_B(m, l, k);
        binv = std::max(binv, std::abs(sum - (n == l ? 1.0 : 0.0)));
      }
    }
  }
  add("B^-1 B = identity", binv, 1e-8);

  const auto c = high_t_constants(50);
  double rec = 0.0;
  for (std::size_t m = 1; m + 1 < c.size(); ++m) {
    const double rhs = (1.0 + c[m + 1]) * (1.0 + c[m - 1]) / (1.0 + 1.0 / c[m]);
    rec = std::max(rec, std::abs(c[m] * c[m] / rhs - 1.0));
  }
  add("high-T recursion m<=49", rec, 1e-12);

  {
    const int n_sites = 4;
    const double u = 0.37;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> tm(build_transfer_matrix(u, n_sites).entries(), false);
    const SpectrumResult h = spectrum(n_sites, 1.0);
    std::vector<BetheState> states{BetheState(n_sites, {})};
    for (double r : single_roots(n_sites)) states.push_back(solve_bae_newton(BetheState(n_sites, {r})).state);
    const cplx phase = std::pow(cplx(0.0, 1.0), n_sites);
    double worst = 0.0;
    for (const auto& s : states) {
      const cplx lambda = phase * dvf_eigenvalue(u, s);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& z : tm.eigenvalues()) best = std::min(best, std::abs(z - lambda));
      const double e = energy_from_roots(s, 1.0);
      double best_e = std::numeric_limits<double>::infinity();
      for (double x : h.eigenvalues) best_e = std::min(best_e, std::abs(x - e));
      worst = std::max({worst, best, best_e});
    }
    add("DVF/spectrum match, N=4", worst, 1e-8);
  }

  {
    const Grid wide(40.0, 8192);
    const auto f2 = SampledFunction::sample(wide, [](double u) { return f_m_kernel(2, u); });
    const SampledFunction out = convolve(Kernel::lorentzian(1), f2, 1e-3);
    double worst = 0.0;
    for (int i = 0; i < wide.points(); ++i) {
      const double u = wide.node(i);
      if (std::abs(u) <= 5.0) worst = std::max(worst, std::abs(out.values[static_cast<std::size_t>(i)] - f_m_kernel(3, u)));
    }
    add("Lorentzian semigroup f1*f2=f3", worst, 1e-6);
  }
  return checks;
}

std::string check_table(const std::vector<CheckResult>& checks) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-32s %-14s %-10s %s\n", "check", "deviation", "tolerance", "status");
  out += line;
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%-32s %-14.6g %-10.3g %s\n", c.name.c_str(), c.value, c.tolerance,
                  c.passed ? "PASS" : "FAIL");
    out += line;
  }
  return out;
}

std::vector<CompareRow> run_compare(int sites, double coupling, const std::vector<double>& temperatures,
                                    const RunConfig& config) {
  if (sites < 2 || sites > kExactMaxSites) {
    throw SizeGuardError("compare: N must lie in [2, " + std::to_string(kExactMaxSites) + "]");
  }
  if (temperatures.empty()) throw UsageError("compare: no temperatures given");
  const auto spec = shared_cache().get(sites, coupling);
  std::vector<CompareRow> rows;
  for (double t : temperatures) {
    if (!(t > 0.0)) throw UsageError("compare: temperatures must be positive");
    const TbaState s = solve(config.tba_config(t), 1.0 / t, coupling);
    CompareRow r;
    r.temperature = t;
    r.f_exact = free_energy_exact(*spec, t);
    r.f_tba = free_energy(s);
    r.difference = r.f_exact - r.f_tba;
    rows.push_back(r);
  }
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out = "T,f_exact,f_tba,difference\n";
  for (const auto& r : rows) {
    out += format_number(r.temperature) + ',' + format_number(r.f_exact) + ',' + format_number(r.f_tba) + ',' +
           format_number(r.difference) + '\n';
  }
  return out;
}

std::vector<std::vector<cplx>> parse_seeds(const std::string& spec, int sites, int sector) {
  if (sites < 1 || sites > 8) throw SizeGuardError("bethe: N must lie in [1, 8]");
  if (sector < 0 || sector > sites) throw UsageError("bethe: sector must lie in [0, N]");
  std::vector<std::vector<cplx>> seeds;
  if (spec == "auto") {
    const auto singles = single_roots(sites);
    if (sector == 0) return {{}};
    if (sector == 1) {
      for (double r : singles) seeds.push_back({r});
      return seeds;
    }
    // Real seeds from distinct single roots, plus complex pairs for n = 2.
    std::vector<int> pick(static_cast<std::size_t>(sector));
    for (int i = 0; i < sector; ++i) pick[static_cast<std::size_t>(i)] = i;
    const int n = static_cast<int>(singles.size());
    while (sector <= n && seeds.size() < 64) {
      std::vector<cplx> s;
      for (int i : pick) s.emplace_back(singles[static_cast<std::size_t>(i)]);
      seeds.push_back(s);
      int i = sector - 1;
      while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - sector + i) --i;
      if (i < 0) break;
      ++pick[static_cast<std::size_t>(i)];
      for (int k = i + 1; k < sector; ++k) pick[static_cast<std::size_t>(k)] = pick[static_cast<std::size_t>(k - 1)] + 1;
    }
    if (sector == 2) {
      for (double x : {0.0, 0.5, 1.0, 1.6, -0.5, -1.0, -1.6}) {
        for (double y : {0.5, 0.65}) seeds.push_back({cplx(x, y), cplx(x, -y)});
      }
    }
    return seeds;
  }
  std::stringstream sets(spec);
  std::string set;
  while (std::getline(sets, set, ';')) {
    std::vector<cplx> roots;
    std::stringstream items(set);
    std::string item;
    while (std::getline(items, item, ',')) roots.push_back(parse_complex(item));
    if (static_cast<int>(roots.size()) != sector) {
      throw UsageError("seeds: '" + set + "' has " + std::to_string(roots.size()) + " roots, sector is " +
                       std::to_string(sector));
    }
    seeds.push_back(std::move(roots));
  }
  if (seeds.empty()) throw UsageError("seeds: none given");
  return seeds;
}

BetheReport run_bethe(int sites, int sector, double coupling, const std::vector<std::vector<cplx>>& seeds) {
  if (sites < 1 || sites > 8) throw SizeGuardError("bethe: N must lie in [1, 8]");
  BetheReport report{sites, sector, coupling, {}, {}};
  const auto spec = shared_cache().get(sites, coupling);
  for (const auto& seed : seeds) {
    try {
      const BetheSolution sol = solve_bae_newton(BetheState(sites, seed));
      BetheRecord rec;
      rec.roots = sorted_roots(sol.state.roots());
      rec.residual = sol.log_residual;
      rec.iterations = sol.iterations;
      const bool seen = std::any_of(report.solutions.begin(), report.solutions.end(), [&](const BetheRecord& r) {
        return max_distance(r.roots, rec.roots) < 1e-8;
      });
      if (seen) continue;
      rec.spectrum_distance = std::numeric_limits<double>::infinity();
      try {
        rec.energy = energy_from_roots(sol.state, coupling);
        for (double x : spec->eigenvalues) rec.spectrum_distance = std::min(rec.spectrum_distance, std::abs(x - *rec.energy));
      } catch (const NumericalError&) {
      }
      report.solutions.push_back(std::move(rec));
    } catch (const std::exception& e) {
      report.failures.push_back({seed, e.what()});
    }
  }
  return report;
}

std::string bethe_json(const BetheReport& report) {
  json sols = json::array();
  for (const auto& s : report.solutions) {
    sols.push_back({{"roots", complex_list(s.roots)},
                    {"energy", s.energy ? number_or_null(*s.energy) : json(nullptr)},
                    {"residual", number_or_null(s.residual)},
                    {"iterations", s.iterations},
                    {"spectrum_distance", number_or_null(s.spectrum_distance)}});
  }
  json fails = json::array();
  for (const auto& f : report.failures) fails.push_back({{"seed", complex_list(f.seed)}, {"message", f.message}});
  const json out = {{"N", report.sites},
                    {"n", report.sector},
                    {"J", rounded(report.coupling)},
                    {"solutions", sols},
                    {"failures", fails}};
  return out.dump(2) + '\n';
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Free energy of the osp(1|2) chain from the thermodynamic Bethe ansatz", "osptba"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<double> j_flag;
  std::optional<double> tmin;
  std::optional<double> tmax;
  std::optional<int> steps;
  std::optional<int> mtrunc;
  std::string out_path;
  std::string format;
  auto* sweep = app.add_subcommand("sweep", "TBA free energy, energy and entropy over temperatures (CSV or JSON)");
  sweep->add_option("--config", config_path, "JSON run configuration");
  sweep->add_option("--J", j_flag, "coupling J");
  sweep->add_option("--tmin", tmin, "lowest temperature");
  sweep->add_option("--tmax", tmax, "highest temperature");
  sweep->add_option("--steps", steps, "number of temperatures");
  sweep->add_option("--mtrunc", mtrunc, "string truncation M");
  sweep->add_option("--out", out_path, "output file (default: standard output)");
  sweep->add_option("--format", format, "csv or json");

  app.add_subcommand("validate", "run the invariant suite and print a pass/fail table");

  int n_sites = 0;
  double j_compare = -1.0;
  std::vector<double> temps;
  auto* compare = app.add_subcommand("compare", "exact-diagonalization vs TBA free energy");
  compare->add_option("--N", n_sites, "chain length")->required();
  compare->add_option("--J", j_compare, "coupling J");
  compare->add_option("--temps", temps, "comma-separated temperatures")->required()->delimiter(',');
  compare->add_option("--mtrunc", mtrunc, "string truncation M");
  compare->add_option("--out", out_path, "output file (default: standard output)");

  int sector = 0;
  double j_bethe = 1.0;
  std::string seeds = "auto";
  auto* bethe = app.add_subcommand("bethe", "solve the Bethe equations from seeds (JSON)");
  bethe->add_option("--N", n_sites, "chain length")->required();
  bethe->add_option("--sector", sector, "number of roots n")->required();
  bethe->add_option("--seeds", seeds, "'auto' or seed sets 'a,b+ci;...'");
  bethe->add_option("--J", j_bethe, "coupling J");
  bethe->add_option("--out", out_path, "output file (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sweep) {
      RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
      if (j_flag) config.coupling = *j_flag;
      if (mtrunc) config.truncation = *mtrunc;
      if (!out_path.empty()) config.output = out_path;
      if (!format.empty()) config.format = format;
      if (tmin || tmax || steps) {
        TemperatureRange r = config.range.value_or(TemperatureRange{});
        if (tmin) r.min = *tmin;
        if (tmax) r.max = *tmax;
        if (steps) r.steps = *steps;
        if (!tmax && !config.range) r.max = r.min;
        config.range = r;
        config.temperatures.clear();
      }
      config.validate();
      const auto rows = run_sweep(config, worker_limit());
      write_output(config.output, config.format == "json" ? sweep_json(rows) : sweep_csv(rows), out);
      bool ok = true;
      for (const auto& r : rows) {
        if (!r.ok) {
          ok = false;
          err << "T=" << format_number(r.temperature) << ": " << r.error << '\n';
        }
      }
      return ok ? kExitOk : kExitNumeric;
    }
    if (app.got_subcommand("validate")) {
      const auto checks = validation_suite();
      out << check_table(checks);
      const bool ok = std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
      return ok ? kExitOk : kExitNumeric;
    }
    if (*compare) {
      RunConfig config;
      config.coupling = j_compare;
      if (mtrunc) config.truncation = *mtrunc;
      config.validate();
      write_output(out_path, compare_csv(run_compare(n_sites, j_compare, temps, config)), out);
      return kExitOk;
    }
    if (*bethe) {
      const auto seed_sets = parse_seeds(seeds, n_sites, sector);
      write_output(out_path, bethe_json(run_bethe(n_sites, sector, j_bethe, seed_sets)), out);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SizeGuardError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return kExitUsage;
}

}  // namespace osptba::cli
