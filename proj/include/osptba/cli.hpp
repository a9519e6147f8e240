#pragma once

// Command-line front end: run configuration, the sweep/validate/compare/bethe
// subcommands and their serialized outputs.

#include <complex>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "osptba/tba.hpp"

namespace osptba::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNumeric = 1;
inline constexpr int kExitUsage = 2;

// Bad configuration or arguments (exit code 2).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct TemperatureRange {
  double min = 0.0;
  double max = 0.0;
  int steps = 0;
  bool logarithmic = false;
};

struct RunConfig {
  double coupling = -1.0;  // J
  std::vector<double> temperatures;     // explicit list; wins over range
  std::optional<TemperatureRange> range;
  std::optional<int> truncation;        // M; default depends on T
  double half_extent = 20.0;
  int points = 4096;
  double damping = 0.5;
  double tolerance = 1e-10;
  double tail_tolerance = 1e-3;
  int max_iterations = 5000;
  double gap_tolerance = 1e-4;  // |(e - T s) - f|
  std::string output;           // empty: standard output
  std::string format = "csv";   // csv | json

  // Temperatures in sweep order. Throws UsageError when empty or invalid.
  std::vector<double> resolved_temperatures() const;
  TbaConfig tba_config(double temperature) const;
  void validate() const;
};

// Parses a JSON document; unknown keys are rejected.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::string& path);

// min..max in `steps` points, linear or geometric; steps = 1 gives {min}.
std::vector<double> temperature_grid(const TemperatureRange& range);

// Worker-pool size: OSPTBA_WORKERS if set (>= 1), else the hardware concurrency.
int worker_limit();

// 12 significant digits, "nan"/"inf" for non-finite values.
std::string format_number(double x);

struct SweepRow {
  double temperature = 0.0;
  double coupling = 0.0;
  double free_energy = 0.0;
  double energy = 0.0;
  double entropy = 0.0;
  int iterations = 0;
  double residual = 0.0;
  int truncation = 0;
  bool ok = false;
  std::string error;
};

SweepRow sweep_row(const RunConfig& config, double temperature);
// Rows in temperature order, computed by at most `workers` threads.
std::vector<SweepRow> run_sweep(const RunConfig& config, int workers);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string sweep_json(const std::vector<SweepRow>& rows);

struct CheckResult {
  std::string name;
  double value = 0.0;  // measured deviation
  double tolerance = 0.0;
  bool passed = false;
};

// YBE, kernel normalizations, B B^{-1}, high-T recursion, DVF/spectrum at N = 4,
// Lorentzian semigroup.
std::vector<CheckResult> validation_suite();
std::string check_table(const std::vector<CheckResult>& checks);

struct CompareRow {
  double temperature = 0.0;
  double f_exact = 0.0;
  double f_tba = 0.0;
  double difference = 0.0;  // f_exact - f_tba
};

std::vector<CompareRow> run_compare(int sites, double coupling, const std::vector<double>& temperatures,
                                    const RunConfig& config);
std::string compare_csv(const std::vector<CompareRow>& rows);

struct BetheRecord {
  std::vector<std::complex<double>> roots;  // sorted
  std::optional<double> energy;             // absent when not real
  double residual = 0.0;                    // max |ln LHS - ln RHS|
  int iterations = 0;
  double spectrum_distance = 0.0;  // min |E - eigenvalue of H|
};

struct BetheFailure {
  std::vector<std::complex<double>> seed;
  std::string message;
};

struct BetheReport {
  int sites = 0;
  int sector = 0;
  double coupling = 1.0;
  std::vector<BetheRecord> solutions;  // distinct
  std::vector<BetheFailure> failures;
};

// "auto", or seed sets separated by ';' with roots separated by ',' written as
// a, a+bi, a-bi or bi. Every set must hold `sector` roots.
std::vector<std::vector<std::complex<double>>> parse_seeds(const std::string& spec, int sites, int sector);
BetheReport run_bethe(int sites, int sector, double coupling, const std::vector<std::vector<std::complex<double>>>& seeds);
std::string bethe_json(const BetheReport& report);

// Entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace osptba::cli
