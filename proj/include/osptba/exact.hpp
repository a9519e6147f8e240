#pragma once

// Exact-diagonalization oracle for the periodic osp(1|2) chain.
//
// The Hamiltonian is real but not symmetric, so spectra come from a general
// eigensolver. The total charge (#label1 - #label3) is conserved; each
// charge block is diagonalized separately.

#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

namespace osptba {

inline constexpr int kExactMaxSites = 10;

struct SpectrumResult {
  std::vector<double> eigenvalues;  // ascending, length 3^N
  int sites = 0;
  double coupling = 0.0;
  double max_imaginary = 0.0;  // largest |Im λ| seen before truncation to real
};

struct ExactThermo {
  double free_energy = 0.0;  // per site
  double energy = 0.0;       // per site
  double entropy = 0.0;      // per site
};

// Full real spectrum of build_hamiltonian(N, J). Requires 2 <= N <= 10.
SpectrumResult spectrum(int sites, double coupling);

// f = -(T/N) ln sum_k exp(-E_k/T), max-shifted. k_B = 1.
double free_energy_exact(const SpectrumResult& spec, double temperature);
double free_energy_exact(int sites, double coupling, double temperature);

// f, <E>/N and S/N from the Boltzmann weights of one spectrum.
ExactThermo thermo_exact(const SpectrumResult& spec, double temperature);

// Minimum eigenvalue divided by N.
double ground_energy(int sites, double coupling);

// Thread-safe store of spectra keyed by (N, J). Entries are immutable once
// inserted.
class SpectrumCache {
 public:
  std::shared_ptr<const SpectrumResult> get(int sites, double coupling);

 private:
  std::mutex mutex_;
  std::map<std::pair<int, double>, std::shared_ptr<const SpectrumResult>> store_;
};

}  // namespace osptba
