#include "osptba/exact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include <Eigen/Dense>

#include "osptba/algebra.hpp"
#include "osptba/errors.hpp"

namespace osptba {
namespace {

constexpr double kImaginaryTolerance = 1e-10;

// Charge of one basis index: label 1 -> +1, label 2 -> 0, label 3 -> -1.
int charge_of(int a) { return 1 - a; }

struct Bond {
  int a, b, c, d;
  double amp;
};

// Nonzero entries of the real bond term P^g + (2/3) E^g.
std::vector<Bond> bond_entries() {
  const GradedMatrix bond = build_bond_hamiltonian();
  std::vector<Bond> out;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) {
          const double amp = bond(3 * c + d, 3 * a + b).real();
          if (amp != 0.0) out.push_back({a, b, c, d, amp});
        }
  return out;
}

// Spectrum at J = 1, assembled from the conserved-charge blocks.
SpectrumResult unit_spectrum(int sites) {
  long long dim = 1;
  for (int i = 0; i < sites; ++i) dim *= 3;

  std::vector<long long> place(static_cast<std::size_t>(sites));
  for (int j = 0; j < sites; ++j) {
    long long p = 1;
    for (int k = j + 1; k < sites; ++k) p *= 3;
    place[static_cast<std::size_t>(j)] = p;
  }
  auto digit = [&](long long s, int j) {
    return static_cast<int>((s / place[static_cast<std::size_t>(j)]) % 3);
  };

  std::map<int, std::vector<long long>> blocks;
  for (long long s = 0; s < dim; ++s) {
    int q = 0;
    for (int j = 0; j < sites; ++j) q += charge_of(digit(s, j));
    blocks[q].push_back(s);
  }

  const std::vector<Bond> bonds = bond_entries();
  SpectrumResult result;
  result.sites = sites;
  result.coupling = 1.0;
  result.eigenvalues.reserve(static_cast<std::size_t>(dim));

  for (const auto& [charge, states] : blocks) {
    const auto n = static_cast<Eigen::Index>(states.size());
    std::unordered_map<long long, Eigen::Index> position;
    position.reserve(states.size());
    for (Eigen::Index i = 0; i < n; ++i) position.emplace(states[static_cast<std::size_t>(i)], i);

    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index col = 0; col < n; ++col) {
      const long long s = states[static_cast<std::size_t>(col)];
      for (int j = 0; j < sites; ++j) {
        const int k = (j + 1) % sites;
        const int a = digit(s, j);
        const int b = digit(s, k);
        const long long base = s - a * place[static_cast<std::size_t>(j)] - b * place[static_cast<std::size_t>(k)];
        for (const Bond& e : bonds) {
          if (e.a != a || e.b != b) continue;
          const long long t = base + e.c * place[static_cast<std::size_t>(j)] + e.d * place[static_cast<std::size_t>(k)];
          block(position.at(t), col) += e.amp;
        }
      }
    }

    Eigen::EigenSolver<Eigen::MatrixXd> solver(block, false);
    if (solver.info() != Eigen::Success) {
      throw NumericalError("eigensolver failed in charge block " + std::to_string(charge));
    }
    for (const auto& z : solver.eigenvalues()) {
      result.max_imaginary = std::max(result.max_imaginary, std::abs(z.imag()));
      result.eigenvalues.push_back(z.real());
    }
  }

  if (result.max_imaginary > kImaginaryTolerance) {
    throw NumericalError("spectrum has imaginary parts up to " + std::to_string(result.max_imaginary));
  }
  std::sort(result.eigenvalues.begin(), result.eigenvalues.end());
  return result;
}

SpectrumCache& shared_cache() {
  static SpectrumCache cache;
  return cache;
}

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be positive and finite");
  }
}

}  // namespace

std::shared_ptr<const SpectrumResult> SpectrumCache::get(int sites, double coupling) {
  const std::pair<int, double> key{sites, coupling};
  {
    std::lock_guard lock(mutex_);
    if (auto it = store_.find(key); it != store_.end()) return it->second;
  }
  // Computed outside the lock; a racing duplicate is discarded below.
  auto fresh = std::make_shared<const SpectrumResult>(spectrum(sites, coupling));
  std::lock_guard lock(mutex_);
  return store_.emplace(key, std::move(fresh)).first->second;
}

SpectrumResult spectrum(int sites, double coupling) {
  if (sites < 2 || sites > kExactMaxSites) {
    throw SizeGuardError("spectrum: need 2 <= N <= " + std::to_string(kExactMaxSites));
  }
  // H(J) = J H(1): diagonalize once per N and rescale.
  static std::mutex unit_mutex;
  static std::map<int, std::shared_ptr<const SpectrumResult>> unit_store;
  std::shared_ptr<const SpectrumResult> unit;
  {
    std::lock_guard lock(unit_mutex);
    if (auto it = unit_store.find(sites); it != unit_store.end()) unit = it->second;
  }
  if (!unit) {
    auto fresh = std::make_shared<const SpectrumResult>(unit_spectrum(sites));
    std::lock_guard lock(unit_mutex);
    unit = unit_store.emplace(sites, std::move(fresh)).first->second;
  }

  SpectrumResult out;
  out.sites = sites;
  out.coupling = coupling;
  out.max_imaginary = std::abs(coupling) * unit->max_imaginary;
  out.eigenvalues.reserve(unit->eigenvalues.size());
  for (double e : unit->eigenvalues) out.eigenvalues.push_back(coupling * e);
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  return out;
}

ExactThermo thermo_exact(const SpectrumResult& spec, double temperature) {
  check_temperature(temperature);
  if (spec.eigenvalues.empty()) throw std::invalid_argument("empty spectrum");
  const double e_min = spec.eigenvalues.front();
  double z = 0.0;
  double e_sum = 0.0;
  for (double e : spec.eigenvalues) {
    const double w = std::exp(-(e - e_min) / temperature);
    z += w;
    e_sum += w * e;
  }
  const double n = spec.sites;
  ExactThermo out;
  out.free_energy = (e_min - temperature * std::log(z)) / n;
  out.energy = e_sum / z / n;
  out.entropy = (out.energy - out.free_energy) / temperature;
  return out;
}

double free_energy_exact(const SpectrumResult& spec, double temperature) {
  return thermo_exact(spec, temperature).free_energy;
}

double free_energy_exact(int sites, double coupling, double temperature) {
  check_temperature(temperature);
  return free_energy_exact(*shared_cache().get(sites, coupling), temperature);
}

double ground_energy(int sites, double coupling) {
  const auto spec = shared_cache().get(sites, coupling);
  return spec->eigenvalues.front() / sites;
}

}  // namespace osptba
