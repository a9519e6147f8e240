#pragma once

// Graded R-matrix, Temperley-Lieb generator, Hamiltonian and transfer matrix
// of the osp(1|2) chain on the 3-dimensional graded space.
//
// Basis labels a = 1, 2, 3 are stored as indices 0, 1, 2. A multi-index
// (a_1, ..., a_k) maps to the flat index sum_i a_i 3^(k-i), so the first
// tensor factor is the most significant digit. For a two-space operator X the
// element X_{ab}^{cd} lives at row (c,d) and column (a,b): X sends |a b> to
// sum_{cd} X_{ab}^{cd} |c d>.

#include <array>
#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace osptba {

using cplx = std::complex<double>;

// Z2 grading of the basis: p(1) = p(3) = 1 (fermionic), p(2) = 0 (bosonic).
struct Grading {
  static constexpr std::array<int, 3> parity{1, 0, 1};

  // a is a zero-based basis index.
  static constexpr int of(int a) { return parity.at(static_cast<std::size_t>(a)); }
};

// Dense complex matrix on (C^3)^{⊗k}. The dimension is always 3^k.
class GradedMatrix {
 public:
  explicit GradedMatrix(int spaces);
  GradedMatrix(int spaces, Eigen::MatrixXcd entries);

  static GradedMatrix identity(int spaces);

  int spaces() const noexcept { return spaces_; }
  Eigen::Index dimension() const noexcept { return entries_.rows(); }

  const Eigen::MatrixXcd& entries() const noexcept { return entries_; }
  Eigen::MatrixXcd& entries() noexcept { return entries_; }

  cplx operator()(Eigen::Index row, Eigen::Index col) const { return entries_(row, col); }
  cplx& operator()(Eigen::Index row, Eigen::Index col) { return entries_(row, col); }

  // Two-space element X_{ab}^{cd} with one-based labels as written on paper.
  cplx element(int a, int b, int c, int d) const;

  GradedMatrix operator*(const GradedMatrix& rhs) const;
  GradedMatrix operator+(const GradedMatrix& rhs) const;
  GradedMatrix operator-(const GradedMatrix& rhs) const;
  GradedMatrix operator*(cplx scale) const;

  // Plain Kronecker product; the spaces of *this come first.
  GradedMatrix kron(const GradedMatrix& rhs) const;

  double max_abs() const;

 private:
  int spaces_;
  Eigen::MatrixXcd entries_;
};

// alpha = ((0,0,1),(0,1,0),(-1,0,0)) and its exact inverse (= alpha^T).
GradedMatrix build_alpha();
GradedMatrix build_alpha_inverse();

// (P^g)_{ab}^{cd} = (-1)^{p(a)p(b)} δ_{a,d} δ_{b,c}.
GradedMatrix build_graded_permutation();

// Ungraded permutation P_{ab}^{cd} = δ_{a,d} δ_{b,c}.
GradedMatrix build_permutation();

// (E^g)_{ab}^{cd} = alpha_{ab} (alpha^{-1})_{cd}; satisfies E^2 = -E.
GradedMatrix build_E();

// Ř(u) = I + u P^g - u/(u - 3/2) E^g. Throws PoleError at u = 3/2.
GradedMatrix build_R_check(cplx u);

// Max-norm residual of the braid-form graded Yang-Baxter equation
//   Ř12(u) Ř23(u+v) Ř12(v) = Ř23(v) Ř12(u+v) Ř23(u)
// with Ř12 = Ř⊗I and Ř23 = I⊗Ř (Ř is parity-even, so the graded embedding
// coincides with the Kronecker one).
double check_graded_ybe(double u, double v);

// Local bond term h = P^g + (2/3) E^g.
GradedMatrix build_bond_hamiltonian();

inline constexpr int kDenseHamiltonianMaxSites = 7;
inline constexpr int kTransferMatrixMaxSites = 8;

// H = J sum_{j=1}^{N} (P^g + 2/3 E^g)_{j,j+1} with site N+1 ≡ 1. The bond
// (N,1) is embedded with site N as the first factor; no string signs.
GradedMatrix build_hamiltonian(int sites, double coupling);

// T(u) = tr_a[R_{aN}(iu) ... R_{a1}(iu)], R = P Ř, ordinary trace.
// Its eigenvalues equal i^N times the dressed vacuum form in bethe.hpp.
GradedMatrix build_transfer_matrix(double u, int sites);

}  // namespace osptba
