#include "osptba/algebra.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "osptba/errors.hpp"

namespace osptba {
namespace {

Eigen::Index pow3(int k) {
  Eigen::Index d = 1;
  for (int i = 0; i < k; ++i) d *= 3;
  return d;
}

int two_index(int a, int b) { return 3 * a + b; }

// Digit of site j (zero-based, site 0 most significant) in a flat index.
int digit(Eigen::Index state, int site, int sites) {
  Eigen::Index s = state;
  for (int k = sites - 1; k > site; --k) s /= 3;
  return static_cast<int>(s % 3);
}

}  // namespace

GradedMatrix::GradedMatrix(int spaces)
    : spaces_(spaces), entries_(Eigen::MatrixXcd::Zero(pow3(spaces), pow3(spaces))) {
  if (spaces < 1) throw SizeGuardError("GradedMatrix needs at least one space");
}

GradedMatrix::GradedMatrix(int spaces, Eigen::MatrixXcd entries)
    : spaces_(spaces), entries_(std::move(entries)) {
  if (spaces < 1) throw SizeGuardError("GradedMatrix needs at least one space");
  if (entries_.rows() != pow3(spaces) || entries_.cols() != pow3(spaces)) {
    throw SizeGuardError("GradedMatrix dimension must be 3^" + std::to_string(spaces));
  }
}

GradedMatrix GradedMatrix::identity(int spaces) {
  GradedMatrix m(spaces);
  m.entries_.setIdentity();
  return m;
}

cplx GradedMatrix::element(int a, int b, int c, int d) const {
  if (spaces_ != 2) throw SizeGuardError("element(a,b,c,d) needs a two-space operator");
  return entries_(two_index(c - 1, d - 1), two_index(a - 1, b - 1));
}

GradedMatrix GradedMatrix::operator*(const GradedMatrix& rhs) const {
  if (spaces_ != rhs.spaces_) throw SizeGuardError("GradedMatrix product: space mismatch");
  return GradedMatrix(spaces_, entries_ * rhs.entries_);
}

GradedMatrix GradedMatrix::operator+(const GradedMatrix& rhs) const {
  if (spaces_ != rhs.spaces_) throw SizeGuardError("GradedMatrix sum: space mismatch");
  return GradedMatrix(spaces_, entries_ + rhs.entries_);
}

GradedMatrix GradedMatrix::operator-(const GradedMatrix& rhs) const {
  if (spaces_ != rhs.spaces_) throw SizeGuardError("GradedMatrix difference: space mismatch");
  return GradedMatrix(spaces_, entries_ - rhs.entries_);
}

GradedMatrix GradedMatrix::operator*(cplx scale) const {
  return GradedMatrix(spaces_, entries_ * scale);
}

GradedMatrix GradedMatrix::kron(const GradedMatrix& rhs) const {
  const Eigen::Index n = dimension();
  const Eigen::Index m = rhs.dimension();
  Eigen::MatrixXcd out(n * m, n * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      out.block(i * m, j * m, m, m) = entries_(i, j) * rhs.entries_;
    }
  }
  return GradedMatrix(spaces_ + rhs.spaces_, std::move(out));
}

double GradedMatrix::max_abs() const {
  return entries_.size() == 0 ? 0.0 : entries_.cwiseAbs().maxCoeff();
}

GradedMatrix build_alpha() {
  GradedMatrix a(1);
  a(0, 2) = 1.0;
  a(1, 1) = 1.0;
  a(2, 0) = -1.0;
  return a;
}

GradedMatrix build_alpha_inverse() {
  GradedMatrix a(1);
  a(0, 2) = -1.0;
  a(1, 1) = 1.0;
  a(2, 0) = 1.0;
  return a;
}

GradedMatrix build_graded_permutation() {
  GradedMatrix p(2);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const double sign = (Grading::of(a) * Grading::of(b)) % 2 == 0 ? 1.0 : -1.0;
      // (c,d) = (b,a)
      p(two_index(b, a), two_index(a, b)) = sign;
    }
  }
  return p;
}

GradedMatrix build_permutation() {
  GradedMatrix p(2);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) p(two_index(b, a), two_index(a, b)) = 1.0;
  }
  return p;
}

GradedMatrix build_E() {
  const GradedMatrix alpha = build_alpha();
  const GradedMatrix alpha_inv = build_alpha_inverse();
  GradedMatrix e(2);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d)
          e(two_index(c, d), two_index(a, b)) = alpha(a, b) * alpha_inv(c, d);
  return e;
}

GradedMatrix build_R_check(cplx u) {
  const cplx pole = 1.5;
  if (std::abs(u - pole) < 1e-12) throw PoleError("Ř(u) has a pole at u = 3/2");
  const cplx e_coeff = -u / (u - pole);
  return GradedMatrix::identity(2) + build_graded_permutation() * u + build_E() * e_coeff;
}

double check_graded_ybe(double u, double v) {
  const GradedMatrix id = GradedMatrix::identity(1);
  auto r12 = [&](double x) { return build_R_check(x).kron(id); };
  auto r23 = [&](double x) { return id.kron(build_R_check(x)); };
  const GradedMatrix lhs = r12(u) * r23(u + v) * r12(v);
  const GradedMatrix rhs = r23(v) * r12(u + v) * r23(u);
  return (lhs - rhs).max_abs();
}

GradedMatrix build_bond_hamiltonian() {
  return build_graded_permutation() + build_E() * cplx(2.0 / 3.0);
}

GradedMatrix build_hamiltonian(int sites, double coupling) {
  if (sites < 2 || sites > kDenseHamiltonianMaxSites) {
    throw SizeGuardError("build_hamiltonian: need 2 <= N <= " +
                         std::to_string(kDenseHamiltonianMaxSites));
  }
  const GradedMatrix bond = build_bond_hamiltonian();
  GradedMatrix h(sites);
  const Eigen::Index dim = h.dimension();

  std::vector<Eigen::Index> place(static_cast<std::size_t>(sites));
  for (int j = 0; j < sites; ++j) place[static_cast<std::size_t>(j)] = pow3(sites - 1 - j);

  for (Eigen::Index col = 0; col < dim; ++col) {
    for (int j = 0; j < sites; ++j) {
      const int k = (j + 1) % sites;
      const int a = digit(col, j, sites);
      const int b = digit(col, k, sites);
      const Eigen::Index base =
          col - a * place[static_cast<std::size_t>(j)] - b * place[static_cast<std::size_t>(k)];
      for (int c = 0; c < 3; ++c) {
        for (int d = 0; d < 3; ++d) {
          const cplx amp = bond(two_index(c, d), two_index(a, b));
          if (amp == cplx(0.0)) continue;
          const Eigen::Index row =
              base + c * place[static_cast<std::size_t>(j)] + d * place[static_cast<std::size_t>(k)];
          h(row, col) += coupling * amp;
        }
      }
    }
  }
  return h;
}

GradedMatrix build_transfer_matrix(double u, int sites) {
  if (sites < 1 || sites > kTransferMatrixMaxSites) {
    throw SizeGuardError("build_transfer_matrix: need 1 <= N <= " +
                         std::to_string(kTransferMatrixMaxSites));
  }
  const GradedMatrix r = build_permutation() * build_R_check(cplx(0.0, u));

  // Auxiliary-space blocks: lax[s_out][s_in](a_out, a_in) = R_{(a_out,s_out),(a_in,s_in)}.
  using Mat3 = Eigen::Matrix3cd;
  std::array<std::array<Mat3, 3>, 3> lax{};
  std::array<std::array<bool, 3>, 3> nonzero{};
  for (int so = 0; so < 3; ++so) {
    for (int si = 0; si < 3; ++si) {
      Mat3& block = lax[static_cast<std::size_t>(so)][static_cast<std::size_t>(si)];
      for (int ao = 0; ao < 3; ++ao)
        for (int ai = 0; ai < 3; ++ai) block(ao, ai) = r(two_index(ao, so), two_index(ai, si));
      nonzero[static_cast<std::size_t>(so)][static_cast<std::size_t>(si)] = block.cwiseAbs().maxCoeff() > 0.0;
    }
  }

  GradedMatrix t(sites);
  const Eigen::Index dim = t.dimension();
  std::vector<int> in_digits(static_cast<std::size_t>(sites));

  // Depth-first walk over outgoing digits, carrying L_j ... L_1.
  for (Eigen::Index col = 0; col < dim; ++col) {
    for (int j = 0; j < sites; ++j) in_digits[static_cast<std::size_t>(j)] = digit(col, j, sites);

    auto walk = [&](auto&& self, int site, const Mat3& product, Eigen::Index row_prefix) -> void {
      if (site == sites) {
        t(row_prefix, col) += product.trace();
        return;
      }
      const int si = in_digits[static_cast<std::size_t>(site)];
      for (int so = 0; so < 3; ++so) {
        if (!nonzero[static_cast<std::size_t>(so)][static_cast<std::size_t>(si)]) continue;
        const Mat3 next = lax[static_cast<std::size_t>(so)][static_cast<std::size_t>(si)] * product;
        if (next.cwiseAbs().maxCoeff() == 0.0) continue;
        self(self, site + 1, next, row_prefix * 3 + so);
      }
    };
    walk(walk, 0, Mat3::Identity(), 0);
  }
  return t;
}

}  // namespace osptba
