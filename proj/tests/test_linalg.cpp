#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracle.hpp"
#include "qperturb/errors.hpp"
#include "qperturb/linalg.hpp"
#include "qperturb/pauli.hpp"

using namespace qperturb;

namespace {

HermitianOperator diag(std::initializer_list<double> v) {
  const std::vector<double> d(v);
  return HermitianOperator(ComplexMatrix::diagonal(d));
}

double max_entry_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

ComplexMatrix reconstruct(const EigenDecomposition& e) {
  ComplexMatrix d = ComplexMatrix::diagonal(e.eigenvalues);
  return e.eigenvectors * d * e.eigenvectors.adjoint();
}

}  // namespace

TEST_CASE("hermitian construction rejects asymmetric input and symmetrizes within tolerance") {
  ComplexMatrix m(2);
  m(0, 1) = Complex(1.0, 1.0);
  m(1, 0) = Complex(1.0, -1.0);
  CHECK_NOTHROW(HermitianOperator{m});
  m(1, 0) = Complex(1.0, -1.0 + 1e-9);
  CHECK_THROWS_AS(HermitianOperator{m}, NotHermitianInput);
  m(1, 0) = Complex(1.0, -1.0 + 1e-13);
  const HermitianOperator h(m);
  CHECK(h.matrix().hermiticity_defect() == 0.0);
  CHECK_THROWS_AS(ComplexMatrix(5), DimensionMismatch);
}

TEST_CASE("eigenvalues of simple operators") {
  const auto id = eig_hermitian(HermitianOperator::identity(4));
  for (double v : id.eigenvalues) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));

  const auto x = eig_hermitian(HermitianOperator(pauli(1)));
  REQUIRE(x.eigenvalues.size() == 2);
  CHECK(x.eigenvalues[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(x.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("Bell-diagonal baseline spectrum agrees with the characteristic polynomial") {
  const auto st = bell_diagonal_state({1.0, 0.996, 0.4, -0.4});
  const auto e = eig_hermitian(st.rho0);
  const std::array<double, 4> expect = {0.001, 0.001, 0.299, 0.699};
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(e.eigenvalues[i] - expect[i]) < 1e-12);

  // Every computed eigenvalue is a root of det(x I - rho0).
  const auto p = oracle::characteristic_polynomial(oracle::to_eigen(st.rho0));
  for (double lam : e.eigenvalues) CHECK(std::abs(oracle::eval_poly(p, lam)) < 1e-14);
  // Coefficients of the product (x - l_i) match Faddeev-LeVerrier.
  double e1 = 0, e4 = 1;
  for (double l : expect) {
    e1 += l;
    e4 *= l;
  }
  CHECK(std::abs(p[1].real() + e1) < 1e-13);
  CHECK(std::abs(p[4].real() - e4) < 1e-15);
}

TEST_CASE("random Hermitian decompositions reconstruct and match Eigen") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + trial % 3;
    const HermitianOperator a = oracle::random_hermitian(rng, n);
    const auto e = eig_hermitian(a);
    const double scale = a.matrix().frobenius_norm();
    CHECK((reconstruct(e) - a.matrix()).frobenius_norm() <= 1e-10 * scale);
    const ComplexMatrix vv = e.eigenvectors.adjoint() * e.eigenvectors;
    CHECK(max_entry_diff(vv, ComplexMatrix::identity(n)) <= 1e-10);
    CHECK(std::is_sorted(e.eigenvalues.begin(), e.eigenvalues.end()));
    const auto ref = oracle::eigenvalues(a);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(e.eigenvalues[i] - ref[i]) <= 1e-12 * scale);
  }
}

TEST_CASE("degenerate spectra still give an orthonormal eigenbasis") {
  const HermitianOperator p = bell_projector(BellLabel::PsiMinus);
  const auto e = eig_hermitian(p);
  CHECK(max_entry_diff(e.eigenvectors.adjoint() * e.eigenvectors, ComplexMatrix::identity(4)) < 1e-12);
  CHECK(max_entry_diff(reconstruct(e), p.matrix()) < 1e-12);
}

TEST_CASE("PSD square root") {
  CHECK(max_entry_diff(matrix_sqrt_psd(HermitianOperator::identity(4)).matrix(), ComplexMatrix::identity(4)) < 1e-15);
  const HermitianOperator phi = bell_projector(BellLabel::PhiPlus);
  CHECK(max_entry_diff(matrix_sqrt_psd(phi).matrix(), phi.matrix()) < 1e-12);

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const HermitianOperator rho = oracle::random_density(rng, 4, 1 + trial % 4);
    const HermitianOperator g = matrix_sqrt_psd(rho);
    CHECK((g.matrix() * g.matrix() - rho.matrix()).frobenius_norm() < 1e-9);
    for (double v : eig_hermitian(g).eigenvalues) CHECK(v > -1e-12);
    if (trial % 4 == 3) {
      // Full rank: compare with Eigen's Schur-based square root.
      const oracle::Mat ref = oracle::sqrtm(oracle::to_eigen(rho));
      CHECK(oracle::max_abs_diff(oracle::to_eigen(g), ref) < 1e-9);
    }
  }
}

TEST_CASE("PSD square root clamps tiny negatives and rejects larger ones") {
  CHECK_NOTHROW(matrix_sqrt_psd(diag({-5e-11, 0.5, 0.25, 0.25})));
  CHECK(matrix_sqrt_psd(diag({-5e-11, 0.5, 0.25, 0.25}))(0, 0) == Complex(0.0));
  CHECK_THROWS_AS(matrix_sqrt_psd(diag({-1e-8, 0.5, 0.25, 0.25})), NotPositiveSemidefinite);
}

TEST_CASE("range-restricted logarithm") {
  CHECK(matrix_log_ranged(HermitianOperator::identity(4)).matrix().frobenius_norm() < 1e-15);
  const HermitianOperator l = matrix_log_ranged(diag({std::numbers::e, 1.0, 1.0, 1.0}));
  CHECK(l(0, 0).real() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(l.matrix().frobenius_norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(matrix_log_ranged(bell_projector(BellLabel::PhiPlus)).matrix().frobenius_norm() < 1e-12);

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const HermitianOperator rho = oracle::random_density(rng);
    const HermitianOperator log_rho = matrix_log_ranged(rho);
    const oracle::Mat back = oracle::expm(oracle::to_eigen(log_rho));
    CHECK(oracle::max_abs_diff(back, oracle::to_eigen(rho)) < 1e-9);
    CHECK(oracle::max_abs_diff(oracle::to_eigen(log_rho), oracle::logm(oracle::to_eigen(rho))) < 1e-8);
  }
}

TEST_CASE("range projector drops the kernel") {
  const auto e = eig_hermitian(bell_projector(BellLabel::PsiPlus));
  const HermitianOperator b = range_projector(e);
  CHECK(max_entry_diff(b.matrix(), bell_projector(BellLabel::PsiPlus).matrix()) < 1e-12);
  CHECK(range_projector(eig_hermitian(diag({1e-13, 0.5, 0.5, 0.0}))).trace() == doctest::Approx(2.0));
}

TEST_CASE("anticommutators of Pauli matrices") {
  const HermitianOperator i2 = HermitianOperator::identity(2);
  const HermitianOperator x(pauli(1)), y(pauli(2)), z(pauli(3));
  CHECK(max_entry_diff(anticommutator(i2, x).matrix(), (2.0 * x).matrix()) == 0.0);
  CHECK(anticommutator(x, y).matrix().frobenius_norm() == 0.0);
  CHECK(max_entry_diff(anticommutator(z, z).matrix(), (2.0 * i2).matrix()) == 0.0);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = oracle::random_hermitian(rng);
    const auto b = oracle::random_hermitian(rng);
    CHECK(max_entry_diff(anticommutator(a, b).matrix(), anticommutator(b, a).matrix()) < 1e-14);
    const ComplexMatrix direct = a.matrix() * b.matrix() + b.matrix() * a.matrix();
    CHECK(max_entry_diff(anticommutator(a, b).matrix(), direct) < 1e-12);
  }
}

TEST_CASE("Kronecker products") {
  CHECK(kron(ComplexMatrix::identity(2), ComplexMatrix::identity(2)) == ComplexMatrix::identity(4));
  const std::array<double, 4> zi = {1, 1, -1, -1};
  CHECK(kron(pauli(3), pauli(0)) == ComplexMatrix::diagonal(zi));
  const ComplexMatrix xx = kron(pauli(1), pauli(1));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(xx(i, j) == Complex(i + j == 3 ? 1.0 : 0.0));
  CHECK_THROWS_AS(kron(ComplexMatrix(4), ComplexMatrix(2)), DimensionMismatch);
}

TEST_CASE("partial traces") {
  const HermitianOperator phi = bell_projector(BellLabel::PhiPlus);
  const HermitianOperator half = 0.5 * HermitianOperator::identity(2);
  CHECK(max_entry_diff(partial_trace(phi, Subsystem::A).matrix(), half.matrix()) < 1e-15);
  CHECK(max_entry_diff(partial_trace(phi, Subsystem::B).matrix(), half.matrix()) < 1e-15);

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const HermitianOperator ra = oracle::random_density(rng, 2, 2);
    const HermitianOperator rb = oracle::random_density(rng, 2, 1 + trial % 2);
    const HermitianOperator ab(kron(ra.matrix(), rb.matrix()));
    CHECK(max_entry_diff(partial_trace(ab, Subsystem::A).matrix(), ra.matrix()) < 1e-12);
    CHECK(max_entry_diff(partial_trace(ab, Subsystem::B).matrix(), rb.matrix()) < 1e-12);

    const auto spec = random_bell_diagonal(rng);
    const auto st = bell_diagonal_state(spec.coefficients);
    CHECK(max_entry_diff(partial_trace(st.rho0, Subsystem::B).matrix(), half.matrix()) < 1e-12);
  }
}

TEST_CASE("trace product") {
  std::mt19937_64 rng(5);
  const auto a = oracle::random_hermitian(rng);
  const auto b = oracle::random_hermitian(rng);
  const Complex ref = (oracle::to_eigen(a) * oracle::to_eigen(b)).trace();
  CHECK(trace_product(a, b) == doctest::Approx(ref.real()).epsilon(1e-13));
}
