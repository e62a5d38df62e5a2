#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracle.hpp"
#include "qperturb/errors.hpp"
#include "qperturb/pauli.hpp"

using namespace qperturb;

namespace {

const std::array<double, 4> kBaselineC = {1.0, 0.996, 0.4, -0.4};

double max_entry_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

PauliCoefficients random_eta(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  PauliCoefficients e;
  for (std::size_t k = 0; k < 16; ++k) e.flat(k) = g(rng);
  return e;
}

}  // namespace

TEST_CASE("Pauli product basis is orthonormal") {
  for (std::size_t a = 0; a < 16; ++a)
    for (std::size_t b = 0; b < 16; ++b) {
      const ComplexMatrix prod = pauli_product(a / 4, a % 4) * pauli_product(b / 4, b % 4);
      const Complex ip = 0.25 * prod.trace();
      CHECK(std::abs(ip - Complex(a == b ? 1.0 : 0.0)) < 1e-15);
    }
}

TEST_CASE("projection of known operators") {
  const auto st = bell_diagonal_state(kBaselineC);
  const PauliCoefficients eta = pauli_project(st.rho0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(eta(i, j) - (i == j ? 0.5 * kBaselineC[i] : 0.0)) < 1e-14);

  const PauliCoefficients mixed = pauli_project(0.25 * HermitianOperator::identity(4));
  CHECK(mixed(0, 0) == doctest::Approx(0.5));
  for (std::size_t k = 1; k < 16; ++k) CHECK(mixed.flat(k) == 0.0);
}

TEST_CASE("reconstruction of known coefficients") {
  CHECK(pauli_reconstruct(PauliCoefficients{}).matrix().frobenius_norm() == 0.0);
  PauliCoefficients e;
  e(0, 0) = 0.5;
  CHECK(max_entry_diff(pauli_reconstruct(e).matrix(), (0.25 * HermitianOperator::identity(4)).matrix()) < 1e-16);

  // Bell-diagonal matrix layout from the amplitudes.
  PauliCoefficients c;
  for (std::size_t i = 0; i < 4; ++i) c(i, i) = 0.5 * kBaselineC[i];
  const HermitianOperator rho = pauli_reconstruct(c);
  const auto spec = make_bell_spec(kBaselineC);
  const double a2 = spec.a * spec.a, b2 = spec.b * spec.b, c2 = spec.c * spec.c, d2 = spec.d * spec.d;
  CHECK(rho(0, 0).real() == doctest::Approx((a2 + b2) / 2).epsilon(1e-14));
  CHECK(rho(0, 3).real() == doctest::Approx((b2 - a2) / 2).epsilon(1e-14));
  CHECK(rho(1, 1).real() == doctest::Approx((c2 + d2) / 2).epsilon(1e-14));
  CHECK(rho(1, 2).real() == doctest::Approx((c2 - d2) / 2).epsilon(1e-14));
  CHECK(std::abs(rho(0, 1)) < 1e-16);
}

TEST_CASE("projection and reconstruction round-trip and preserve the norm") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const PauliCoefficients eta = random_eta(rng);
    const PauliCoefficients back = pauli_project(pauli_reconstruct(eta));
    for (std::size_t k = 0; k < 16; ++k) CHECK(std::abs(back.flat(k) - eta.flat(k)) < 1e-12);

    const HermitianOperator h = oracle::random_hermitian(rng);
    const HermitianOperator h2 = pauli_reconstruct(pauli_project(h));
    CHECK(max_entry_diff(h.matrix(), h2.matrix()) < 1e-12);
    const double hs = trace_product(h, h);
    const double n = pauli_project(h).norm();
    CHECK(std::abs(hs - n * n) < 1e-12 * std::max(1.0, hs));
  }
}

TEST_CASE("Bell-diagonal amplitudes of the reference coefficients") {
  const auto spec = make_bell_spec(kBaselineC);
  CHECK(spec.a == doctest::Approx(0.0316).epsilon(5e-3));
  CHECK(spec.b == doctest::Approx(0.5468).epsilon(1e-4));
  CHECK(spec.c == doctest::Approx(0.8361).epsilon(1e-4));
  CHECK(spec.d == doctest::Approx(0.0316).epsilon(5e-3));
  CHECK(std::abs(spec.a * spec.a + spec.b * spec.b + spec.c * spec.c + spec.d * spec.d - 1.0) < 1e-12);
}

TEST_CASE("Bell-diagonal limits") {
  const auto mixed = bell_diagonal_state({1, 0, 0, 0});
  CHECK(max_entry_diff(mixed.rho0.matrix(), (0.25 * HermitianOperator::identity(4)).matrix()) < 1e-15);

  const auto phi = bell_diagonal_state({1, 1, -1, 1});
  CHECK(max_entry_diff(phi.rho0.matrix(), bell_projector(BellLabel::PhiPlus).matrix()) < 1e-15);
  CHECK(phi.spec.b == doctest::Approx(1.0));
  CHECK(phi.spec.a == 0.0);
  CHECK(phi.spec.c == 0.0);
  CHECK(phi.spec.d == 0.0);
}

TEST_CASE("invalid Bell coefficients are rejected") {
  CHECK_THROWS_AS(make_bell_spec({0.9, 0, 0, 0}), InvalidBellCoefficients);
  CHECK_THROWS_AS(make_bell_spec({1, 1, 1, 1}), InvalidBellCoefficients);
  CHECK_THROWS_AS(make_bell_spec({1, 0.5, 0.5, 0.5}), InvalidBellCoefficients);
}

TEST_CASE("spectrum of a Bell-diagonal state is the squared amplitudes") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    const auto spec = random_bell_diagonal(rng);
    const auto st = bell_diagonal_state(spec.coefficients);
    std::array<double, 4> sq = {spec.a * spec.a, spec.b * spec.b, spec.c * spec.c, spec.d * spec.d};
    std::sort(sq.begin(), sq.end());
    const auto ev = oracle::eigenvalues(st.rho0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(ev[i] - sq[i]) < 1e-12);
    // Each amplitude belongs to its Bell projector.
    CHECK(trace_product(st.rho0, bell_projector(BellLabel::PhiMinus)) == doctest::Approx(spec.a * spec.a));
    CHECK(trace_product(st.rho0, bell_projector(BellLabel::PhiPlus)) == doctest::Approx(spec.b * spec.b));
    CHECK(trace_product(st.rho0, bell_projector(BellLabel::PsiPlus)) == doctest::Approx(spec.c * spec.c));
    CHECK(trace_product(st.rho0, bell_projector(BellLabel::PsiMinus)) == doctest::Approx(spec.d * spec.d));
  }
}

TEST_CASE("closed-form Bell-diagonal square root") {
  const auto root = bell_diagonal_sqrt(make_bell_spec(kBaselineC));
  CHECK(root.eta0(0, 0) == doctest::Approx(0.7231).epsilon(1e-4));
  CHECK(root.eta0(1, 1) == doctest::Approx(0.6598).epsilon(1e-4));
  CHECK(root.eta0(2, 2) == doctest::Approx(0.1446).epsilon(1e-3));
  CHECK(root.eta0(3, 3) == doctest::Approx(-0.1446).epsilon(1e-3));
  CHECK(root.eta0.norm() == doctest::Approx(1.0).epsilon(1e-14));

  const auto mixed = bell_diagonal_sqrt(make_bell_spec({1, 0, 0, 0}));
  CHECK(max_entry_diff(mixed.gamma0.matrix(), (0.5 * HermitianOperator::identity(4)).matrix()) < 1e-15);
  CHECK(mixed.eta0(0, 0) == doctest::Approx(1.0));

  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const auto spec = random_bell_diagonal(rng);
    const auto st = bell_diagonal_state(spec.coefficients);
    const auto r = bell_diagonal_sqrt(spec);
    const oracle::Mat ref = oracle::sqrtm(oracle::to_eigen(st.rho0));
    CHECK(oracle::max_abs_diff(oracle::to_eigen(r.gamma0), ref) < 1e-7);
    CHECK(max_entry_diff(r.gamma0.matrix(), matrix_sqrt_psd(st.rho0).matrix()) < 1e-10);
  }
}

TEST_CASE("amplitude normalization") {
  const auto eq = bell_spec_from_amplitudes({1, 1, 1, 1});
  CHECK(eq.a == doctest::Approx(0.5));
  CHECK(eq.d == doctest::Approx(0.5));
  CHECK(eq.coefficients[0] == 1.0);
  for (std::size_t i = 1; i < 4; ++i) CHECK(std::abs(eq.coefficients[i]) < 1e-15);

  const auto phi = bell_spec_from_amplitudes({0, 1, 0, 0});
  CHECK(phi.coefficients[1] == doctest::Approx(1.0));
  CHECK(phi.coefficients[2] == doctest::Approx(-1.0));
  CHECK(phi.coefficients[3] == doctest::Approx(1.0));

  // Signs of raw draws do not matter.
  const auto s1 = bell_spec_from_amplitudes({0.3, -0.2, 0.7, -0.1});
  const auto s2 = bell_spec_from_amplitudes({-0.3, 0.2, -0.7, 0.1});
  CHECK(s1.coefficients == s2.coefficients);

  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto spec = random_bell_diagonal(rng);
    CHECK_NOTHROW(make_bell_spec(spec.coefficients));
    CHECK(std::abs(spec.a * spec.a + spec.b * spec.b + spec.c * spec.c + spec.d * spec.d - 1.0) < 1e-12);
    CHECK(spec.a >= 0.0);
  }
}

TEST_CASE("qubit Hamiltonian") {
  const double f = 1.0 / (2.0 * std::numbers::pi);
  const auto h = build_hamiltonian(f, f);
  const std::array<double, 4> expect = {-1.0, 0.0, 0.0, 1.0};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(std::abs(h.op(i, j) - Complex(i == j ? expect[i] : 0.0)) < 1e-15);

  const auto manila = build_hamiltonian(4.963, 4.838);
  const double w0 = 2 * std::numbers::pi * 4.963, w1 = 2 * std::numbers::pi * 4.838;
  CHECK(manila.op(0, 0).real() == doctest::Approx(-(w0 + w1) / 2));
  CHECK(manila.op(1, 1).real() == doctest::Approx(-(w0 - w1) / 2));
  CHECK(trace_product(bell_projector(BellLabel::PhiPlus), manila.op) == doctest::Approx(0.0));
  CHECK_THROWS_AS(build_hamiltonian(0.0, 1.0), InvalidArgument);
}
