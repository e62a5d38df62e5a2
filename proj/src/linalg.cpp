#include "qperturb/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qperturb/errors.hpp"

namespace qperturb {

namespace {

void check_dim(std::size_t dim) {
  if (dim < 2 || dim > ComplexMatrix::kMaxDim) {
    throw DimensionMismatch("unsupported matrix dimension " + std::to_string(dim));
  }
}

void check_same_dim(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()));
  }
}

constexpr int kMaxSweeps = 60;

}  // namespace

ComplexMatrix::ComplexMatrix(std::size_t dim) : dim_(dim) { check_dim(dim); }

ComplexMatrix::ComplexMatrix(std::size_t dim, std::span<const Complex> row_major) : dim_(dim) {
  check_dim(dim);
  if (row_major.size() != dim * dim) {
    throw DimensionMismatch("expected " + std::to_string(dim * dim) + " entries, got " +
                            std::to_string(row_major.size()));
  }
  std::copy(row_major.begin(), row_major.end(), entries_.begin());
}

ComplexMatrix ComplexMatrix::identity(std::size_t dim) {
  ComplexMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const double> values) {
  ComplexMatrix m(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
  ComplexMatrix out(dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) out(i, j) = std::conj((*this)(j, i));
  return out;
}

ComplexMatrix ComplexMatrix::conjugate() const {
  ComplexMatrix out(dim_);
  for (std::size_t i = 0; i < dim_ * dim_; ++i) out.entries_[i] = std::conj(entries_[i]);
  return out;
}

ComplexMatrix ComplexMatrix::transpose() const {
  ComplexMatrix out(dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < dim_; ++j) out(i, j) = (*this)(j, i);
  return out;
}

Complex ComplexMatrix::trace() const noexcept {
  Complex t = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
  return t;
}

double ComplexMatrix::frobenius_norm() const noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < dim_ * dim_; ++i) s += std::norm(entries_[i]);
  return std::sqrt(s);
}

double ComplexMatrix::hermiticity_defect() const noexcept {
  double worst = 0.0;
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = i; j < dim_; ++j)
      worst = std::max(worst, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
  return worst;
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& rhs) {
  check_same_dim(*this, rhs);
  for (std::size_t i = 0; i < dim_ * dim_; ++i) entries_[i] += rhs.entries_[i];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& rhs) {
  check_same_dim(*this, rhs);
  for (std::size_t i = 0; i < dim_ * dim_; ++i) entries_[i] -= rhs.entries_[i];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(Complex scale) noexcept {
  for (std::size_t i = 0; i < dim_ * dim_; ++i) entries_[i] *= scale;
  return *this;
}

ComplexMatrix operator*(const ComplexMatrix& lhs, const ComplexMatrix& rhs) {
  check_same_dim(lhs, rhs);
  const std::size_t n = lhs.dim();
  ComplexMatrix out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const Complex a = lhs(i, k);
      for (std::size_t j = 0; j < n; ++j) out(i, j) += a * rhs(k, j);
    }
  return out;
}

bool ComplexMatrix::operator==(const ComplexMatrix& other) const noexcept {
  return dim_ == other.dim_ &&
         std::equal(entries_.begin(), entries_.begin() + dim_ * dim_, other.entries_.begin());
}

HermitianOperator::HermitianOperator(const ComplexMatrix& matrix) : matrix_(matrix.dim()) {
  const double defect = matrix.hermiticity_defect();
  if (!(defect <= kHermitianTolerance)) {
    throw NotHermitianInput("Hermiticity defect " + std::to_string(defect) + " exceeds tolerance");
  }
  const std::size_t n = matrix.dim();
  for (std::size_t i = 0; i < n; ++i) {
    matrix_(i, i) = matrix(i, i).real();
    for (std::size_t j = i + 1; j < n; ++j) {
      const Complex upper = 0.5 * (matrix(i, j) + std::conj(matrix(j, i)));
      matrix_(i, j) = upper;
      matrix_(j, i) = std::conj(upper);
    }
  }
}

HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b) {
  return HermitianOperator(HermitianOperator::Trusted{}, a.matrix_ + b.matrix_);
}

HermitianOperator operator-(const HermitianOperator& a, const HermitianOperator& b) {
  return HermitianOperator(HermitianOperator::Trusted{}, a.matrix_ - b.matrix_);
}

HermitianOperator operator*(double s, const HermitianOperator& a) {
  return HermitianOperator(HermitianOperator::Trusted{}, a.matrix_ * Complex(s));
}

HermitianOperator EigenDecomposition::apply(const std::function<double(double)>& f) const {
  const std::size_t n = eigenvectors.dim();
  ComplexMatrix out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double fk = f(eigenvalues[k]);
    if (fk == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const Complex vik = eigenvectors(i, k) * fk;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * std::conj(eigenvectors(j, k));
    }
  }
  return HermitianOperator(out);
}

// Cyclic complex Jacobi. Each rotation U = P R first removes the phase of
// A(p,q) with P = diag(1, e^{-i phi}) on (p,q), then applies the real Jacobi
// rotation R that annihilates the (now real) off-diagonal entry.
EigenDecomposition eig_hermitian(const HermitianOperator& input) {
  const std::size_t n = input.dim();
  ComplexMatrix a = input.matrix();
  ComplexMatrix v = ComplexMatrix::identity(n);

  const double scale = a.frobenius_norm();
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += std::norm(a(p, q));
    return std::sqrt(s);
  };

  bool converged = scale == 0.0;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    if (off_norm() <= 1e-16 * scale) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double mag = std::abs(a(p, q));
        if (mag == 0.0) continue;
        const Complex phase = a(p, q) / mag;  // e^{i phi}
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * mag);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        const Complex upp = c;
        const Complex upq = s;
        const Complex uqp = -s * std::conj(phase);
        const Complex uqq = c * std::conj(phase);

        for (std::size_t k = 0; k < n; ++k) {
          const Complex akp = a(k, p);
          const Complex akq = a(k, q);
          a(k, p) = akp * upp + akq * uqp;
          a(k, q) = akp * upq + akq * uqq;
          const Complex vkp = v(k, p);
          const Complex vkq = v(k, q);
          v(k, p) = vkp * upp + vkq * uqp;
          v(k, q) = vkp * upq + vkq * uqq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const Complex apk = a(p, k);
          const Complex aqk = a(q, k);
          a(p, k) = std::conj(upp) * apk + std::conj(uqp) * aqk;
          a(q, k) = std::conj(upq) * apk + std::conj(uqq) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
      }
    }
  }
  if (!converged && off_norm() > 1e-12 * scale) {
    throw ConvergenceError("Jacobi eigensolver did not converge");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });

  EigenDecomposition out{std::vector<double>(n), ComplexMatrix(n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]).real();
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = v(i, order[k]);
  }
  return out;
}

void require_psd(const EigenDecomposition& eig, double window) {
  const double smallest = eig.eigenvalues.front();
  if (smallest < -window) {
    throw NotPositiveSemidefinite("eigenvalue " + std::to_string(smallest) +
                                  " below clamp window");
  }
}

HermitianOperator matrix_sqrt_psd(const EigenDecomposition& eig) {
  require_psd(eig);
  return eig.apply([](double x) { return x > 0.0 ? std::sqrt(x) : 0.0; });
}

HermitianOperator matrix_sqrt_psd(const HermitianOperator& a) {
  return matrix_sqrt_psd(eig_hermitian(a));
}

HermitianOperator matrix_log_ranged(const EigenDecomposition& eig) {
  return eig.apply([](double x) { return x > kKernelThreshold ? std::log(x) : 0.0; });
}

HermitianOperator matrix_log_ranged(const HermitianOperator& a) {
  return matrix_log_ranged(eig_hermitian(a));
}

HermitianOperator range_projector(const EigenDecomposition& eig) {
  return eig.apply([](double x) { return x > kKernelThreshold ? 1.0 : 0.0; });
}

HermitianOperator anticommutator(const HermitianOperator& x, const HermitianOperator& y) {
  const ComplexMatrix xy = x.matrix() * y.matrix();
  // (XY)^dagger = YX for Hermitian X, Y.
  return HermitianOperator(xy + xy.adjoint());
}

ComplexMatrix kron(const ComplexMatrix& x, const ComplexMatrix& y) {
  if (x.dim() != 2 || y.dim() != 2) {
    throw DimensionMismatch("kron supports 2x2 factors only");
  }
  ComplexMatrix out(4);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t l = 0; l < 2; ++l) out(2 * i + k, 2 * j + l) = x(i, j) * y(k, l);
  return out;
}

HermitianOperator partial_trace(const HermitianOperator& rho, Subsystem keep) {
  if (rho.dim() != 4) {
    throw DimensionMismatch("partial_trace expects a 4x4 operator");
  }
  ComplexMatrix out(2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k) {
        if (keep == Subsystem::A) {
          out(i, j) += rho(2 * i + k, 2 * j + k);
        } else {
          out(i, j) += rho(2 * k + i, 2 * k + j);
        }
      }
  return HermitianOperator(out);
}

double trace_product(const HermitianOperator& x, const HermitianOperator& y) {
  if (x.dim() != y.dim()) throw DimensionMismatch("trace_product dimension mismatch");
  const std::size_t n = x.dim();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) s += (x(i, k) * y(k, i)).real();
  return s;
}

}  // namespace qperturb
