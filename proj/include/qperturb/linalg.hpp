#pragma once

// Dense complex linear algebra for the small operators that appear in
// two-qubit problems (dimension 2, 3 or 4).

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace qperturb {

using Complex = std::complex<double>;

/// Eigenvalues at or below this are treated as the kernel of a PSD operator.
inline constexpr double kKernelThreshold = 1e-12;
/// Eigenvalues in [-kPsdClampWindow, 0) are clamped to zero.
inline constexpr double kPsdClampWindow = 1e-10;
/// Maximum |A(i,j) - conj(A(j,i))| accepted for a Hermitian operator.
inline constexpr double kHermitianTolerance = 1e-12;

/// Square complex matrix of dimension 2, 3 or 4 stored row-major.
class ComplexMatrix {
 public:
  static constexpr std::size_t kMaxDim = 4;

  explicit ComplexMatrix(std::size_t dim);
  ComplexMatrix(std::size_t dim, std::span<const Complex> row_major);

  static ComplexMatrix identity(std::size_t dim);
  static ComplexMatrix diagonal(std::span<const double> values);

  std::size_t dim() const noexcept { return dim_; }

  Complex& operator()(std::size_t row, std::size_t col) noexcept {
    return entries_[row * dim_ + col];
  }
  const Complex& operator()(std::size_t row, std::size_t col) const noexcept {
    return entries_[row * dim_ + col];
  }

  std::span<const Complex> entries() const noexcept {
    return {entries_.data(), dim_ * dim_};
  }

  ComplexMatrix adjoint() const;
  ComplexMatrix conjugate() const;
  ComplexMatrix transpose() const;
  Complex trace() const noexcept;
  double frobenius_norm() const noexcept;
  /// max_{ij} |A(i,j) - conj(A(j,i))|
  double hermiticity_defect() const noexcept;

  ComplexMatrix& operator+=(const ComplexMatrix& rhs);
  ComplexMatrix& operator-=(const ComplexMatrix& rhs);
  ComplexMatrix& operator*=(Complex scale) noexcept;

  friend ComplexMatrix operator+(ComplexMatrix lhs, const ComplexMatrix& rhs) { return lhs += rhs; }
  friend ComplexMatrix operator-(ComplexMatrix lhs, const ComplexMatrix& rhs) { return lhs -= rhs; }
  friend ComplexMatrix operator*(ComplexMatrix lhs, Complex scale) { return lhs *= scale; }
  friend ComplexMatrix operator*(Complex scale, ComplexMatrix rhs) { return rhs *= scale; }
  friend ComplexMatrix operator*(const ComplexMatrix& lhs, const ComplexMatrix& rhs);

  bool operator==(const ComplexMatrix& other) const noexcept;

 private:
  std::size_t dim_;
  std::array<Complex, kMaxDim * kMaxDim> entries_{};
};

/// Hermitian matrix. Construction checks the Hermiticity defect against
/// kHermitianTolerance and stores the exactly symmetrized matrix.
class HermitianOperator {
 public:
  explicit HermitianOperator(const ComplexMatrix& matrix);

  static HermitianOperator identity(std::size_t dim) {
    return HermitianOperator(ComplexMatrix::identity(dim));
  }
  static HermitianOperator zero(std::size_t dim) { return HermitianOperator(ComplexMatrix(dim)); }

  const ComplexMatrix& matrix() const noexcept { return matrix_; }
  std::size_t dim() const noexcept { return matrix_.dim(); }
  const Complex& operator()(std::size_t row, std::size_t col) const noexcept {
    return matrix_(row, col);
  }
  double trace() const noexcept { return matrix_.trace().real(); }

  friend HermitianOperator operator+(const HermitianOperator& a, const HermitianOperator& b);
  friend HermitianOperator operator-(const HermitianOperator& a, const HermitianOperator& b);
  friend HermitianOperator operator*(double s, const HermitianOperator& a);
  friend HermitianOperator operator*(const HermitianOperator& a, double s) { return s * a; }

 private:
  struct Trusted {};
  HermitianOperator(Trusted, ComplexMatrix matrix) : matrix_(std::move(matrix)) {}

  ComplexMatrix matrix_;
};

/// Eigenvalues ascending; eigenvectors are the columns of a unitary matrix.
struct EigenDecomposition {
  std::vector<double> eigenvalues;
  ComplexMatrix eigenvectors;

  /// V diag(f(lambda)) V^dagger
  HermitianOperator apply(const std::function<double(double)>& f) const;
};

EigenDecomposition eig_hermitian(const HermitianOperator& a);

/// Non-negative square root. Eigenvalues in [-kPsdClampWindow, 0) are
/// clamped; anything more negative throws NotPositiveSemidefinite.
HermitianOperator matrix_sqrt_psd(const HermitianOperator& a);
HermitianOperator matrix_sqrt_psd(const EigenDecomposition& eig);

/// B ln A: natural log on eigenvalues above kKernelThreshold, zero on the kernel.
HermitianOperator matrix_log_ranged(const HermitianOperator& a);
HermitianOperator matrix_log_ranged(const EigenDecomposition& eig);

/// Projector onto the eigenspaces with eigenvalue above kKernelThreshold.
HermitianOperator range_projector(const EigenDecomposition& eig);

HermitianOperator anticommutator(const HermitianOperator& x, const HermitianOperator& y);

/// Kronecker product of two 2x2 matrices.
ComplexMatrix kron(const ComplexMatrix& x, const ComplexMatrix& y);

enum class Subsystem { A, B };

/// Reduced 2x2 state of the kept subsystem; basis index is 2*a + b.
HermitianOperator partial_trace(const HermitianOperator& rho, Subsystem keep);

/// Re Tr(XY) for Hermitian X, Y.
double trace_product(const HermitianOperator& x, const HermitianOperator& y);

/// Throws NotPositiveSemidefinite if the smallest eigenvalue is below -window.
void require_psd(const EigenDecomposition& eig, double window = kPsdClampWindow);

}  // namespace qperturb
