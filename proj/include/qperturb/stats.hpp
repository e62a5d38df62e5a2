#pragma once

// Ensemble statistics over perturbed samples.

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qperturb/pauli.hpp"

namespace qperturb {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;  ///< sample (n - 1) standard deviation; 0 for n < 2
  std::size_t count = 0;
};

Moments moments(std::span<const double> values);

/// Equal-width density histogram: count_i / (N * width_i), area 1.
struct Histogram {
  std::vector<double> edges;
  std::vector<double> densities;
  std::size_t count = 0;
  bool degenerate = false;  ///< all values equal; one unit-width bin centred on the value

  double area() const;
};

inline constexpr std::size_t kDefaultBins = 30;

Histogram histogram_density(std::span<const double> values, std::size_t bin_count = kDefaultBins);

/// 16x16 matrix indexed by row-major Pauli pairs (4 i + j).
struct CorrelationMatrix {
  static constexpr std::size_t kSize = 16;
  std::array<std::array<double, kSize>, kSize> values{};
  std::array<bool, kSize> degenerate{};  ///< zero-variance variables (correlation reported as 0)

  double operator()(std::size_t a, std::size_t b) const noexcept { return values[a][b]; }
  double& operator()(std::size_t a, std::size_t b) noexcept { return values[a][b]; }
  /// Corr_{i,j;k,l}
  double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const noexcept {
    return values[4 * i + j][4 * k + l];
  }
  bool any_degenerate() const noexcept;
  /// Frobenius norm of the off-diagonal part.
  double off_diagonal_norm() const noexcept;

  /// "eta_ij" labels in row-major order.
  static std::string label(std::size_t index);
};

using SquareMatrix16 = std::array<std::array<double, 16>, 16>;

/// Sample Pearson correlation between the 16 coefficients. Needs >= 3 samples.
CorrelationMatrix pearson_matrix(std::span<const PauliCoefficients> samples);

/// Sample covariance (n - 1) between the 16 coefficients.
SquareMatrix16 covariance_matrix(std::span<const PauliCoefficients> samples);

CorrelationMatrix correlation_from_covariance(const SquareMatrix16& cov);

/// Chi distribution with k degrees of freedom scaled by sigma.
struct ChiReference {
  std::size_t k = 1;
  double sigma = 1.0;
  double mean = 0.0;

  double pdf(double x) const;
  double cdf(double x) const;
};

/// mean = sqrt(2) sigma Gamma((k+1)/2) / Gamma(k/2).
ChiReference chi_reference(std::size_t k, double sigma);

/// Closed-form correlation of eta[gamma_r] under the unit-trace constraint
/// with i.i.d. standard normal eta (linearized at mu = 0). Zero-variance
/// coefficients are flagged and get correlation 0.
CorrelationMatrix analytic_unit_trace_correlation(const PauliCoefficients& eta0);

/// Cov = J Sigma J^T for the unit-trace map eta -> (eta0 + eta) / t_eps,
/// with J evaluated at mu and Sigma = diag(sigma_ij^2).
SquareMatrix16 jacobian_covariance(const PauliCoefficients& eta0, const PauliCoefficients& mu,
                                   const PauliCoefficients& sigma);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool passes(double alpha) const noexcept { return p_value >= alpha; }
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
KsResult ks_test(std::span<const double> values, const std::function<double(double)>& cdf);

/// Asymptotic Kolmogorov survival function with the Stephens small-sample correction.
double kolmogorov_p_value(double statistic, std::size_t n);

/// CDF of N(mean, stddev).
double normal_cdf(double x, double mean, double stddev);

/// Pearson correlation of two equally long series.
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace qperturb
