#include "qperturb/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "qperturb/errors.hpp"

namespace qperturb {

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

Moments moments(std::span<const double> values) {
  Moments m;
  m.count = values.size();
  if (values.empty()) return m;
  CompensatedSum sum;
  for (double v : values) sum.add(v);
  m.mean = sum.value() / static_cast<double>(values.size());
  if (values.size() > 1) {
    CompensatedSum sq;
    for (double v : values) sq.add((v - m.mean) * (v - m.mean));
    m.stddev = std::sqrt(sq.value() / static_cast<double>(values.size() - 1));
  }
  return m;
}

double Histogram::area() const {
  CompensatedSum s;
  for (std::size_t i = 0; i < densities.size(); ++i) s.add(densities[i] * (edges[i + 1] - edges[i]));
  return s.value();
}

Histogram histogram_density(std::span<const double> values, std::size_t bin_count) {
  if (values.empty()) throw InvalidArgument("histogram of empty input");
  if (bin_count < 1) throw InvalidArgument("bin_count must be >= 1");
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("histogram input must be finite");

  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  Histogram h;
  h.count = values.size();
  if (hi == lo) {
    h.degenerate = true;
    h.edges = {lo - 0.5, lo + 0.5};
    h.densities = {1.0};
    return h;
  }
  const double width = (hi - lo) / static_cast<double>(bin_count);
  h.edges.resize(bin_count + 1);
  for (std::size_t i = 0; i <= bin_count; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.edges.back() = hi;

  std::vector<std::size_t> counts(bin_count, 0);
  for (double v : values) {
    auto bin = static_cast<std::size_t>((v - lo) / width);
    if (bin >= bin_count) bin = bin_count - 1;
    ++counts[bin];
  }
  h.densities.resize(bin_count);
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < bin_count; ++i) {
    h.densities[i] = static_cast<double>(counts[i]) / (n * (h.edges[i + 1] - h.edges[i]));
  }
  return h;
}

bool CorrelationMatrix::any_degenerate() const noexcept {
  return std::any_of(degenerate.begin(), degenerate.end(), [](bool b) { return b; });
}

double CorrelationMatrix::off_diagonal_norm() const noexcept {
  double s = 0.0;
  for (std::size_t a = 0; a < kSize; ++a)
    for (std::size_t b = 0; b < kSize; ++b)
      if (a != b) s += values[a][b] * values[a][b];
  return std::sqrt(s);
}

std::string CorrelationMatrix::label(std::size_t index) {
  return "eta_" + std::to_string(index / 4) + std::to_string(index % 4);
}

SquareMatrix16 covariance_matrix(std::span<const PauliCoefficients> samples) {
  if (samples.size() < 2) throw InvalidArgument("covariance needs at least 2 samples");
  const double n = static_cast<double>(samples.size());
  std::array<double, 16> mean{};
  for (std::size_t a = 0; a < 16; ++a) {
    CompensatedSum s;
    for (const auto& x : samples) s.add(x.flat(a));
    mean[a] = s.value() / n;
  }
  SquareMatrix16 cov{};
  for (std::size_t a = 0; a < 16; ++a) {
    for (std::size_t b = a; b < 16; ++b) {
      CompensatedSum s;
      for (const auto& x : samples) s.add((x.flat(a) - mean[a]) * (x.flat(b) - mean[b]));
      cov[a][b] = cov[b][a] = s.value() / (n - 1.0);
    }
  }
  return cov;
}

CorrelationMatrix correlation_from_covariance(const SquareMatrix16& cov) {
  CorrelationMatrix out;
  std::array<double, 16> sd{};
  for (std::size_t a = 0; a < 16; ++a) {
    // Relative test so rounding residue of a pinned variable counts as zero.
    const double scale = std::max(1.0, std::abs(cov[a][a]));
    out.degenerate[a] = !(cov[a][a] > 1e-28 * scale);
    sd[a] = out.degenerate[a] ? 0.0 : std::sqrt(cov[a][a]);
  }
  for (std::size_t a = 0; a < 16; ++a) {
    for (std::size_t b = 0; b < 16; ++b) {
      if (out.degenerate[a] || out.degenerate[b]) {
        out.values[a][b] = 0.0;
      } else if (a == b) {
        out.values[a][b] = 1.0;
      } else {
        out.values[a][b] = std::clamp(cov[a][b] / (sd[a] * sd[b]), -1.0, 1.0);
      }
    }
  }
  return out;
}

CorrelationMatrix pearson_matrix(std::span<const PauliCoefficients> samples) {
  if (samples.size() < 3) throw InvalidArgument("pearson_matrix needs at least 3 samples");
  return correlation_from_covariance(covariance_matrix(samples));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) throw InvalidArgument("pearson needs equal series of >= 3");
  const Moments mx = moments(x);
  const Moments my = moments(y);
  if (mx.stddev == 0.0 || my.stddev == 0.0) return 0.0;
  CompensatedSum s;
  for (std::size_t i = 0; i < x.size(); ++i) s.add((x[i] - mx.mean) * (y[i] - my.mean));
  const double cov = s.value() / static_cast<double>(x.size() - 1);
  return std::clamp(cov / (mx.stddev * my.stddev), -1.0, 1.0);
}

double ChiReference::pdf(double x) const {
  if (x < 0.0) return 0.0;
  const double u = x / sigma;
  const double half_k = 0.5 * static_cast<double>(k);
  if (u == 0.0) return k == 1 ? std::sqrt(2.0 / std::numbers::pi) / sigma : 0.0;
  const double log_pdf = (static_cast<double>(k) - 1.0) * std::log(u) - 0.5 * u * u -
                         (half_k - 1.0) * std::log(2.0) - std::lgamma(half_k);
  return std::exp(log_pdf) / sigma;
}

double ChiReference::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  const double u = x / sigma;
  return boost::math::gamma_p(0.5 * static_cast<double>(k), 0.5 * u * u);
}

ChiReference chi_reference(std::size_t k, double sigma) {
  if (k < 1) throw InvalidArgument("chi distribution needs k >= 1");
  if (!(sigma > 0.0)) throw InvalidArgument("chi distribution needs sigma > 0");
  const double kd = static_cast<double>(k);
  ChiReference ref;
  ref.k = k;
  ref.sigma = sigma;
  ref.mean = std::sqrt(2.0) * sigma * std::exp(std::lgamma(0.5 * (kd + 1.0)) - std::lgamma(0.5 * kd));
  return ref;
}

namespace {

void require_unit_norm(const PauliCoefficients& eta0) {
  const double n2 = eta0.norm() * eta0.norm();
  if (std::abs(n2 - 1.0) > 1e-9) {
    throw InvalidArgument("baseline coefficients must have unit norm, got " + std::to_string(n2));
  }
}

}  // namespace

CorrelationMatrix analytic_unit_trace_correlation(const PauliCoefficients& eta0) {
  require_unit_norm(eta0);
  SquareMatrix16 cov{};
  for (std::size_t a = 0; a < 16; ++a)
    for (std::size_t b = 0; b < 16; ++b)
      cov[a][b] = (a == b ? 1.0 : 0.0) - eta0.flat(a) * eta0.flat(b);
  return correlation_from_covariance(cov);
}

SquareMatrix16 jacobian_covariance(const PauliCoefficients& eta0, const PauliCoefficients& mu,
                                   const PauliCoefficients& sigma) {
  require_unit_norm(eta0);
  const PauliCoefficients x = eta0 + mu;
  const double t = x.norm();
  if (!(t > 0.0)) throw InvalidArgument("degenerate mean operator");
  SquareMatrix16 jac{};
  for (std::size_t a = 0; a < 16; ++a)
    for (std::size_t b = 0; b < 16; ++b)
      jac[a][b] = (a == b ? 1.0 / t : 0.0) - x.flat(a) * x.flat(b) / (t * t * t);
  SquareMatrix16 cov{};
  for (std::size_t a = 0; a < 16; ++a)
    for (std::size_t b = 0; b < 16; ++b) {
      double s = 0.0;
      for (std::size_t c = 0; c < 16; ++c) {
        const double var = sigma.flat(c) * sigma.flat(c);
        s += jac[a][c] * var * jac[b][c];
      }
      cov[a][b] = s;
    }
  return cov;
}

double normal_cdf(double x, double mean, double stddev) {
  if (!(stddev > 0.0)) return x < mean ? 0.0 : 1.0;
  return 0.5 * std::erfc(-(x - mean) / (stddev * std::numbers::sqrt2));
}

double kolmogorov_p_value(double statistic, std::size_t n) {
  if (n == 0) return 1.0;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Small-lambda form of the Kolmogorov CDF (Jacobi theta transform).
    const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
    double p = 0.0;
    for (int j = 1; j <= 7; j += 2) p += std::pow(y, j * j);
    p *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - p, 0.0, 1.0);
  }
  double q = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    q += sign * term;
    if (term < 1e-17) break;
    sign = -sign;
  }
  return std::clamp(2.0 * q, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> values, const std::function<double(double)>& cdf) {
  if (values.empty()) throw InvalidArgument("ks_test of empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, kolmogorov_p_value(d, sorted.size())};
}

}  // namespace qperturb
