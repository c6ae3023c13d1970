#pragma once

#include <string>
#include <utility>

#include "lfi/estimators.hpp"

namespace lfi {

struct BootstrapResult {
  Matrix estimates;            ///< B x d, one successful replicate per row
  ParameterVector theta_hat;   ///< point estimate the data were drawn at
  bool clamped = false;        ///< theta_hat was moved into the parameter bounds
  Index requested = 0;         ///< B asked for
  Index failed = 0;            ///< replicates dropped after exhausting retries
  std::uint64_t seed = 0;

  Index b() const { return estimates.rows(); }
};

struct BootstrapOptions {
  std::size_t jobs = 1;
  int retry_cap = 3;
};

/// Replicate b simulates from RngStream(seed, b) (retry k from its substream k)
/// at theta_hat and re-estimates with seed hash(seed, b, k).
BootstrapResult bootstrap_run(const Estimator& estimator, const GenerativeModel& model, const ParameterVector& theta_hat,
                              Index b, std::uint64_t seed, const BootstrapOptions& options = {});

/// Empirical alpha/2 and 1 - alpha/2 percentiles of column j, p (B - 1) interpolation.
std::pair<double, double> bootstrap_interval(const BootstrapResult& result, Index j, double alpha);

struct ConfidenceRegion {
  Vector center;
  Matrix shape;     ///< bootstrap covariance, divisor B - 1
  Matrix chol;      ///< lower Cholesky factor of `shape` (auto jitter)
  double radius2 = 0.0;  ///< chi-square quantile at 1 - alpha with d degrees of freedom
};

ConfidenceRegion bootstrap_region(const BootstrapResult& result, double alpha);
/// Squared Mahalanobis distance of theta from the center.
double region_distance2(const ConfidenceRegion& region, const Eigen::Ref<const Vector>& theta);
bool region_contains(const ConfidenceRegion& region, const Eigen::Ref<const Vector>& theta);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
/// Chi-square quantile: Wilson-Hilferty start refined by Newton steps on P(d/2, x/2).
double chi2_quantile(double p, Index d);

/// Coverage harness: `outer` datasets from the Gaussian-mean toy (m = 100,
/// sd = 1, theta = 0.3), each bootstrapped B times with the sample-mean
/// estimator; returns the fraction of percentile intervals that cover theta.
double gaussian_mean_coverage(Index outer, Index b, double alpha, std::uint64_t seed, std::size_t jobs = 1);

void write_bootstrap_csv(const BootstrapResult& result, const std::vector<std::string>& names, const std::string& path);
/// Per-component intervals and, when B > d, the region summary.
std::string bootstrap_report(const BootstrapResult& result, const std::vector<std::string>& names, double alpha,
                             bool with_region);

}  // namespace lfi
