#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lfi/uncertainty.hpp"

using namespace lfi;

namespace {

Estimator sample_mean() {
  return {"mean", [](const Dataset& y, std::uint64_t) { return EstimateRecord{Vector::Constant(1, y.values.mean()), {}}; }};
}

BootstrapResult from_rows(Matrix rows) {
  BootstrapResult r;
  r.estimates = std::move(rows);
  r.requested = r.estimates.rows();
  return r;
}

/// Chi-square CDF by Simpson integration of the density after t = u^2.
double chi2_cdf_numeric(double x, int d) {
  const double k = d / 2.0;
  const double log_norm = -k * std::numbers::ln2 - std::lgamma(k);
  auto g = [&](double u) {
    if (u == 0.0) return d == 1 ? 2.0 * std::exp(log_norm) : 0.0;
    return 2.0 * u * std::exp(log_norm + (k - 1.0) * std::log(u * u) - 0.5 * u * u);
  };
  const int n = 20000;
  const double b = std::sqrt(x), h = b / n;
  double s = g(0.0) + g(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * g(i * h);
  return s * h / 3.0;
}

double chi2_quantile_numeric(double p, int d) {
  double lo = 0.0, hi = 200.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf_numeric(mid, d) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("chi-square quantiles match numeric integration") {
  CHECK(chi2_quantile(0.95, 1) == doctest::Approx(3.841458820694124).epsilon(1e-9));
  for (int d = 1; d <= 10; ++d)
    for (double alpha : {0.1, 0.05, 0.01}) {
      const double q = chi2_quantile(1.0 - alpha, d);
      CHECK(std::abs(q - chi2_quantile_numeric(1.0 - alpha, d)) < 0.01);
    }
  CHECK(regularized_gamma_p(1.0, 2.0) == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(chi2_quantile(1.0, 2), InvalidArgument);
}

TEST_CASE("deterministic model and estimator give identical rows") {
  FnModel model(0.0);
  const Estimator first_value{"v0", [](const Dataset& y, std::uint64_t) {
                                return EstimateRecord{Vector{{y.values(0, 0), y.values(10, 0)}}, {}};
                              }};
  const BootstrapResult r = bootstrap_run(first_value, model, Vector{{0.3, 0.5}}, 20, 1);
  CHECK(r.b() == 20);
  for (Index i = 1; i < r.b(); ++i) CHECK(r.estimates.row(i) == r.estimates.row(0));
  const auto [lo, hi] = bootstrap_interval(r, 0, 0.1);
  CHECK(lo == hi);
  CHECK_THROWS_AS(bootstrap_region(r, 0.1), RegionError);
}

TEST_CASE("bootstrap sd of the Gaussian sample mean") {
  GaussianMeanModel model(100, 1.0, -5.0, 5.0);
  const BootstrapResult r = bootstrap_run(sample_mean(), model, Vector{{0.7}}, 1000, 3, {2, 3});
  const Vector c = r.estimates.col(0);
  const double sd = std::sqrt((c.array() - c.mean()).square().sum() / (c.size() - 1));
  CHECK(sd == doctest::Approx(0.1).epsilon(0.15));
  const BootstrapResult serial = bootstrap_run(sample_mean(), model, Vector{{0.7}}, 1000, 3);
  CHECK(serial.estimates == r.estimates);
}

TEST_CASE("bootstrap with one replicate runs but has no interval") {
  GaussianMeanModel model(10, 1.0, -5.0, 5.0);
  const BootstrapResult r = bootstrap_run(sample_mean(), model, Vector{{0.0}}, 1, 3);
  CHECK(r.b() == 1);
  CHECK_THROWS_AS(bootstrap_interval(r, 0, 0.1), InvalidArgument);
}

TEST_CASE("out-of-bounds theta_hat is clamped and flagged") {
  GaussianMeanModel model(10, 1.0, -5.0, 5.0);
  const BootstrapResult r = bootstrap_run(sample_mean(), model, Vector{{7.0}}, 3, 3);
  CHECK(r.clamped);
  CHECK(r.theta_hat[0] == 5.0);
}

TEST_CASE("percentile interval interpolation and nesting") {
  Matrix m(100, 1);
  for (int i = 0; i < 100; ++i) m(99 - i, 0) = i + 1.0;
  const BootstrapResult r = from_rows(m);
  const auto [lo, hi] = bootstrap_interval(r, 0, 0.1);
  CHECK(lo == doctest::Approx(5.95));
  CHECK(hi == doctest::Approx(95.05));
  const auto [lo99, hi99] = bootstrap_interval(r, 0, 0.01);
  CHECK(lo99 <= lo);
  CHECK(hi99 >= hi);
  CHECK_THROWS_AS(bootstrap_interval(r, 0, 0.0), InvalidArgument);
  CHECK_THROWS_AS(bootstrap_interval(r, 0, 1.0), InvalidArgument);
}

TEST_CASE("one-dimensional region is mean plus or minus a chi-square radius") {
  RngStream rng(5, 5);
  Matrix m(50, 1);
  for (Index i = 0; i < 50; ++i) m(i, 0) = sample_normal(rng, 2.0, 0.5);
  const ConfidenceRegion reg = bootstrap_region(from_rows(m), 0.05);
  const double mean = m.col(0).mean();
  const double sd = std::sqrt((m.col(0).array() - mean).square().sum() / 49.0);
  CHECK(reg.radius2 == doctest::Approx(3.841458820694124).epsilon(1e-9));
  const double half = std::sqrt(reg.radius2) * sd;
  CHECK(region_contains(reg, Vector{{mean + 0.999 * half}}));
  CHECK_FALSE(region_contains(reg, Vector{{mean + 1.001 * half}}));
  CHECK(region_contains(reg, reg.center));
  CHECK(region_distance2(reg, reg.center) == 0.0);
}

TEST_CASE("isotropic cloud fills the 95 percent region") {
  RngStream rng(6, 6);
  Matrix m(2000, 3);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < 3; ++j) m(i, j) = sample_normal(rng, 1.0, 0.3);
  const BootstrapResult r = from_rows(m);
  const ConfidenceRegion reg = bootstrap_region(r, 0.05);
  int inside = 0;
  for (Index i = 0; i < m.rows(); ++i) inside += region_contains(reg, m.row(i).transpose());
  CHECK(inside / 2000.0 == doctest::Approx(0.95).epsilon(0.03 / 0.95));
  const BootstrapResult small = from_rows(m.topRows(3));
  CHECK_THROWS_AS(bootstrap_region(small, 0.05), RegionError);
}
