#include "lfi/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include "lfi/parallel.hpp"
#include "lfi/text.hpp"

namespace lfi {

BootstrapResult bootstrap_run(const Estimator& estimator, const GenerativeModel& model, const ParameterVector& theta_hat,
                              Index b, std::uint64_t seed, const BootstrapOptions& options) {
  if (b < 1) throw InvalidArgument("bootstrap: B must be >= 1");
  if (options.retry_cap < 0) throw InvalidArgument("bootstrap: retry cap must be >= 0");
  const DesignBox bounds = model.parameter_bounds();
  if (theta_hat.size() != bounds.dim()) throw InvalidArgument("bootstrap: theta_hat has the wrong dimension");
  if (!theta_hat.allFinite()) throw InvalidArgument("bootstrap: theta_hat is not finite");

  BootstrapResult result;
  result.theta_hat = bounds.clamp(theta_hat);
  result.clamped = result.theta_hat != theta_hat;
  result.requested = b;
  result.seed = seed;

  std::vector<std::optional<ParameterVector>> rows(static_cast<std::size_t>(b));
  parallel_for(rows.size(), options.jobs, [&](std::size_t i) {
    const RngStream root(seed, static_cast<std::uint64_t>(i));
    for (int k = 0; k <= options.retry_cap; ++k) {
      try {
        RngStream rng = k == 0 ? root : root.substream(static_cast<std::uint64_t>(k));
        const Dataset y = model.simulate(result.theta_hat, rng);
        const auto rec = estimator.run(y, hash_combine64(hash_combine64(seed, i), static_cast<std::uint64_t>(k)));
        if (rec.theta.size() == theta_hat.size() && rec.theta.allFinite()) {
          rows[i] = rec.theta;
          return;
        }
      } catch (const Error&) {
      } catch (const InvalidArgument&) {
      }
    }
  });
  Index ok = 0;
  for (const auto& r : rows) ok += r ? 1 : 0;
  result.failed = b - ok;
  result.estimates.resize(ok, theta_hat.size());
  Index row = 0;
  for (const auto& r : rows)
    if (r) result.estimates.row(row++) = r->transpose();
  return result;
}

std::pair<double, double> bootstrap_interval(const BootstrapResult& result, Index j, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("bootstrap interval: alpha must lie in (0, 1)");
  if (result.b() < 2) throw InvalidArgument("bootstrap interval: need B >= 2 replicates");
  if (j < 0 || j >= result.estimates.cols()) throw InvalidArgument("bootstrap interval: component out of range");
  Vector col = result.estimates.col(j);
  std::sort(col.begin(), col.end());
  return {quantile_sorted(col, alpha / 2.0), quantile_sorted(col, 1.0 - alpha / 2.0)};
}

ConfidenceRegion bootstrap_region(const BootstrapResult& result, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("bootstrap region: alpha must lie in (0, 1)");
  const Index d = result.estimates.cols();
  const Index b = result.b();
  if (b <= d)
    throw RegionError("bootstrap region: need B > d (" + std::to_string(b) + " replicates for d = " +
                      std::to_string(d) + "); increase B");
  ConfidenceRegion r;
  r.center = result.estimates.colwise().mean().transpose();
  const Matrix c = result.estimates.rowwise() - r.center.transpose();
  r.shape = c.transpose() * c / static_cast<double>(b - 1);
  // A spread at rounding level counts as zero variance.
  const Vector floor = 1e-12 * (1.0 + r.center.array().abs());
  if ((r.shape.diagonal().array().sqrt() <= floor.array()).any())
    throw RegionError("bootstrap region: a component has zero variance; increase B");
  try {
    r.chol = cholesky(r.shape, Jitter::automatic());
  } catch (const DecompositionError&) {
    throw RegionError("bootstrap region: covariance is singular; increase B");
  }
  r.radius2 = chi2_quantile(1.0 - alpha, d);
  return r;
}

double region_distance2(const ConfidenceRegion& region, const Eigen::Ref<const Vector>& theta) {
  if (theta.size() != region.center.size()) throw InvalidArgument("region: dimension mismatch");
  return region.chol.triangularView<Eigen::Lower>().solve(Vector(theta - region.center)).squaredNorm();
}

bool region_contains(const ConfidenceRegion& region, const Eigen::Ref<const Vector>& theta) {
  return region_distance2(region, theta) <= region.radius2;
}

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0) || !(x >= 0.0)) throw InvalidArgument("regularized_gamma_p: need a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  const double log_prefix = a * std::log(x) - x - std::lgamma(a);
  if (x < a + 1.0) {
    // Series: sum x^n / (a (a+1) ... (a+n)).
    double term = 1.0 / a, sum = term;
    for (int n = 1; n < 1000; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return std::exp(log_prefix) * sum;
  }
  // Continued fraction for Q(a, x) by modified Lentz.
  constexpr double tiny = 1e-300;
  double bq = x + 1.0 - a, c = 1.0 / tiny, dq = 1.0 / bq, h = dq;
  for (int i = 1; i < 1000; ++i) {
    const double an = -i * (i - a);
    bq += 2.0;
    dq = an * dq + bq;
    if (std::abs(dq) < tiny) dq = tiny;
    c = bq + an / c;
    if (std::abs(c) < tiny) c = tiny;
    dq = 1.0 / dq;
    const double delta = dq * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 - std::exp(log_prefix) * h;
}

double chi2_quantile(double p, Index d) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("chi2_quantile: p must lie in (0, 1)");
  if (d < 1) throw InvalidArgument("chi2_quantile: degrees of freedom must be >= 1");
  const double k = static_cast<double>(d);
  // Standard normal quantile by bisection on erfc; only the starting point depends on it.
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::numbers::sqrt2) < p ? lo : hi) = mid;
  }
  const double z = 0.5 * (lo + hi);
  const double v = 2.0 / (9.0 * k);
  double x = k * std::pow(std::max(1.0 - v + z * std::sqrt(v), 1e-3), 3);
  const double a = 0.5 * k;
  for (int it = 0; it < 50; ++it) {
    const double f = regularized_gamma_p(a, 0.5 * x) - p;
    const double log_pdf = (a - 1.0) * std::log(x) - 0.5 * x - a * std::numbers::ln2 - std::lgamma(a);
    const double step = f / std::exp(log_pdf);
    double next = x - step;
    if (!(next > 0.0)) next = 0.5 * x;
    if (std::abs(next - x) <= 1e-14 * x) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

double gaussian_mean_coverage(Index outer, Index b, double alpha, std::uint64_t seed, std::size_t jobs) {
  if (outer < 1) throw InvalidArgument("coverage: need at least one outer replication");
  const GaussianMeanModel model(100, 1.0, -5.0, 5.0);
  const Vector truth = Vector::Constant(1, 0.3);
  const Estimator mean{"mean", [](const Dataset& y, std::uint64_t) {
                         return EstimateRecord{Vector::Constant(1, y.values.mean()), {}};
                       }};
  std::vector<int> covered(static_cast<std::size_t>(outer), 0);
  parallel_for(covered.size(), jobs, [&](std::size_t i) {
    RngStream rng(seed, i);
    const Dataset y = model.simulate(truth, rng);
    const Vector theta_hat = mean.run(y, 0).theta;
    const BootstrapResult r = bootstrap_run(mean, model, theta_hat, b, hash_combine64(seed, i));
    const auto [lo, hi] = bootstrap_interval(r, 0, alpha);
    covered[i] = lo <= truth[0] && truth[0] <= hi;
  });
  Index hits = 0;
  for (int c : covered) hits += c;
  return static_cast<double>(hits) / static_cast<double>(outer);
}

void write_bootstrap_csv(const BootstrapResult& result, const std::vector<std::string>& names, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "b";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Index i = 0; i < result.b(); ++i) out << i << ',' << join_doubles(result.estimates.row(i).transpose()) << '\n';
}

std::string bootstrap_report(const BootstrapResult& result, const std::vector<std::string>& names, double alpha,
                             bool with_region) {
  std::ostringstream os;
  os << "theta_hat " << join_doubles(result.theta_hat, " ") << (result.clamped ? " (clamped)" : "") << '\n';
  os << "replicates " << result.b() << " of " << result.requested << " (failed " << result.failed << ")\n";
  os << "seed " << result.seed << '\n';
  os << "alpha " << format_double(alpha) << '\n';
  for (Index j = 0; j < result.estimates.cols(); ++j) {
    const auto [lo, hi] = bootstrap_interval(result, j, alpha);
    os << "interval " << names.at(static_cast<std::size_t>(j)) << ' ' << format_double(lo) << ' ' << format_double(hi)
       << '\n';
  }
  if (with_region) {
    const ConfidenceRegion r = bootstrap_region(result, alpha);
    os << "region_center " << join_doubles(r.center, " ") << '\n';
    for (Index i = 0; i < r.shape.rows(); ++i) os << "region_shape " << join_doubles(r.shape.row(i).transpose(), " ") << '\n';
    os << "region_radius2 " << format_double(r.radius2) << '\n';
  }
  return os.str();
}

}  // namespace lfi
