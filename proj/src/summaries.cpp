#include "lfi/summaries.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "lfi/text.hpp"

namespace lfi {

// --- Primitives ----------------------------------------------------------------

double autocovariance(const Eigen::Ref<const Vector>& y, Index lag) {
  const Index m = y.size();
  if (lag < 0 || lag >= m)
    throw InvalidArgument("autocovariance: lag " + std::to_string(lag) + " outside [0, " + std::to_string(m) + ")");
  const double mean = y.mean();
  const auto head = y.head(m - lag).array() - mean;
  const auto tail = y.tail(m - lag).array() - mean;
  return (head * tail).sum() / static_cast<double>(m);
}

double quantile_sorted(const Eigen::Ref<const Vector>& sorted, double p) {
  if (sorted.size() == 0) throw InvalidArgument("quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile: level outside [0, 1]");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<Index>(std::floor(pos));
  const Index hi = std::min<Index>(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

Vector sorted_copy(const Eigen::Ref<const Vector>& y) {
  Vector s = y;
  std::sort(s.begin(), s.end());
  return s;
}

/// Least squares with the documented fallback on rank deficiency.
Vector fit_or_fallback(const Matrix& x, const Vector& response) {
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (qr.rank() < x.cols()) {
    Vector out = Vector::Zero(x.cols());
    out[0] = response.mean();
    return out;
  }
  return qr.solve(response);
}

}  // namespace

Vector quantiles_evenly_spaced(const Eigen::Ref<const Vector>& y, Index count) {
  if (y.size() == 0) throw InvalidArgument("quantiles: empty input");
  if (count < 1) throw InvalidArgument("quantiles: count must be >= 1");
  const Vector s = sorted_copy(y);
  Vector q(count);
  for (Index j = 0; j < count; ++j)
    q[j] = quantile_sorted(s, static_cast<double>(j + 1) / static_cast<double>(count + 1));
  return q;
}

Index count_zeros(const Eigen::Ref<const Vector>& y) { return (y.array() == 0.0).count(); }

Vector ordered_diff_cubic_coeffs(const Eigen::Ref<const Vector>& y) {
  const Index m = y.size();
  if (m < 5) throw InvalidArgument("ordered_diff_cubic_coeffs: need length >= 5");
  Vector diffs = y.tail(m - 1) - y.head(m - 1);
  std::sort(diffs.begin(), diffs.end());
  const Vector ys = sorted_copy(y).head(m - 1);
  const double mean = ys.mean();
  const double sd = std::sqrt((ys.array() - mean).square().sum() / static_cast<double>(m - 1));
  if (!(sd > 0.0)) return Vector{{diffs.mean(), 0.0, 0.0, 0.0}};
  Matrix x(m - 1, 4);
  const Vector z = (ys.array() - mean) / sd;
  x.col(0).setOnes();
  x.col(1) = z;
  x.col(2) = z.array().square();
  x.col(3) = z.array().cube();
  return fit_or_fallback(x, diffs);
}

Vector power_autoregression_coeffs(const Eigen::Ref<const Vector>& y) {
  const Index m = y.size();
  if (m < 4) throw InvalidArgument("power_autoregression_coeffs: need length >= 4");
  if ((y.array() < 0.0).any()) throw InvalidArgument("power_autoregression_coeffs: negative observation");
  const Vector p = y.array().pow(0.3);
  Matrix x(m - 1, 3);
  x.col(0).setOnes();
  x.col(1) = p.head(m - 1);
  x.col(2) = p.head(m - 1).array().square();
  return fit_or_fallback(x, p.tail(m - 1));
}

namespace {

void check_grid(const Eigen::Ref<const Vector>& t, Index k) {
  if (t.size() < 2) throw InvalidArgument("basis: grid needs at least two points");
  if (k > t.size()) throw InvalidArgument("basis: k exceeds grid length");
  if (!(t[t.size() - 1] > t[0])) throw InvalidArgument("basis: grid span must be positive");
}

Matrix fourier_matrix(Index k, const Eigen::Ref<const Vector>& t) {
  if (k < 1 || k % 2 == 0) throw InvalidArgument("fourier basis: k must be odd (got " + std::to_string(k) + ")");
  check_grid(t, k);
  const double span = t[t.size() - 1] - t[0];
  Matrix x(t.size(), k);
  x.col(0).setOnes();
  for (Index j = 1; j <= (k - 1) / 2; ++j) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(j) / span;
    x.col(2 * j - 1) = (w * t.array()).cos();
    x.col(2 * j) = (w * t.array()).sin();
  }
  return x;
}

Matrix bspline_matrix(Index k, const Eigen::Ref<const Vector>& t) {
  constexpr int degree = 3;
  if (k < 4) throw InvalidArgument("b-spline basis: k must be >= 4 (got " + std::to_string(k) + ")");
  check_grid(t, k);
  const double a = t[0], b = t[t.size() - 1];
  // Clamped knot vector: degree+1 copies of each end, k - 4 uniform interior knots.
  const Index interior = k - degree - 1;
  std::vector<double> knots;
  for (int i = 0; i <= degree; ++i) knots.push_back(a);
  for (Index i = 1; i <= interior; ++i)
    knots.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(interior + 1));
  for (int i = 0; i <= degree; ++i) knots.push_back(b);

  Matrix x = Matrix::Zero(t.size(), k);
  std::vector<double> n(static_cast<std::size_t>(degree + 1));
  for (Index r = 0; r < t.size(); ++r) {
    const double u = t[r];
    // Knot span index with u in [knots[s], knots[s+1]); the right end belongs to the last span.
    Index s = degree;
    while (s < k - 1 && u >= knots[static_cast<std::size_t>(s + 1)]) ++s;
    // De Boor's triangular evaluation of the degree+1 non-zero functions.
    std::vector<double> left(degree + 1), right(degree + 1);
    n[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
      left[j] = u - knots[static_cast<std::size_t>(s + 1 - j)];
      right[j] = knots[static_cast<std::size_t>(s + j)] - u;
      double saved = 0.0;
      for (int q = 0; q < j; ++q) {
        const double temp = n[q] / (right[q + 1] + left[j - q]);
        n[q] = saved + right[q + 1] * temp;
        saved = left[j - q] * temp;
      }
      n[j] = saved;
    }
    for (int j = 0; j <= degree; ++j) x(r, s - degree + j) = n[static_cast<std::size_t>(j)];
  }
  return x;
}

}  // namespace

Matrix basis_matrix(Basis basis, Index k, const Eigen::Ref<const Vector>& t_grid) {
  return basis == Basis::fourier ? fourier_matrix(k, t_grid) : bspline_matrix(k, t_grid);
}

Vector basis_regression_coeffs(const Eigen::Ref<const Vector>& y, Basis basis, Index k,
                               const Eigen::Ref<const Vector>& t_grid) {
  if (y.size() != t_grid.size()) throw InvalidArgument("basis regression: y and grid lengths differ");
  return least_squares(basis_matrix(basis, k, t_grid), y);
}

double cross_correlation(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  if (u.size() != v.size() || u.size() < 2) throw InvalidArgument("cross_correlation: need equal lengths >= 2");
  const Eigen::ArrayXd du = u.array() - u.mean();
  const Eigen::ArrayXd dv = v.array() - v.mean();
  const double su = du.square().sum(), sv = dv.square().sum();
  if (!(su > 0.0) || !(sv > 0.0)) return 0.0;
  return (du * dv).sum() / std::sqrt(su * sv);
}

// --- Pipelines -------------------------------------------------------------------

struct SummaryPipeline::Projector {
  Vector grid;
  Basis basis;
  Index k;
  Matrix p;  ///< k x m, maps y to its least-squares coefficients
};

namespace {

void ricker_block(const Eigen::Ref<const Vector>& y, bool with_max, Vector& out, Index& at) {
  out[at++] = y.mean();
  for (Index lag = 0; lag <= 5; ++lag) out[at++] = autocovariance(y, lag);
  out[at++] = static_cast<double>(count_zeros(y));
  out.segment(at, 4) = ordered_diff_cubic_coeffs(y);
  at += 4;
  out.segment(at, 3) = power_autoregression_coeffs(y);
  at += 3;
  if (with_max) out[at++] = y.maxCoeff();
}

std::vector<std::string> ricker_schema(const std::string& prefix, bool with_max) {
  std::vector<std::string> s{prefix + "mean"};
  for (int lag = 0; lag <= 5; ++lag) s.push_back(prefix + "acov" + std::to_string(lag));
  s.push_back(prefix + "zeros");
  for (int j = 0; j < 4; ++j) s.push_back(prefix + "cubic" + std::to_string(j));
  for (int j = 0; j < 3; ++j) s.push_back(prefix + "powar" + std::to_string(j));
  if (with_max) s.push_back(prefix + "max[added]");
  return s;
}

void require_series(const Dataset& d, const std::vector<std::string>& names, const std::string& id) {
  if (d.names != names) {
    std::string got;
    for (const auto& n : d.names) got += (got.empty() ? "" : ",") + n;
    throw SchemaMismatch("summary pipeline '" + id + "' cannot summarize dataset with series (" + got + ")");
  }
}

}  // namespace

SummaryPipeline SummaryPipeline::ricker(PipelineOptions options) {
  SummaryPipeline p;
  p.id_ = "ricker";
  p.model_ = "ricker";
  p.options_ = options;
  p.series_ = {"count"};
  p.schema_ = ricker_schema("", options.ricker_max);
  p.impl_ = [](const SummaryPipeline& self, const Dataset& d, Vector& out) {
    Index at = 0;
    ricker_block(d.values.col(0), self.options_.ricker_max, out, at);
  };
  return p;
}

SummaryPipeline SummaryPipeline::mg1() {
  SummaryPipeline p;
  p.id_ = "mg1";
  p.model_ = "mg1";
  p.series_ = {"interdeparture"};
  p.schema_ = {"min", "max"};
  for (int j = 1; j <= 18; ++j) p.schema_.push_back("q" + std::to_string(j));
  p.impl_ = [](const SummaryPipeline&, const Dataset& d, Vector& out) {
    const auto y = d.values.col(0);
    out[0] = y.minCoeff();
    out[1] = y.maxCoeff();
    out.tail(18) = quantiles_evenly_spaced(y, 18);
  };
  return p;
}

SummaryPipeline SummaryPipeline::lv(PipelineOptions options, const Vector& grid) {
  SummaryPipeline p;
  p.id_ = "lv";
  p.model_ = "lv";
  p.options_ = options;
  p.series_ = {"prey", "predator"};
  for (const char* sp : {"prey.", "predator."}) {
    const auto block = ricker_schema(sp, options.ricker_max);
    p.schema_.insert(p.schema_.end(), block.begin(), block.end());
  }
  for (const char* sp : {"prey.", "predator."})
    for (Index j = 0; j < options.bspline_k; ++j) p.schema_.push_back(std::string(sp) + "bspline" + std::to_string(j));
  p.schema_.push_back("crosscorr");
  Vector g = grid;
  if (g.size() == 0) {
    const LvSettings s;
    g = Vector::LinSpaced(s.grid_points, 0.0, s.t_end);
  }
  p.projector_ = make_projector(g, Basis::cubic_bspline, options.bspline_k);
  p.impl_ = [](const SummaryPipeline& self, const Dataset& d, Vector& out) {
    if (d.time.size() == 0) throw SchemaMismatch("lv summaries need a time grid");
    Index at = 0;
    for (Index s = 0; s < 2; ++s) ricker_block(d.values.col(s), self.options_.ricker_max, out, at);
    const Index k = self.options_.bspline_k;
    for (Index s = 0; s < 2; ++s) {
      out.segment(at, k) = self.basis_coeffs(d.values.col(s), d.time, Basis::cubic_bspline, k);
      at += k;
    }
    out[at] = cross_correlation(d.values.col(0), d.values.col(1));
  };
  return p;
}

SummaryPipeline SummaryPipeline::fn(Index k, const Vector& obs_times) {
  if (k < 1 || k % 2 == 0) throw InvalidArgument("fn pipeline: k must be odd (got " + std::to_string(k) + ")");
  SummaryPipeline p;
  p.id_ = "fn";
  p.model_ = "fn";
  p.options_.fourier_k = k;
  p.series_ = {"voltage"};
  p.schema_.push_back("fourier.const");
  for (Index j = 1; j <= (k - 1) / 2; ++j) {
    p.schema_.push_back("fourier.cos" + std::to_string(j));
    p.schema_.push_back("fourier.sin" + std::to_string(j));
  }
  if (obs_times.size() >= k) p.projector_ = make_projector(obs_times, Basis::fourier, k);
  p.impl_ = [](const SummaryPipeline& self, const Dataset& d, Vector& out) {
    if (d.time.size() == 0) throw SchemaMismatch("fn summaries need observation times");
    out = self.basis_coeffs(d.values.col(0), d.time, Basis::fourier, self.options_.fourier_k);
  };
  return p;
}

SummaryPipeline SummaryPipeline::mean() {
  SummaryPipeline p;
  p.id_ = "mean";
  p.model_ = "gauss-mean";
  p.series_ = {"y"};
  p.schema_ = {"mean"};
  p.impl_ = [](const SummaryPipeline&, const Dataset& d, Vector& out) { out[0] = d.values.col(0).mean(); };
  return p;
}

SummaryPipeline SummaryPipeline::by_id(const std::string& id, PipelineOptions options) {
  if (id == "ricker") return ricker(options);
  if (id == "mg1") return mg1();
  if (id == "lv") return lv(options);
  if (id == "fn") return fn(options.fourier_k);
  if (id == "mean") return mean();
  throw ConfigError("unknown summary pipeline '" + id + "' (expected ricker, mg1, lv, fn, mean)");
}

SummaryPipeline SummaryPipeline::for_model(const GenerativeModel& model, PipelineOptions options) {
  const std::string name = model.name();
  if (name == "gauss-mean") return mean();
  if (name == "fn") return fn(options.fourier_k, static_cast<const FnModel&>(model).obs_times());
  if (name == "lv") {
    const auto& s = static_cast<const LvModel&>(model).settings();
    PipelineOptions o = options;
    return lv(o, Vector::LinSpaced(s.grid_points, 0.0, s.t_end));
  }
  return by_id(name, options);
}

std::shared_ptr<const SummaryPipeline::Projector> SummaryPipeline::make_projector(const Vector& grid, Basis basis,
                                                                                 Index k) {
  const Matrix x = basis_matrix(basis, k, grid);
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (qr.rank() < k)
    throw SingularSystemError("basis projector: design of " + std::to_string(k) + " columns has rank " +
                              std::to_string(qr.rank()));
  auto proj = std::make_shared<Projector>();
  proj->grid = grid;
  proj->basis = basis;
  proj->k = k;
  // Row-wise solve gives the k x m map; coefficients are then one GEMV per series.
  proj->p = qr.solve(Matrix::Identity(grid.size(), grid.size()));
  return proj;
}

Vector SummaryPipeline::basis_coeffs(const Eigen::Ref<const Vector>& y, const Vector& grid, Basis basis,
                                     Index k) const {
  if (projector_ && projector_->basis == basis && projector_->k == k && projector_->grid.size() == grid.size() &&
      projector_->grid == grid)
    return projector_->p * y;
  return basis_regression_coeffs(y, basis, k, grid);
}

SummaryVector SummaryPipeline::summarize(const Dataset& data) const {
  require_series(data, series_, id_);
  Vector out(dimension());
  impl_(*this, data, out);
  if (out.size() != dimension())
    throw SummaryError("summary pipeline '" + id_ + "' produced " + std::to_string(out.size()) + " values, expected " +
                       std::to_string(dimension()));
  for (Index i = 0; i < out.size(); ++i)
    if (!std::isfinite(out[i]))
      throw SummaryError("summary statistic '" + schema_[static_cast<std::size_t>(i)] + "' is not finite");
  return {std::move(out), schema_};
}

Featurizer SummaryPipeline::featurizer() const {
  auto self = std::make_shared<SummaryPipeline>(*this);
  return [self](const Dataset& d) { return self->summarize(d).values; };
}

std::string SummaryPipeline::manifest() const {
  std::ostringstream os;
  os << "pipeline=" << id_ << "\n";
  os << "model=" << model_ << "\n";
  if (id_ == "fn") os << "fourier_k=" << options_.fourier_k << "\n";
  if (id_ == "ricker" || id_ == "lv") os << "ricker_max=" << (options_.ricker_max ? 1 : 0) << "\n";
  if (id_ == "lv") os << "bspline_k=" << options_.bspline_k << "\n";
  os << "K=" << dimension() << "\n";
  os << "schema=";
  for (std::size_t i = 0; i < schema_.size(); ++i) os << (i ? "," : "") << schema_[i];
  os << "\n";
  return os.str();
}

SummaryPipeline SummaryPipeline::from_manifest(const std::string& text) {
  std::string id, schema;
  long long k = -1;
  PipelineOptions options;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("pipeline manifest: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    try {
      if (key == "pipeline") id = value;
      else if (key == "fourier_k") options.fourier_k = std::stoll(value);
      else if (key == "ricker_max") options.ricker_max = value == "1";
      else if (key == "bspline_k") options.bspline_k = std::stoll(value);
      else if (key == "K") k = std::stoll(value);
      else if (key == "schema") schema = value;
      else if (key != "model") throw FormatError("pipeline manifest: unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw FormatError("pipeline manifest: bad value for '" + key + "'");
    }
  }
  if (id.empty()) throw FormatError("pipeline manifest: missing pipeline id");
  SummaryPipeline p = by_id(id, options);
  if (p.dimension() != k || p.manifest() != text)
    throw SchemaMismatch("pipeline manifest for '" + id + "' does not match the shipped statistic list");
  return p;
}

}  // namespace lfi
