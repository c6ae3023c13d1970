#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lfi/numeric.hpp"
#include "lfi/simulators.hpp"

namespace lfi {

// --- Statistic primitives ----------------------------------------------------

/// (1/m) sum_{t=1}^{m-lag} (y(t+lag) - ybar)(y(t) - ybar).
double autocovariance(const Eigen::Ref<const Vector>& y, Index lag);

/// Linear interpolation of an ascending vector at zero-based position p * (m - 1).
double quantile_sorted(const Eigen::Ref<const Vector>& sorted, double p);

/// Quantiles at levels j / (count + 1), j = 1..count.
Vector quantiles_evenly_spaced(const Eigen::Ref<const Vector>& y, Index count);

Index count_zeros(const Eigen::Ref<const Vector>& y);

/// Cubic regression of sorted first differences on the sorted observations
/// (largest dropped), with the regressor standardized to z and columns
/// (1, z, z^2, z^3). Rank deficiency yields (mean difference, 0, 0, 0).
Vector ordered_diff_cubic_coeffs(const Eigen::Ref<const Vector>& y);

/// Regression of y(t+1)^0.3 on (1, y(t)^0.3, y(t)^0.6). Rank deficiency
/// yields (mean response, 0, 0).
Vector power_autoregression_coeffs(const Eigen::Ref<const Vector>& y);

enum class Basis { fourier, cubic_bspline };

/// Design matrix of `k` basis functions evaluated on `t_grid`.
/// Fourier columns: 1, cos(2 pi t / T), sin(2 pi t / T), cos(4 pi t / T), ...
/// with T the grid span. B-spline: clamped cubic with uniform interior knots.
Matrix basis_matrix(Basis basis, Index k, const Eigen::Ref<const Vector>& t_grid);

Vector basis_regression_coeffs(const Eigen::Ref<const Vector>& y, Basis basis, Index k,
                               const Eigen::Ref<const Vector>& t_grid);

/// Pearson correlation at lag 0; 0 when either series is constant.
double cross_correlation(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v);

// --- Pipelines -----------------------------------------------------------------

struct SummaryVector {
  Vector values;
  std::vector<std::string> schema;
};

/// Options that identify a shipped pipeline; together with `id` they are the
/// whole manifest.
struct PipelineOptions {
  Index fourier_k = 51;
  bool ricker_max = true;  ///< append max(y) to each Ricker-style block
  Index bspline_k = 20;
};

/// An immutable summary map S for one model. Basis projectors are built once
/// for the model's default time grid and reused; other grids are fitted directly.
class SummaryPipeline {
 public:
  static SummaryPipeline ricker(PipelineOptions options = {});
  static SummaryPipeline mg1();
  static SummaryPipeline lv(PipelineOptions options = {}, const Vector& grid = {});
  static SummaryPipeline fn(Index k = 51, const Vector& obs_times = fn_default_obs_times());
  /// Sample mean of the single series; for the Gaussian toy models.
  static SummaryPipeline mean();

  /// Pipeline by id: ricker, mg1, lv, fn, mean.
  static SummaryPipeline by_id(const std::string& id, PipelineOptions options = {});
  /// The pipeline a model ships with (mean for gauss-mean).
  static SummaryPipeline for_model(const GenerativeModel& model, PipelineOptions options = {});

  const std::string& id() const { return id_; }
  const std::string& model() const { return model_; }
  const std::vector<std::string>& schema() const { return schema_; }
  Index dimension() const { return static_cast<Index>(schema_.size()); }
  const PipelineOptions& options() const { return options_; }

  SummaryVector summarize(const Dataset& data) const;
  Vector operator()(const Dataset& data) const { return summarize(data).values; }
  Featurizer featurizer() const;

  /// Text manifest: id, options, K and the statistic list.
  std::string manifest() const;
  static SummaryPipeline from_manifest(const std::string& text);

 private:
  struct Projector;
  using Impl = std::function<void(const SummaryPipeline&, const Dataset&, Vector&)>;

  SummaryPipeline() = default;
  static std::shared_ptr<const Projector> make_projector(const Vector& grid, Basis basis, Index k);
  Vector basis_coeffs(const Eigen::Ref<const Vector>& y, const Vector& grid, Basis basis, Index k) const;

  std::string id_;
  std::string model_;
  std::vector<std::string> schema_;
  PipelineOptions options_;
  std::vector<std::string> series_;
  Impl impl_;
  std::shared_ptr<const Projector> projector_;
};

}  // namespace lfi
