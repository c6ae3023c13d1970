#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lfi/numeric.hpp"

namespace lfi {

using ParameterVector = Vector;

/// Axis-aligned box; the support of the uniform design density.
struct DesignBox {
  Vector lo;
  Vector hi;

  DesignBox() = default;
  DesignBox(Vector lo_, Vector hi_);

  Index dim() const { return lo.size(); }
  Vector width() const { return hi - lo; }
  Vector midpoint() const { return 0.5 * (lo + hi); }
  bool contains(const Eigen::Ref<const Vector>& x) const;
  Vector clamp(const Eigen::Ref<const Vector>& x) const;
};

/// One realization of a generative model: aligned named series of length m.
struct Dataset {
  std::vector<std::string> names;
  Matrix values;  ///< m x (number of series), one column per series
  Vector time;    ///< empty, or strictly increasing of length m

  Dataset() = default;
  Dataset(std::vector<std::string> names_, Matrix values_, Vector time_ = {});

  Index length() const { return values.rows(); }
  Index series_count() const { return values.cols(); }
  Vector series(Index j) const { return values.col(j); }
  Vector series(const std::string& name) const;
  /// Series concatenated in column order (u then v for two-species data).
  Vector flatten() const;
};

/// A simulator p(y | theta) together with its parameter space.
///
/// Parameters are sampled in "design coordinates" (the box the design density
/// is uniform over) and mapped to model parameters with `to_parameter`. For
/// every shipped model except M/G/1 the map is the identity.
class GenerativeModel {
 public:
  virtual ~GenerativeModel() = default;

  virtual std::string name() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual std::vector<std::string> series_names() const = 0;
  virtual Index output_length() const = 0;
  /// Human-readable fixed constants, recorded in provenance.
  virtual std::string constants() const = 0;

  Index parameter_dimension() const { return static_cast<Index>(parameter_names().size()); }
  const DesignBox& design() const { return design_; }
  void set_design(DesignBox box);

  virtual ParameterVector to_parameter(const Vector& design_point) const { return design_point; }
  virtual Vector to_design(const ParameterVector& theta) const { return theta; }
  /// Bounding box of the parameter image of the design box.
  virtual DesignBox parameter_bounds() const { return design_; }

  /// Validates theta and draws one dataset. Counted by `simulation_count`.
  Dataset simulate(const ParameterVector& theta, RngStream& rng) const;

  Index flattened_length() const { return output_length() * static_cast<Index>(series_names().size()); }

 protected:
  explicit GenerativeModel(DesignBox design) : design_(std::move(design)) {}
  virtual Dataset do_simulate(const ParameterVector& theta, RngStream& rng) const = 0;

 private:
  DesignBox design_;
};

/// Process-wide number of `GenerativeModel::simulate` calls.
std::uint64_t simulation_count();

// --- Ricker ---------------------------------------------------------------

/// One latent transition N -> e^eta N exp(-N + eps), evaluated in log space.
inline double ricker_step(double eta, double n, double eps) { return std::exp(eta + std::log(n) - n + eps); }

/// theta = (eta, sigma, delta); N(t+1) = e^eta N(t) exp(-N(t) + eps), y ~ Poisson(delta N).
Dataset simulate_ricker(const ParameterVector& theta, Index m, double n0, RngStream& rng);

class RickerModel final : public GenerativeModel {
 public:
  explicit RickerModel(Index m = 1000, double n0 = 2.0);
  std::string name() const override { return "ricker"; }
  std::vector<std::string> parameter_names() const override { return {"eta", "sigma", "delta"}; }
  std::vector<std::string> series_names() const override { return {"count"}; }
  Index output_length() const override { return m_; }
  std::string constants() const override;

 protected:
  Dataset do_simulate(const ParameterVector& theta, RngStream& rng) const override;

 private:
  Index m_;
  double n0_;
};

// --- M/G/1 queue ---------------------------------------------------------

/// Inter-departure times from service times `u` and inter-arrival gaps `w` (w[0] = 0).
Vector mg1_interdepartures(const Eigen::Ref<const Vector>& service, const Eigen::Ref<const Vector>& arrival_gaps);

/// theta = (theta1, theta2, theta3): service ~ U[theta1, theta2], arrivals at rate theta3.
Dataset simulate_mg1(const ParameterVector& theta, Index n, RngStream& rng);

/// Design coordinates are (theta1, theta2 - theta1, theta3).
class Mg1Model final : public GenerativeModel {
 public:
  explicit Mg1Model(Index n = 1000);
  std::string name() const override { return "mg1"; }
  std::vector<std::string> parameter_names() const override { return {"theta1", "theta2", "theta3"}; }
  std::vector<std::string> series_names() const override { return {"interdeparture"}; }
  Index output_length() const override { return n_; }
  std::string constants() const override;

  ParameterVector to_parameter(const Vector& design_point) const override;
  Vector to_design(const ParameterVector& theta) const override;
  DesignBox parameter_bounds() const override;

 protected:
  Dataset do_simulate(const ParameterVector& theta, RngStream& rng) const override;

 private:
  Index n_;
};

// --- Lotka-Volterra (Gillespie) -------------------------------------------

struct LvEvent {
  double time;
  std::int64_t prey;
  std::int64_t predator;
};

struct LvSettings {
  std::int64_t prey0 = 50;
  std::int64_t predator0 = 100;
  double t_end = 30.0;
  Index grid_points = 1000;
  std::uint64_t max_events = 10'000'000;
};

/// Exact SSA with hazards (theta1 u, theta2 u v, theta3 v), sampled onto
/// `grid_points` equispaced times in [0, t_end] by last value. When
/// `event_log` is non-null every post-event state is appended to it.
Dataset simulate_lv(const ParameterVector& theta, const LvSettings& settings, RngStream& rng,
                    std::vector<LvEvent>* event_log = nullptr);

class LvModel final : public GenerativeModel {
 public:
  explicit LvModel(LvSettings settings = {});
  std::string name() const override { return "lv"; }
  std::vector<std::string> parameter_names() const override { return {"theta1", "theta2", "theta3"}; }
  std::vector<std::string> series_names() const override { return {"prey", "predator"}; }
  Index output_length() const override { return settings_.grid_points; }
  std::string constants() const override;
  const LvSettings& settings() const { return settings_; }

 protected:
  Dataset do_simulate(const ParameterVector& theta, RngStream& rng) const override;

 private:
  LvSettings settings_;
};

// --- FitzHugh-Nagumo --------------------------------------------------------

struct FnConstants {
  double tau = 3.0;
  double zeta = 0.4;
  double step = 0.0125;
};

/// Classical RK4 on the grid k * step, k = 0..floor(t_end / step), from v = r = 0.
/// Series "voltage" and "recovery".
Dataset solve_fn_ode(const ParameterVector& theta, double tau, double zeta, double step, double t_end);

/// Voltage at `obs_times` plus iid Normal(0, noise_sd^2). Every observation
/// time must be an integer multiple of the solver step.
Dataset simulate_fn(const ParameterVector& theta, double noise_sd, const Vector& obs_times, RngStream& rng,
                    const FnConstants& constants = {});

/// t_i = 0.025 i, i = 1..count.
Vector fn_default_obs_times(Index count = 1000, double spacing = 0.025);

class FnModel final : public GenerativeModel {
 public:
  explicit FnModel(double noise_sd = 0.06, Vector obs_times = fn_default_obs_times(), FnConstants constants = {});
  std::string name() const override { return "fn"; }
  std::vector<std::string> parameter_names() const override { return {"theta1", "theta2"}; }
  std::vector<std::string> series_names() const override { return {"voltage"}; }
  Index output_length() const override { return obs_times_.size(); }
  std::string constants() const override;

  double noise_sd() const { return noise_sd_; }
  const Vector& obs_times() const { return obs_times_; }
  const FnConstants& ode_constants() const { return constants_; }

  /// Noise-free voltage at the observation times.
  Vector voltage(const ParameterVector& theta) const;
  /// Gaussian log-likelihood of observed voltages, noise sd treated as known.
  double log_likelihood(const ParameterVector& theta, const Eigen::Ref<const Vector>& y) const;

 protected:
  Dataset do_simulate(const ParameterVector& theta, RngStream& rng) const override;

 private:
  double noise_sd_;
  Vector obs_times_;
  FnConstants constants_;
};

// --- Gaussian mean toy -------------------------------------------------------

/// y = m iid Normal(theta, sd^2), scalar theta. Used for oracle checks.
class GaussianMeanModel final : public GenerativeModel {
 public:
  GaussianMeanModel(Index m, double sd, double lo, double hi);
  std::string name() const override { return "gauss-mean"; }
  std::vector<std::string> parameter_names() const override { return {"mu"}; }
  std::vector<std::string> series_names() const override { return {"y"}; }
  Index output_length() const override { return m_; }
  std::string constants() const override;
  double sd() const { return sd_; }

 protected:
  Dataset do_simulate(const ParameterVector& theta, RngStream& rng) const override;

 private:
  Index m_;
  double sd_;
};

// --- Training pairs ----------------------------------------------------------

using Featurizer = std::function<Vector(const Dataset&)>;

/// (theta, data) pairs; row n of `theta` goes with row n of `data`.
struct TrainingSet {
  std::string model;
  DesignBox design;
  std::uint64_t base_seed = 0;
  Matrix theta;  ///< N x d, parameter units
  Matrix data;   ///< N x width (summaries or flattened datasets)

  Index size() const { return theta.rows(); }
  /// Rows [begin, end).
  TrainingSet slice(Index begin, Index end) const;
};

struct PairGenerationOptions {
  std::size_t jobs = 1;
  int retry_cap = 3;
};

/// Pair i draws its design point and dataset from RngStream(base_seed, i); a
/// failed pair is regenerated from substreams 1..retry_cap of that stream.
TrainingSet generate_training_pairs(const GenerativeModel& model, Index n, std::uint64_t base_seed,
                                    const Featurizer& featurize = {}, const PairGenerationOptions& options = {});

void save_training_set(const TrainingSet& set, const std::string& path);
TrainingSet load_training_set(const std::string& path);
void export_training_set_csv(const TrainingSet& set, const std::vector<std::string>& theta_names,
                             const std::string& path);

/// Factory for the shipped models by name: ricker, mg1, lv, fn, gauss-mean.
std::unique_ptr<GenerativeModel> make_model(const std::string& name);

}  // namespace lfi
