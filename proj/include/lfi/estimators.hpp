#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lfi/mlp.hpp"
#include "lfi/optimize.hpp"
#include "lfi/simulators.hpp"
#include "lfi/summaries.hpp"
#include "lfi/tempering.hpp"

namespace lfi {

// --- Reconstruction maps ---------------------------------------------------------

/// A trained map from data (RM) or summaries (RM-DR) to parameters.
struct FittedReconstructionMap {
  std::string model;
  std::optional<SummaryPipeline> pipeline;  ///< absent for RM
  MlpNetwork network;
  TrainHistory history;
  std::string provenance;

  bool reduces_dimension() const { return pipeline.has_value(); }
  /// Network input for a dataset: its summaries (RM-DR) or the flattened series (RM).
  Vector features(const Dataset& data) const;
};

struct FitOptions {
  Index n = 2000;                  ///< total simulated pairs
  double validation_fraction = 0.25;
  std::uint64_t data_seed = 0;     ///< base seed of the training pairs
  std::size_t jobs = 1;
  TrainConfig train;
};

/// Fits a map on pairs drawn from the model's design box.
FittedReconstructionMap fit_rm(const GenerativeModel& model, const FitOptions& options);
FittedReconstructionMap fit_rmdr(const GenerativeModel& model, const SummaryPipeline& pipeline,
                                 const FitOptions& options);
/// Fits on an existing training set whose `data` rows are the network inputs.
FittedReconstructionMap fit_map_on(const TrainingSet& set, const GenerativeModel& model,
                                   std::optional<SummaryPipeline> pipeline, const FitOptions& options);

/// Parameter estimate in model units; not clamped. Performs no simulation.
ParameterVector estimate(const FittedReconstructionMap& map, const Dataset& data);
ParameterVector estimate_from_features(const FittedReconstructionMap& map, const Eigen::Ref<const Vector>& features);

void save_map(const FittedReconstructionMap& map, const std::string& path);
FittedReconstructionMap load_map(const std::string& path);

// --- Synthetic likelihood --------------------------------------------------------

struct SleConfig {
  Index n_s = 100;
  Jitter jitter = Jitter::automatic();
  AnnealingOptions search;
  std::uint64_t seed = 0;
  double penalty = -1e10;
};

/// Gaussian synthetic log-likelihood of `s_obs` at theta from n_s simulated
/// summary vectors (mean and covariance with divisor n_s, no 2 pi constant).
/// Replicate j always draws from RngStream(seed, j), so the surface is a
/// deterministic function of theta for a given seed. Returns `penalty` when
/// the covariance cannot be factored or a replicate fails to simulate.
double sle_loglik(const ParameterVector& theta, const Eigen::Ref<const Vector>& s_obs, const GenerativeModel& model,
                  const SummaryPipeline& pipeline, const SleConfig& cfg);

/// Maximizes the synthetic likelihood over the design box by annealing.
ParameterVector sle_estimate(const Dataset& data, const GenerativeModel& model, const SummaryPipeline& pipeline,
                             const SleConfig& cfg, OptResult* details = nullptr);

// --- ABC with parallel tempering --------------------------------------------------

struct AbcConfig {
  double bandwidth = 0.0;        ///< h; 0 selects it by the pilot
  Index chain_length = 20000;
  Index burn_in = 5000;
  std::vector<double> temperatures{1.0, 2.0, 4.0, 8.0};
  Index swap_every = 10;
  Vector proposal_scale;         ///< per design coordinate; empty selects it by the pilot
  Vector summary_scale;          ///< sigma_S; empty selects it by the pilot
  Index pilot_simulations = 500;
  double pilot_quantile = 0.05;
  double target_acceptance_lo = 0.05;
  double target_acceptance_hi = 0.3;
  Index tuning_rounds = 8;
  Index tuning_steps = 400;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AbcResult {
  ParameterVector theta;
  double bandwidth = 0.0;
  Vector summary_scale;
  Vector proposal_scale;
  TemperingDiagnostics diagnostics;
  double ess = 0.0;  ///< minimum over coordinates of the cold chain
  Matrix cold_chain;  ///< post burn-in design-coordinate states, one per row
  std::vector<std::string> warnings;
};

/// Posterior mean under the kernel-smoothed ABC posterior with a uniform prior
/// on the design box. One synthetic dataset per proposal; Gaussian kernel on
/// summaries scaled by sigma_S; rung r uses bandwidth h * sqrt(T_r).
AbcResult abc_estimate(const Dataset& data, const GenerativeModel& model, const SummaryPipeline& pipeline,
                       const AbcConfig& cfg);

// --- Likelihood-based -------------------------------------------------------------

using LogLikelihood = std::function<double(const ParameterVector&)>;

/// theta_0 from the map (clamped to the box), then Nelder-Mead on -loglik.
/// `spec.objective` is ignored; the box, budget and penalty are used.
ParameterVector rmdrlo_estimate(const Dataset& data, const FittedReconstructionMap& map, const LogLikelihood& loglik,
                                const ObjectiveSpec& spec, const NelderMeadOptions& options = {},
                                OptResult* details = nullptr);

/// Global maximum-likelihood search by annealing over `spec.bounds`.
ParameterVector mle_estimate(const LogLikelihood& loglik, const ObjectiveSpec& spec, const AnnealingOptions& options = {},
                             OptResult* details = nullptr);

// --- Uniform estimator interface ------------------------------------------------------

struct EstimateRecord {
  ParameterVector theta;
  std::map<std::string, double> diagnostics;
};

/// Dataset in, estimate out. `seed` feeds any internal randomness.
struct Estimator {
  std::string name;
  std::function<EstimateRecord(const Dataset&, std::uint64_t seed)> run;
};

Estimator make_map_estimator(std::string name, FittedReconstructionMap map);
Estimator make_sle_estimator(const GenerativeModel& model, SummaryPipeline pipeline, SleConfig cfg);
Estimator make_abc_estimator(const GenerativeModel& model, SummaryPipeline pipeline, AbcConfig cfg);
/// FN only: RM-DRLO with the Gaussian observation likelihood.
Estimator make_rmdrlo_estimator(const FnModel& model, FittedReconstructionMap map, Index budget = 2000);
Estimator make_fn_mle_estimator(const FnModel& model, AnnealingOptions options = {});

}  // namespace lfi
