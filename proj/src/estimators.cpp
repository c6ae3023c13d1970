#include "lfi/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lfi/text.hpp"

namespace lfi {

// --- Reconstruction maps -------------------------------------------------------------

Vector FittedReconstructionMap::features(const Dataset& data) const {
  if (pipeline) return pipeline->summarize(data).values;
  return data.flatten();
}

namespace {

std::string join_sizes(const std::vector<Index>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "x" : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

FittedReconstructionMap fit_map_on(const TrainingSet& set, const GenerativeModel& model,
                                   std::optional<SummaryPipeline> pipeline, const FitOptions& options) {
  if (!(options.validation_fraction > 0.0 && options.validation_fraction < 1.0))
    throw ConfigError("fit: validation fraction must lie in (0, 1)");
  const Index n = set.size();
  const auto n_val = static_cast<Index>(std::llround(static_cast<double>(n) * options.validation_fraction));
  if (n_val < 1 || n - n_val < 1) throw ConfigError("fit: need at least one training and one validation pair");
  const Index n_train = n - n_val;
  TrainResult r = train(set.data.topRows(n_train), set.theta.topRows(n_train), set.data.bottomRows(n_val),
                        set.theta.bottomRows(n_val), model.parameter_bounds(), options.train);

  FittedReconstructionMap map;
  map.model = model.name();
  map.pipeline = std::move(pipeline);
  map.network = std::move(r.network);
  map.history = std::move(r.history);
  std::ostringstream os;
  os << "method=" << (map.pipeline ? "rmdr" : "rm") << ";model=" << map.model << ";n=" << n << ";n_val=" << n_val
     << ";data_seed=" << set.base_seed << ";train_seed=" << options.train.seed
     << ";layers=" << join_sizes(map.network.sizes()) << ";batch=" << options.train.batch_size
     << ";alpha=" << format_double(options.train.alpha) << ";epochs=" << map.history.val_loss.size()
     << ";best_epoch=" << map.history.best_epoch;
  map.provenance = os.str();
  return map;
}

FittedReconstructionMap fit_rm(const GenerativeModel& model, const FitOptions& options) {
  PairGenerationOptions gen;
  gen.jobs = options.jobs;
  const TrainingSet set = generate_training_pairs(model, options.n, options.data_seed, {}, gen);
  return fit_map_on(set, model, std::nullopt, options);
}

FittedReconstructionMap fit_rmdr(const GenerativeModel& model, const SummaryPipeline& pipeline,
                                 const FitOptions& options) {
  if (pipeline.model() != model.name())
    throw SchemaMismatch("pipeline '" + pipeline.id() + "' is for model '" + pipeline.model() + "', not '" +
                         model.name() + "'");
  PairGenerationOptions gen;
  gen.jobs = options.jobs;
  const TrainingSet set = generate_training_pairs(model, options.n, options.data_seed, pipeline.featurizer(), gen);
  return fit_map_on(set, model, pipeline, options);
}

ParameterVector estimate_from_features(const FittedReconstructionMap& map, const Eigen::Ref<const Vector>& features) {
  if (features.size() != map.network.input_size())
    throw SchemaMismatch("map expects " + std::to_string(map.network.input_size()) + " inputs, got " +
                         std::to_string(features.size()));
  return map.network.predict(features);
}

ParameterVector estimate(const FittedReconstructionMap& map, const Dataset& data) {
  return estimate_from_features(map, map.features(data));
}

void save_map(const FittedReconstructionMap& map, const std::string& path) {
  ModelBundle b;
  b.model = map.model;
  b.pipeline_manifest = map.pipeline ? map.pipeline->manifest() : "";
  b.provenance = map.provenance;
  b.network = map.network;
  save_model(b, path);
}

FittedReconstructionMap load_map(const std::string& path) {
  ModelBundle b = load_model(path);
  FittedReconstructionMap map;
  map.model = b.model;
  if (!b.pipeline_manifest.empty()) {
    map.pipeline = SummaryPipeline::from_manifest(b.pipeline_manifest);
    if (map.pipeline->dimension() != b.network.input_size())
      throw SchemaMismatch("bundle pipeline dimension does not match the network input");
  }
  map.provenance = std::move(b.provenance);
  map.network = std::move(b.network);
  return map;
}

// --- Synthetic likelihood ----------------------------------------------------------------

double sle_loglik(const ParameterVector& theta, const Eigen::Ref<const Vector>& s_obs, const GenerativeModel& model,
                  const SummaryPipeline& pipeline, const SleConfig& cfg) {
  const Index k = pipeline.dimension();
  if (cfg.n_s <= k)
    throw ConfigError("synthetic likelihood: n_s (" + std::to_string(cfg.n_s) + ") must exceed K (" +
                      std::to_string(k) + ")");
  if (s_obs.size() != k) throw SchemaMismatch("synthetic likelihood: observed summary has the wrong length");
  Matrix s(k, cfg.n_s);
  try {
    for (Index j = 0; j < cfg.n_s; ++j) {
      RngStream rng(cfg.seed, static_cast<std::uint64_t>(j));
      s.col(j) = pipeline.summarize(model.simulate(theta, rng)).values;
    }
  } catch (const Error&) {
    return cfg.penalty;
  } catch (const InvalidArgument&) {
    return cfg.penalty;
  }
  const Vector mu = s.rowwise().mean();
  const Matrix centered = s.colwise() - mu;
  const Matrix sigma = centered * centered.transpose() / static_cast<double>(cfg.n_s);
  Matrix l;
  try {
    l = cholesky(sigma, cfg.jitter);
  } catch (const DecompositionError&) {
    return cfg.penalty;
  }
  const Vector z = l.triangularView<Eigen::Lower>().solve(s_obs - mu);
  const double value = -0.5 * z.squaredNorm() - 0.5 * log_det_from_cholesky(l);
  return std::isfinite(value) ? value : cfg.penalty;
}

ParameterVector sle_estimate(const Dataset& data, const GenerativeModel& model, const SummaryPipeline& pipeline,
                             const SleConfig& cfg, OptResult* details) {
  if (cfg.n_s <= pipeline.dimension())
    throw ConfigError("synthetic likelihood: n_s (" + std::to_string(cfg.n_s) + ") must exceed K (" +
                      std::to_string(pipeline.dimension()) + ")");
  const Vector s_obs = pipeline.summarize(data).values;
  ObjectiveSpec spec;
  spec.bounds = model.design();
  spec.seed = cfg.seed;
  spec.penalty = -cfg.penalty;
  spec.objective = [&](const Vector& u) { return -sle_loglik(model.to_parameter(u), s_obs, model, pipeline, cfg); };
  OptResult r = annealing_search(spec, cfg.search);
  if (details) *details = r;
  return model.to_parameter(r.argmin);
}

// --- ABC ------------------------------------------------------------------------------

void AbcConfig::validate() const {
  if (!(bandwidth >= 0.0)) throw ConfigError("abc: bandwidth must be >= 0");
  if (burn_in < 0 || burn_in >= chain_length) throw ConfigError("abc: require 0 <= burn_in < chain_length");
  if (temperatures.empty() || temperatures.front() != 1.0) throw ConfigError("abc: temperature ladder must start at 1");
  for (std::size_t i = 1; i < temperatures.size(); ++i)
    if (!(temperatures[i] > temperatures[i - 1])) throw ConfigError("abc: temperatures must be strictly increasing");
  if (swap_every < 1) throw ConfigError("abc: swap interval must be >= 1");
  if (pilot_simulations < 20) throw ConfigError("abc: need at least 20 pilot simulations");
  if (!(pilot_quantile > 0.0 && pilot_quantile < 1.0)) throw ConfigError("abc: pilot quantile must lie in (0, 1)");
  if (!(target_acceptance_lo > 0.0 && target_acceptance_lo < target_acceptance_hi && target_acceptance_hi < 1.0))
    throw ConfigError("abc: bad acceptance target range");
}

namespace {

struct AbcState {
  Vector u;  ///< design coordinates
  double dist2 = std::numeric_limits<double>::infinity();
};

double fold_into(double x, double lo, double hi) {
  const double w = hi - lo;
  double y = std::fmod(x - lo, 2.0 * w);
  if (y < 0.0) y += 2.0 * w;
  if (y > w) y = 2.0 * w - y;
  return std::clamp(lo + y, lo, hi);
}

class AbcTarget {
 public:
  AbcTarget(const GenerativeModel& model, const SummaryPipeline& pipeline, const Vector& s_obs, const Vector& scale)
      : model_(model), pipeline_(pipeline), s_obs_(s_obs), scale_(scale) {}

  void configure(double h, const std::vector<double>& temps, const Vector& proposal) {
    h2_.clear();
    step_.clear();
    for (double t : temps) {
      h2_.push_back(h * h * t);
      step_.push_back(std::sqrt(t));
    }
    proposal_ = proposal;
  }

  double distance2(const Vector& u, RngStream& rng) const {
    try {
      const Vector s = pipeline_.summarize(model_.simulate(model_.to_parameter(u), rng)).values;
      return (s - s_obs_).cwiseQuotient(scale_).squaredNorm();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    } catch (const InvalidArgument&) {
      return std::numeric_limits<double>::infinity();
    }
  }

  AbcState propose(const AbcState& s, Index rung, RngStream& rng) const {
    const DesignBox& box = model_.design();
    AbcState next;
    next.u = s.u;
    const double m = step_[static_cast<std::size_t>(rung)];
    for (Index j = 0; j < next.u.size(); ++j)
      next.u[j] = fold_into(s.u[j] + m * proposal_[j] * sample_normal(rng, 0.0, 1.0), box.lo[j], box.hi[j]);
    next.dist2 = distance2(next.u, rng);
    return next;
  }

  double log_weight(const AbcState& s, Index rung) const {
    if (!std::isfinite(s.dist2)) return -std::numeric_limits<double>::infinity();
    return -0.5 * s.dist2 / h2_[static_cast<std::size_t>(rung)];
  }

 private:
  const GenerativeModel& model_;
  const SummaryPipeline& pipeline_;
  const Vector& s_obs_;
  Vector scale_;
  std::vector<double> h2_;
  std::vector<double> step_;
  Vector proposal_;
};

Vector column_sd(const Matrix& x) {
  const Vector mean = x.colwise().mean().transpose();
  Vector sd(x.cols());
  for (Index j = 0; j < x.cols(); ++j)
    sd[j] = std::sqrt((x.col(j).array() - mean[j]).square().sum() / static_cast<double>(std::max<Index>(x.rows() - 1, 1)));
  return sd;
}

}  // namespace

AbcResult abc_estimate(const Dataset& data, const GenerativeModel& model, const SummaryPipeline& pipeline,
                       const AbcConfig& cfg) {
  cfg.validate();
  const DesignBox& box = model.design();
  const Index d = box.dim();
  const Vector s_obs = pipeline.summarize(data).values;
  const Index k = s_obs.size();

  // Pilot: prior-predictive summaries set sigma_S, h and the initial proposal.
  RngStream pilot_rng(cfg.seed, 0x70696c6f74ull);
  std::vector<Vector> pilot_u, pilot_s;
  for (Index i = 0; i < cfg.pilot_simulations; ++i) {
    const Vector u = sample_uniform_box(pilot_rng, box.lo, box.hi);
    try {
      pilot_s.push_back(pipeline.summarize(model.simulate(model.to_parameter(u), pilot_rng)).values);
      pilot_u.push_back(u);
    } catch (const Error&) {
    } catch (const InvalidArgument&) {
    }
  }
  if (pilot_s.size() < 20) throw SimulationError("abc: too many failed pilot simulations");
  const auto np = static_cast<Index>(pilot_s.size());
  Matrix ps(np, k), pu(np, d);
  for (Index i = 0; i < np; ++i) {
    ps.row(i) = pilot_s[static_cast<std::size_t>(i)].transpose();
    pu.row(i) = pilot_u[static_cast<std::size_t>(i)].transpose();
  }
  AbcResult result;
  result.summary_scale = cfg.summary_scale.size() ? cfg.summary_scale : Vector(column_sd(ps).cwiseMax(1e-12));
  if (result.summary_scale.size() != k) throw ConfigError("abc: summary scale has the wrong length");

  Vector dist(np);
  for (Index i = 0; i < np; ++i) dist[i] = (ps.row(i).transpose() - s_obs).cwiseQuotient(result.summary_scale).norm();
  std::vector<Index> order(static_cast<std::size_t>(np));
  for (Index i = 0; i < np; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return dist[a] < dist[b]; });
  Vector sorted_dist(np);
  for (Index i = 0; i < np; ++i) sorted_dist[i] = dist[order[static_cast<std::size_t>(i)]];

  double h = cfg.bandwidth;
  if (h == 0.0) {
    const double pos = cfg.pilot_quantile * static_cast<double>(np - 1);
    const auto lo = static_cast<Index>(std::floor(pos));
    h = sorted_dist[lo] + (pos - static_cast<double>(lo)) * (sorted_dist[std::min(lo + 1, np - 1)] - sorted_dist[lo]);
    if (!(h > 0.0)) h = std::max(sorted_dist[np - 1] * 1e-3, 1e-12);
  }
  Vector proposal = cfg.proposal_scale;
  if (proposal.size() == 0) {
    const Index near = std::max<Index>(5, static_cast<Index>(std::ceil(cfg.pilot_quantile * static_cast<double>(np))));
    Matrix nearest(near, d);
    for (Index i = 0; i < near; ++i) nearest.row(i) = pu.row(order[static_cast<std::size_t>(i)]);
    proposal = column_sd(nearest).cwiseMax(1e-3 * box.width());
  }
  if (proposal.size() != d) throw ConfigError("abc: proposal scale has the wrong length");

  AbcTarget target(model, pipeline, s_obs, result.summary_scale);
  AbcState start;
  start.u = pu.row(order[0]).transpose();
  start.dist2 = sorted_dist[0] * sorted_dist[0];

  // Tune h on short single-rung runs until the acceptance rate is in range.
  const bool tune_h = cfg.bandwidth == 0.0;
  const bool tune_proposal = cfg.proposal_scale.size() == 0;
  for (Index round = 0; round < cfg.tuning_rounds && (tune_h || tune_proposal); ++round) {
    target.configure(h, {1.0}, proposal);
    TemperingOptions opt;
    opt.steps = cfg.tuning_steps;
    opt.burn_in = 0;
    const auto run = run_tempering<AbcState>(target, {start}, opt, hash_combine64(cfg.seed, 100 + static_cast<std::uint64_t>(round)));
    const double acc = run.diagnostics.acceptance[0];
    start = run.cold.back();
    if (tune_proposal && acc > 0.0) {
      Matrix states(static_cast<Index>(run.cold.size()), d);
      for (std::size_t i = 0; i < run.cold.size(); ++i) states.row(static_cast<Index>(i)) = run.cold[i].u.transpose();
      const Vector sd = column_sd(states);
      if ((sd.array() > 0.0).all())
        proposal = (2.38 / std::sqrt(static_cast<double>(d)) * sd).cwiseMax(1e-3 * box.width());
    }
    if (!tune_h) continue;
    if (acc < cfg.target_acceptance_lo) h *= 1.5;
    else if (acc > cfg.target_acceptance_hi) h /= 1.5;
    else break;
  }
  result.bandwidth = h;
  result.proposal_scale = proposal;

  target.configure(h, cfg.temperatures, proposal);
  TemperingOptions opt;
  opt.steps = cfg.chain_length;
  opt.burn_in = cfg.burn_in;
  opt.swap_every = cfg.swap_every;
  std::vector<AbcState> init(cfg.temperatures.size(), start);
  // Hot rungs start from their own re-simulated distance at the start point.
  for (std::size_t r = 1; r < init.size(); ++r) {
    RngStream rng(cfg.seed, 0x696e6974ull + r);
    init[r].dist2 = target.distance2(start.u, rng);
  }
  const auto run = run_tempering<AbcState>(target, init, opt, hash_combine64(cfg.seed, 0x6d61696eull));
  result.diagnostics = run.diagnostics;

  result.cold_chain.resize(static_cast<Index>(run.cold.size()), d);
  Matrix thetas(static_cast<Index>(run.cold.size()), model.parameter_dimension());
  for (std::size_t i = 0; i < run.cold.size(); ++i) {
    result.cold_chain.row(static_cast<Index>(i)) = run.cold[i].u.transpose();
    thetas.row(static_cast<Index>(i)) = model.to_parameter(run.cold[i].u).transpose();
  }
  result.theta = thetas.colwise().mean().transpose();
  result.ess = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < thetas.cols(); ++j) result.ess = std::min(result.ess, effective_sample_size(thetas.col(j)));
  const double cold_acc = result.diagnostics.acceptance[0];
  if (cold_acc < 0.01 || cold_acc > 0.6)
    result.warnings.push_back("cold-chain acceptance " + format_double(cold_acc) + " outside [0.01, 0.6]");
  return result;
}

// --- Likelihood-based ---------------------------------------------------------------

namespace {

/// A failed likelihood evaluation becomes +inf, which the optimizer penalizes.
double safe_negative(const LogLikelihood& loglik, const Vector& theta) {
  try {
    return -loglik(theta);
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

ParameterVector rmdrlo_estimate(const Dataset& data, const FittedReconstructionMap& map, const LogLikelihood& loglik,
                                const ObjectiveSpec& spec, const NelderMeadOptions& options, OptResult* details) {
  const Vector theta0 = spec.bounds.clamp(estimate(map, data));
  ObjectiveSpec s = spec;
  s.objective = [&](const Vector& theta) { return safe_negative(loglik, theta); };
  OptResult r = nelder_mead(s, theta0, options);
  if (details) *details = r;
  return r.argmin;
}

ParameterVector mle_estimate(const LogLikelihood& loglik, const ObjectiveSpec& spec, const AnnealingOptions& options,
                             OptResult* details) {
  ObjectiveSpec s = spec;
  s.objective = [&](const Vector& theta) { return safe_negative(loglik, theta); };
  OptResult r = annealing_search(s, options);
  if (details) *details = r;
  return r.argmin;
}

// --- Estimator wrappers --------------------------------------------------------------

Estimator make_map_estimator(std::string name, FittedReconstructionMap map) {
  auto shared = std::make_shared<const FittedReconstructionMap>(std::move(map));
  return {std::move(name), [shared](const Dataset& y, std::uint64_t) {
            return EstimateRecord{estimate(*shared, y), {}};
          }};
}

Estimator make_sle_estimator(const GenerativeModel& model, SummaryPipeline pipeline, SleConfig cfg) {
  auto pipe = std::make_shared<const SummaryPipeline>(std::move(pipeline));
  return {"SLE", [&model, pipe, cfg](const Dataset& y, std::uint64_t seed) {
            SleConfig c = cfg;
            c.seed = seed;
            OptResult details;
            EstimateRecord rec{sle_estimate(y, model, *pipe, c, &details), {}};
            rec.diagnostics["evaluations"] = static_cast<double>(details.evaluations);
            rec.diagnostics["neg_loglik"] = details.value;
            return rec;
          }};
}

Estimator make_abc_estimator(const GenerativeModel& model, SummaryPipeline pipeline, AbcConfig cfg) {
  auto pipe = std::make_shared<const SummaryPipeline>(std::move(pipeline));
  return {"ABC", [&model, pipe, cfg](const Dataset& y, std::uint64_t seed) {
            AbcConfig c = cfg;
            c.seed = seed;
            const AbcResult r = abc_estimate(y, model, *pipe, c);
            EstimateRecord rec{r.theta, {}};
            rec.diagnostics["bandwidth"] = r.bandwidth;
            rec.diagnostics["ess"] = r.ess;
            for (std::size_t i = 0; i < r.diagnostics.acceptance.size(); ++i)
              rec.diagnostics["acceptance_" + std::to_string(i)] = r.diagnostics.acceptance[i];
            for (std::size_t i = 0; i < r.diagnostics.swap_rate.size(); ++i)
              rec.diagnostics["swap_rate_" + std::to_string(i)] = r.diagnostics.swap_rate[i];
            rec.diagnostics["warnings"] = static_cast<double>(r.warnings.size());
            return rec;
          }};
}

Estimator make_rmdrlo_estimator(const FnModel& model, FittedReconstructionMap map, Index budget) {
  auto shared = std::make_shared<const FittedReconstructionMap>(std::move(map));
  return {"RM-DRLO", [&model, shared, budget](const Dataset& y, std::uint64_t) {
            const Vector obs = y.values.col(0);
            ObjectiveSpec spec;
            spec.bounds = model.design();
            spec.budget = budget;
            NelderMeadOptions nm;
            nm.tol = 1e-6;
            nm.initial_step = 0.02 * spec.bounds.width();
            OptResult details;
            EstimateRecord rec{
                rmdrlo_estimate(y, *shared, [&](const Vector& t) { return model.log_likelihood(t, obs); }, spec, nm,
                                &details),
                {}};
            rec.diagnostics["evaluations"] = static_cast<double>(details.evaluations);
            return rec;
          }};
}

Estimator make_fn_mle_estimator(const FnModel& model, AnnealingOptions options) {
  return {"MLE", [&model, options](const Dataset& y, std::uint64_t seed) {
            const Vector obs = y.values.col(0);
            ObjectiveSpec spec;
            spec.bounds = model.design();
            spec.seed = seed;
            OptResult details;
            EstimateRecord rec{
                mle_estimate([&](const Vector& t) { return model.log_likelihood(t, obs); }, spec, options, &details), {}};
            rec.diagnostics["evaluations"] = static_cast<double>(details.evaluations);
            return rec;
          }};
}

}  // namespace lfi
