#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "lfi/numeric.hpp"
#include "lfi/simulators.hpp"

namespace lfi {

using Objective = std::function<double(const Vector&)>;

/// A function to minimize over a box. Non-finite objective values are
/// replaced by `penalty`.
struct ObjectiveSpec {
  Objective objective;
  DesignBox bounds;
  Index budget = 100000;  ///< maximum objective evaluations
  std::uint64_t seed = 0;
  double penalty = 1e10;
};

struct OptResult {
  Vector argmin;
  double value = 0.0;
  Index evaluations = 0;
  bool converged = false;
  std::vector<double> trace;  ///< best value after each iteration
};

struct NelderMeadOptions {
  double tol = 1e-8;  ///< stop when max |f_i - f_best| over the simplex is below this
  double x_tol = 1e-10;  ///< or when every vertex is this close to the best, relative to the box width
  /// Initial simplex edge per coordinate; defaults to 5% of the box width.
  std::optional<Vector> initial_step;
};

/// Simplex search with reflection 1, expansion 2, contraction 0.5, shrink 0.5.
/// Proposals are clamped to the box.
OptResult nelder_mead(const ObjectiveSpec& spec, const Vector& x0, const NelderMeadOptions& options = {});

struct AnnealingOptions {
  Index iterations_per_dim = 200;  ///< global phase length is this times d
  Index initial_samples = 10;      ///< uniform draws used to pick the start and the temperature scale
  double initial_temperature_factor = 5e3;
  double final_temperature_ratio = 1e-6;  ///< T_min / T0
  double polish_tol = 1e-8;
  bool polish = true;
};

/// Simulated annealing with Cauchy visits folded into the box and a geometric
/// temperature schedule, followed by a Nelder-Mead polish from the best point.
/// Each global iteration proposes d full moves and then d single-coordinate moves.
OptResult annealing_search(const ObjectiveSpec& spec, const AnnealingOptions& options = {});

}  // namespace lfi
