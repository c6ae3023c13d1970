#include "lfi/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace lfi {

namespace {

/// Counts evaluations, enforces the box and the budget, and tracks the best point.
class Evaluator {
 public:
  explicit Evaluator(const ObjectiveSpec& spec) : spec_(spec) {
    if (!spec.objective) throw InvalidArgument("optimizer: objective is empty");
    if (spec.budget < 1) throw InvalidArgument("optimizer: budget must be >= 1");
  }

  bool exhausted() const { return evaluations_ >= spec_.budget; }
  Index evaluations() const { return evaluations_; }

  double operator()(const Vector& x) {
    ++evaluations_;
    double f = spec_.objective(x);
    if (!std::isfinite(f)) f = spec_.penalty;
    if (f < best_value_) {
      best_value_ = f;
      best_ = x;
    }
    return f;
  }

  const Vector& best() const { return best_; }
  double best_value() const { return best_value_; }

 private:
  const ObjectiveSpec& spec_;
  Index evaluations_ = 0;
  Vector best_;
  double best_value_ = std::numeric_limits<double>::infinity();
};

void check_bounds(const DesignBox& b) {
  if (b.dim() < 1) throw InvalidArgument("optimizer: empty bounds");
  for (Index i = 0; i < b.dim(); ++i)
    if (!(b.hi[i] > b.lo[i]) || !std::isfinite(b.lo[i]) || !std::isfinite(b.hi[i]))
      throw InvalidArgument("optimizer: bounds must be finite with positive width");
}

OptResult run_nelder_mead(const ObjectiveSpec& spec, const Vector& x0, const NelderMeadOptions& options,
                          Evaluator& eval) {
  const DesignBox& box = spec.bounds;
  const Index d = box.dim();
  if (x0.size() != d) throw InvalidArgument("nelder_mead: start point dimension mismatch");
  const Vector step = options.initial_step.value_or(0.05 * box.width());
  if (step.size() != d) throw InvalidArgument("nelder_mead: initial step dimension mismatch");

  OptResult result;
  std::vector<Vector> simplex{box.clamp(x0)};
  std::vector<double> f;
  f.push_back(eval(simplex[0]));
  for (Index i = 0; i < d && !eval.exhausted(); ++i) {
    Vector v = simplex[0];
    // Step inward when the positive step would leave the box.
    v[i] = v[i] + step[i] <= box.hi[i] ? v[i] + step[i] : v[i] - step[i];
    v = box.clamp(v);
    simplex.push_back(v);
    f.push_back(eval(v));
  }

  std::vector<std::size_t> order(simplex.size());
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
    std::vector<Vector> s2;
    std::vector<double> f2;
    for (auto i : order) {
      s2.push_back(simplex[i]);
      f2.push_back(f[i]);
    }
    simplex = std::move(s2);
    f = std::move(f2);
  };

  if (static_cast<Index>(simplex.size()) == d + 1) {
    for (;;) {
      sort_simplex();
      result.trace.push_back(f.front());
      if (f.back() - f.front() <= options.tol) {
        result.converged = true;
        break;
      }
      // A collapsed simplex cannot make progress on a surface with jumps.
      double spread = 0.0;
      for (std::size_t i = 1; i < simplex.size(); ++i)
        spread = std::max(spread, ((simplex[i] - simplex[0]).array() / box.width().array()).abs().maxCoeff());
      if (spread <= options.x_tol) {
        result.converged = true;
        break;
      }
      if (eval.exhausted()) break;
      Vector centroid = Vector::Zero(d);
      for (Index i = 0; i < d; ++i) centroid += simplex[static_cast<std::size_t>(i)];
      centroid /= static_cast<double>(d);
      const Vector& worst = simplex.back();

      const Vector xr = box.clamp(centroid + (centroid - worst));
      const double fr = eval(xr);
      if (fr < f.front()) {
        if (eval.exhausted()) {
          simplex.back() = xr;
          f.back() = fr;
          continue;
        }
        const Vector xe = box.clamp(centroid + 2.0 * (centroid - worst));
        const double fe = eval(xe);
        if (fe < fr) {
          simplex.back() = xe;
          f.back() = fe;
        } else {
          simplex.back() = xr;
          f.back() = fr;
        }
        continue;
      }
      if (fr < f[f.size() - 2]) {
        simplex.back() = xr;
        f.back() = fr;
        continue;
      }
      if (eval.exhausted()) continue;
      // Outside contraction when the reflection beat the worst point, inside otherwise.
      const bool outside = fr < f.back();
      const Vector xc = outside ? Vector(box.clamp(centroid + 0.5 * (xr - centroid)))
                                : Vector(box.clamp(centroid + 0.5 * (worst - centroid)));
      const double fc = eval(xc);
      if (fc < (outside ? fr : f.back())) {
        simplex.back() = xc;
        f.back() = fc;
        continue;
      }
      for (std::size_t i = 1; i < simplex.size() && !eval.exhausted(); ++i) {
        simplex[i] = box.clamp(simplex[0] + 0.5 * (simplex[i] - simplex[0]));
        f[i] = eval(simplex[i]);
      }
    }
  }
  // The best vertex is the best point evaluated in this run.
  std::size_t best = 0;
  for (std::size_t i = 1; i < f.size(); ++i)
    if (f[i] < f[best]) best = i;
  result.argmin = simplex[best];
  result.value = f[best];
  return result;
}

/// Folds a coordinate back into [lo, hi] by reflection.
double fold(double x, double lo, double hi) {
  const double w = hi - lo;
  double y = std::fmod(x - lo, 2.0 * w);
  if (y < 0.0) y += 2.0 * w;
  if (y > w) y = 2.0 * w - y;
  return std::clamp(lo + y, lo, hi);
}

}  // namespace

OptResult nelder_mead(const ObjectiveSpec& spec, const Vector& x0, const NelderMeadOptions& options) {
  check_bounds(spec.bounds);
  Evaluator eval(spec);
  OptResult r = run_nelder_mead(spec, x0, options, eval);
  r.evaluations = eval.evaluations();
  return r;
}

OptResult annealing_search(const ObjectiveSpec& spec, const AnnealingOptions& options) {
  check_bounds(spec.bounds);
  if (options.iterations_per_dim < 0 || options.initial_samples < 1)
    throw InvalidArgument("annealing_search: bad iteration settings");
  const DesignBox& box = spec.bounds;
  const Index d = box.dim();
  const Vector width = box.width();
  Evaluator eval(spec);
  RngStream rng(spec.seed, 0x616e6e65616cull);

  // Start from the best of a few uniform draws; their spread sets the temperature scale.
  Vector current;
  double f_current = std::numeric_limits<double>::infinity();
  double f_min = f_current, f_max = -f_current;
  for (Index i = 0; i < options.initial_samples && !eval.exhausted(); ++i) {
    const Vector x = sample_uniform_box(rng, box.lo, box.hi);
    const double fx = eval(x);
    f_min = std::min(f_min, fx);
    f_max = std::max(f_max, fx);
    if (fx < f_current) {
      f_current = fx;
      current = x;
    }
  }
  double spread = f_max - f_min;
  if (!(spread > 0.0) || !std::isfinite(spread)) spread = std::max(1.0, std::abs(f_min));
  const double t0 = options.initial_temperature_factor * spread;
  const Index iterations = options.iterations_per_dim * d;

  OptResult result;
  for (Index k = 0; k < iterations && !eval.exhausted(); ++k) {
    const double frac = iterations > 1 ? static_cast<double>(k) / static_cast<double>(iterations - 1) : 1.0;
    const double temp = t0 * std::pow(options.final_temperature_ratio, frac);
    // Visit width shrinks with the square root of the relative temperature.
    const double scale = std::sqrt(temp / t0);
    for (Index c = 0; c < 2 * d && !eval.exhausted(); ++c) {
      Vector x = current;
      auto visit = [&](Index j) {
        const double jump = scale * width[j] * std::tan(std::numbers::pi * (rng.uniform() - 0.5));
        x[j] = fold(x[j] + jump, box.lo[j], box.hi[j]);
      };
      if (c < d) {
        for (Index j = 0; j < d; ++j) visit(j);
      } else {
        visit(c - d);
      }
      const double fx = eval(x);
      const double delta = fx - f_current;
      if (delta <= 0.0 || rng.uniform() < std::exp(-delta / temp)) {
        current = x;
        f_current = fx;
      }
    }
    result.trace.push_back(eval.best_value());
  }

  if (options.polish && !eval.exhausted()) {
    NelderMeadOptions nm;
    nm.tol = options.polish_tol;
    nm.initial_step = 0.01 * width;
    const Vector start = eval.best();
    const OptResult polished = run_nelder_mead(spec, start, nm, eval);
    result.converged = polished.converged;
    result.trace.push_back(eval.best_value());
  }
  result.argmin = eval.best();
  result.value = eval.best_value();
  result.evaluations = eval.evaluations();
  return result;
}

}  // namespace lfi
