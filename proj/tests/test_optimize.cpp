#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lfi/optimize.hpp"

using namespace lfi;

namespace {

ObjectiveSpec spec_for(Objective f, Vector lo, Vector hi, Index budget = 100000, std::uint64_t seed = 0) {
  ObjectiveSpec s;
  s.objective = std::move(f);
  s.bounds = DesignBox(std::move(lo), std::move(hi));
  s.budget = budget;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("nelder-mead on a convex quadratic") {
  const Vector c{{0.3, -0.2, 0.7}};
  auto s = spec_for([&](const Vector& x) { return (x - c).squaredNorm(); }, Vector::Constant(3, -1.0),
                    Vector::Constant(3, 1.0));
  NelderMeadOptions o;
  o.tol = 1e-14;
  o.initial_step = Vector::Constant(3, 0.01);
  const OptResult r = nelder_mead(s, c + Vector::Constant(3, 0.01), o);
  CHECK(r.converged);
  CHECK((r.argmin - c).norm() < 1e-6);
  CHECK(r.evaluations < 200);
}

TEST_CASE("nelder-mead on rosenbrock") {
  auto s = spec_for([](const Vector& x) { return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2); },
                    Vector::Constant(2, -2.0), Vector::Constant(2, 2.0), 2000);
  NelderMeadOptions o;
  o.tol = 1e-14;
  const OptResult r = nelder_mead(s, Vector::Zero(2), o);
  CHECK(r.value < 1e-6);
  CHECK((r.argmin - Vector::Ones(2)).norm() < 1e-2);
  CHECK(r.evaluations <= 2000);
}

TEST_CASE("nelder-mead stops on a collapsed simplex across a jump") {
  auto s = spec_for([](const Vector& x) { return (x[0] > 0.3 ? 1.0 : 0.0) + 0.1 * x[1] * x[1]; },
                    Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
  const OptResult r = nelder_mead(s, Vector{{0.5, 0.5}});
  CHECK(r.converged);
  CHECK(r.evaluations < 2000);
  CHECK(r.value <= 1.025);
}

TEST_CASE("nelder-mead with budget one returns the start") {
  auto s = spec_for([](const Vector& x) { return x.squaredNorm(); }, Vector::Constant(2, -1.0), Vector::Constant(2, 1.0), 1);
  const OptResult r = nelder_mead(s, Vector::Constant(2, 0.5));
  CHECK_FALSE(r.converged);
  CHECK(r.evaluations == 1);
  CHECK(r.argmin == Vector::Constant(2, 0.5));
  CHECK(r.value == 0.5);
}

TEST_CASE("nelder-mead started at the optimum stays there") {
  auto s = spec_for([](const Vector& x) { return (x - Vector{{0.25, 0.5}}).squaredNorm(); }, Vector::Zero(2),
                    Vector::Ones(2));
  const OptResult r = nelder_mead(s, Vector{{0.25, 0.5}});
  CHECK(r.argmin == Vector{{0.25, 0.5}});
  CHECK(r.value == 0.0);
}

TEST_CASE("optimizers never leave the box") {
  const Vector lo{{0.0, 1.0}}, hi{{1.0, 2.0}};
  bool outside = false;
  auto f = [&](const Vector& x) {
    if ((x.array() < lo.array()).any() || (x.array() > hi.array()).any()) outside = true;
    return -(x[0] + x[1]);  // optimum at the upper corner
  };
  const OptResult a = nelder_mead(spec_for(f, lo, hi), Vector{{0.5, 1.5}});
  const OptResult b = annealing_search(spec_for(f, lo, hi, 100000, 3));
  CHECK_FALSE(outside);
  CHECK((a.argmin - hi).norm() < 1e-4);
  CHECK((b.argmin - hi).norm() < 1e-4);
}

TEST_CASE("annealing finds one of the two global minima") {
  auto s = spec_for([](const Vector& x) { return std::pow(x[0] * x[0] - 1.0, 2); }, Vector{{-2.0}}, Vector{{2.0}});
  const OptResult r = annealing_search(s);
  CHECK(std::abs(std::abs(r.argmin[0]) - 1.0) < 1e-3);
}

TEST_CASE("annealing finds the rastrigin global basin") {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = spec_for([](const Vector& x) { return 10.0 + x[0] * x[0] - 10.0 * std::cos(2.0 * std::numbers::pi * x[0]); },
                      Vector{{-5.0}}, Vector{{5.0}}, 100000, seed);
    hits += std::abs(annealing_search(s).argmin[0]) < 0.5;
  }
  CHECK(hits >= 19);
}

TEST_CASE("annealing is deterministic and never worse than its initial draws") {
  int calls = 0;
  double first_best = INFINITY;
  auto f = [&](const Vector& x) {
    const double v = std::sin(3.0 * x[0]) * std::cos(2.0 * x[1]) + 0.1 * x.squaredNorm();
    if (calls++ < 10) first_best = std::min(first_best, v);
    return v;
  };
  const OptResult a = annealing_search(spec_for(f, Vector::Constant(2, -3.0), Vector::Constant(2, 3.0), 100000, 9));
  calls = 0;
  const OptResult b = annealing_search(spec_for(f, Vector::Constant(2, -3.0), Vector::Constant(2, 3.0), 100000, 9));
  CHECK(a.argmin == b.argmin);
  CHECK(a.value == b.value);
  CHECK(a.evaluations == b.evaluations);
  CHECK(a.value <= first_best);
  for (std::size_t i = 1; i < a.trace.size(); ++i) CHECK(a.trace[i] <= a.trace[i - 1]);
}

TEST_CASE("annealing rejects degenerate bounds") {
  ObjectiveSpec s;
  s.objective = [](const Vector& x) { return x[0]; };
  s.bounds.lo = Vector{{1.0}};
  s.bounds.hi = Vector{{1.0}};
  CHECK_THROWS_AS(annealing_search(s), InvalidArgument);
}

TEST_CASE("non-finite objective values become the penalty") {
  auto s = spec_for([](const Vector& x) { return x[0] < 0.5 ? NAN : (x[0] - 0.7) * (x[0] - 0.7); }, Vector{{0.0}},
                    Vector{{1.0}});
  const OptResult r = annealing_search(s);
  CHECK(std::abs(r.argmin[0] - 0.7) < 1e-4);
}
