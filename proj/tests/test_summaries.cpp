#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lfi/summaries.hpp"

using namespace lfi;

TEST_CASE("autocovariance") {
  CHECK(autocovariance(Vector::Constant(7, 3.0), 2) == 0.0);
  const Vector y{{1.0, 2.0, 3.0}};
  CHECK(autocovariance(y, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(autocovariance(y, 1) == doctest::Approx(0.0));
  CHECK(autocovariance(Vector{{1.0, 2.0}}, 1) == doctest::Approx(-0.125));
  CHECK_THROWS_AS(autocovariance(y, 3), InvalidArgument);
}

TEST_CASE("evenly spaced quantiles") {
  CHECK(quantiles_evenly_spaced(Vector::LinSpaced(11, 0.0, 10.0), 1)[0] == doctest::Approx(5.0));
  const Vector q = quantiles_evenly_spaced(Vector{{10.0, 0.0}}, 3);
  CHECK(q[0] == doctest::Approx(2.5));
  CHECK(q[1] == doctest::Approx(5.0));
  CHECK(q[2] == doctest::Approx(7.5));
  RngStream rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    Vector y(37);
    for (Index i = 0; i < y.size(); ++i) y[i] = sample_normal(rng, 0.0, 3.0);
    const Vector q18 = quantiles_evenly_spaced(y, 18);
    for (Index j = 1; j < 18; ++j) REQUIRE(q18[j] >= q18[j - 1]);
  }
  CHECK_THROWS_AS(quantiles_evenly_spaced(Vector(0), 3), InvalidArgument);
}

TEST_CASE("zero counts") {
  CHECK(count_zeros(Vector::Zero(5)) == 5);
  CHECK(count_zeros(Vector{{0.0, 1.0, 0.0, 2.0}}) == 2);
  CHECK(count_zeros(Vector::Constant(4, 0.5)) == 0);
}

TEST_CASE("ordered difference cubic regression") {
  CHECK(ordered_diff_cubic_coeffs(Vector::Constant(10, 4.0)).isZero());
  CHECK_THROWS_AS(ordered_diff_cubic_coeffs(Vector::Ones(4)), InvalidArgument);

  // Build y whose sorted differences are exactly 2 + sorted(y) with the largest dropped:
  // a sequence of increments that are themselves a function of the sorted values.
  RngStream rng(2);
  Vector y(40);
  y[0] = 0.3;
  for (Index t = 1; t < 40; ++t) y[t] = y[t - 1] + 0.1 + rng.uniform();
  const Vector ys = [&] {
    Vector s = y;
    std::sort(s.begin(), s.end());
    return Vector(s.head(39));
  }();
  // Regress an explicitly constructed response through the same design to get the oracle.
  Vector diffs = y.tail(39) - y.head(39);
  std::sort(diffs.begin(), diffs.end());
  const double mean = ys.mean();
  const double sd = std::sqrt((ys.array() - mean).square().sum() / 39.0);
  Matrix x(39, 4);
  const Vector z = (ys.array() - mean) / sd;
  x << Vector::Ones(39), z, z.array().square().matrix(), z.array().cube().matrix();
  const Vector oracle = (x.transpose() * x).ldlt().solve(x.transpose() * diffs);
  CHECK((ordered_diff_cubic_coeffs(y) - oracle).cwiseAbs().maxCoeff() < 1e-8);

  // Exact linear relation on the standardized scale: Delta = 2 + y gives slope sd.
  Matrix xl(39, 4);
  xl << Vector::Ones(39), z, z.array().square().matrix(), z.array().cube().matrix();
  const Vector resp = (2.0 + ys.array()).matrix();
  const Vector fit = least_squares(xl, resp);
  CHECK(fit[1] == doctest::Approx(sd).epsilon(1e-10));
  CHECK(std::abs(fit[2]) < 1e-10);
  CHECK(fit[0] == doctest::Approx(2.0 + mean).epsilon(1e-10));
}

TEST_CASE("power autoregression") {
  const Vector c = power_autoregression_coeffs(Vector::Ones(10));
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == 0.0);
  CHECK(c[2] == 0.0);

  Vector p(12);
  p[0] = 0.3;
  for (Index t = 1; t < 12; ++t) p[t] = 0.5 + 0.2 * p[t - 1];
  // p converges quickly; perturb the start so the regressors are not collinear.
  p[0] = 2.0;
  for (Index t = 1; t < 12; ++t) p[t] = 0.5 + 0.2 * p[t - 1];
  const Vector y = p.array().pow(1.0 / 0.3);
  const Vector b = power_autoregression_coeffs(y);
  CHECK(b[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(b[1] == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(std::abs(b[2]) < 1e-6);

  RngStream rng(3);
  Vector counts(200);
  for (Index i = 0; i < 200; ++i) counts[i] = double(sample_poisson(rng, 0.7));
  CHECK(power_autoregression_coeffs(counts).allFinite());
  CHECK_THROWS_AS(power_autoregression_coeffs(Vector{{1.0, -1.0, 2.0, 3.0}}), InvalidArgument);
}

TEST_CASE("fourier basis regression") {
  const Vector t = fn_default_obs_times();
  const Vector c = basis_regression_coeffs(Vector::Constant(t.size(), 2.5), Basis::fourier, 5, t);
  CHECK(c[0] == doctest::Approx(2.5));
  CHECK(c.tail(4).cwiseAbs().maxCoeff() < 1e-10);

  const double span = t[t.size() - 1] - t[0];
  const Vector y = (2.0 * std::numbers::pi * 2.0 * t.array() / span).cos();
  const Vector f = basis_regression_coeffs(y, Basis::fourier, 51, t);
  // Columns: const, cos1, sin1, cos2, ...
  CHECK(f[3] == doctest::Approx(1.0).epsilon(1e-9));
  Vector rest = f;
  rest[3] = 0.0;
  CHECK(rest.cwiseAbs().maxCoeff() < 1e-9);
  const Matrix x = basis_matrix(Basis::fourier, 51, t);
  const Vector oracle = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  CHECK((f - oracle).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(basis_regression_coeffs(y, Basis::fourier, 4, t), InvalidArgument);
}

TEST_CASE("b-spline basis") {
  const Vector t = Vector::LinSpaced(1000, 0.0, 30.0);
  const Matrix x = basis_matrix(Basis::cubic_bspline, 20, t);
  CHECK((x.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK((x.array() >= 0.0).all());
  const Vector c = basis_regression_coeffs(Vector::Ones(1000), Basis::cubic_bspline, 20, t);
  CHECK((x * c - Vector::Ones(1000)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(basis_matrix(Basis::cubic_bspline, 3, t), InvalidArgument);
}

TEST_CASE("full-size basis reproduces the data") {
  RngStream rng(4);
  const Index m = 12;
  Vector t(m), y(m);
  for (Index i = 0; i < m; ++i) {
    t[i] = double(i) + 0.3 * rng.uniform();
    y[i] = sample_normal(rng, 0.0, 1.0);
  }
  const Vector cb = basis_regression_coeffs(y, Basis::cubic_bspline, m, t);
  CHECK((basis_matrix(Basis::cubic_bspline, m, t) * cb - y).cwiseAbs().maxCoeff() < 1e-8);
  // Every Fourier column takes equal values at the two grid ends, so with k = m - 1
  // the basis spans exactly the data whose end values agree.
  Vector ts(m);
  for (Index i = 0; i < m; ++i) ts[i] = 11.0 * rng.uniform();
  std::sort(ts.begin(), ts.end());
  Vector y2 = y;
  y2[m - 1] = y2[0];
  const Vector cf = basis_regression_coeffs(y2, Basis::fourier, m - 1, ts);
  CHECK((basis_matrix(Basis::fourier, m - 1, ts) * cf - y2).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("cross correlation") {
  const Vector u{{1.0, 2.0, 3.0}};
  CHECK(cross_correlation(u, u) == doctest::Approx(1.0));
  CHECK(cross_correlation(u, -u) == doctest::Approx(-1.0));
  CHECK(cross_correlation(u, Vector{{1.0, 3.0, 2.0}}) == doctest::Approx(0.5));
  CHECK(cross_correlation(u, Vector::Ones(3)) == 0.0);
}

TEST_CASE("pipelines have the declared dimensions") {
  CHECK(SummaryPipeline::ricker().dimension() == 16);
  CHECK(SummaryPipeline::mg1().dimension() == 20);
  CHECK(SummaryPipeline::lv().dimension() == 73);
  CHECK(SummaryPipeline::fn().dimension() == 51);
  CHECK(SummaryPipeline::fn(5).dimension() == 5);
  PipelineOptions no_max;
  no_max.ricker_max = false;
  CHECK(SummaryPipeline::ricker(no_max).dimension() == 15);
  CHECK_THROWS_AS(SummaryPipeline::fn(4), InvalidArgument);
}

TEST_CASE("summaries are finite and fixed-length on simulated data") {
  for (const char* name : {"ricker", "mg1", "fn"}) {
    const auto model = make_model(name);
    const auto pipe = SummaryPipeline::for_model(*model);
    for (int i = 0; i < 1000; ++i) {
      RngStream rng(20, i);
      const Vector theta = model->to_parameter(sample_uniform_box(rng, model->design().lo, model->design().hi));
      const SummaryVector s = pipe.summarize(model->simulate(theta, rng));
      REQUIRE(s.values.size() == pipe.dimension());
      REQUIRE(s.values.allFinite());
    }
  }
}

TEST_CASE("lv summaries are finite and fixed-length") {
  const auto model = make_model("lv");
  const auto pipe = SummaryPipeline::for_model(*model);
  for (int i = 0; i < 60; ++i) {
    RngStream rng(21, i);
    const Vector theta = sample_uniform_box(rng, model->design().lo, model->design().hi);
    Dataset y;
    try {
      y = model->simulate(theta, rng);
    } catch (const SimulationError&) {
      continue;
    }
    const SummaryVector s = pipe.summarize(y);
    REQUIRE(s.values.size() == 73);
    REQUIRE(s.values.allFinite());
    // Cached projector and direct fit agree.
    const Vector direct = basis_regression_coeffs(y.values.col(0), Basis::cubic_bspline, 20, y.time);
    CHECK((s.values.segment(32, 20) - direct).cwiseAbs().maxCoeff() < 1e-8 * (1.0 + direct.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("mg1 summaries are permutation invariant, ricker autocovariances are not") {
  RngStream rng(5);
  const Dataset y = simulate_mg1(Vector{{4.0, 8.0, 1.0 / 6.0}}, 1000, rng);
  Matrix shuffled = y.values;
  for (Index i = shuffled.rows() - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.uniform() * double(i + 1));
    std::swap(shuffled(i, 0), shuffled(j, 0));
  }
  const auto mg = SummaryPipeline::mg1();
  CHECK(mg(y) == mg(Dataset(y.names, shuffled)));

  const Dataset r = simulate_ricker(Vector{{3.8, 0.3, 10.0}}, 1000, 2.0, rng);
  Matrix rs = r.values;
  for (Index i = rs.rows() - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.uniform() * double(i + 1));
    std::swap(rs(i, 0), rs(j, 0));
  }
  CHECK(autocovariance(r.values.col(0), 1) != autocovariance(rs.col(0), 1));
}

TEST_CASE("summaries are pure") {
  RngStream rng(6);
  const Dataset y = simulate_ricker(Vector{{3.0, 0.2, 2.0}}, 1000, 2.0, rng);
  const auto p = SummaryPipeline::ricker();
  CHECK(p(y) == p(y));
}

TEST_CASE("pipeline manifest round trip and mismatch") {
  for (const auto& p : {SummaryPipeline::ricker(), SummaryPipeline::mg1(), SummaryPipeline::fn(25),
                        SummaryPipeline::mean()}) {
    const auto back = SummaryPipeline::from_manifest(p.manifest());
    CHECK(back.schema() == p.schema());
    CHECK(back.manifest() == p.manifest());
  }
  std::string tampered = SummaryPipeline::mg1().manifest();
  tampered.replace(tampered.find("q18"), 3, "q99");
  CHECK_THROWS_AS(SummaryPipeline::from_manifest(tampered), SchemaMismatch);
  RngStream rng(7);
  const Dataset y = simulate_mg1(Vector{{4.0, 8.0, 1.0 / 6.0}}, 100, rng);
  CHECK_THROWS_AS(SummaryPipeline::ricker().summarize(y), SchemaMismatch);
}
