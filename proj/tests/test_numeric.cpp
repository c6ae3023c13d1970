#include <doctest.h>

#include <cmath>

#include "lfi/numeric.hpp"

using namespace lfi;

namespace {

template <class F>
std::pair<double, double> moments(F draw, int n) {
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = draw();
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  return {mean, s2 / n - mean * mean};
}

}  // namespace

TEST_CASE("rng streams are keyed by seed and stream id") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("substream does not depend on parent position") {
  RngStream a(1, 2);
  const auto before = a.substream(3);
  a.next_u64();
  auto s1 = before;
  auto s2 = a.substream(3);
  for (int i = 0; i < 10; ++i) CHECK(s1.next_u64() == s2.next_u64());
}

TEST_CASE("uniform lies in [0,1)") {
  RngStream r(3);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("normal sampler") {
  RngStream r(11);
  CHECK(sample_normal(r, 5.0, 0.0) == 5.0);
  const auto [m, v] = moments([&] { return sample_normal(r, 0.0, 1.0); }, 100000);
  CHECK(std::abs(m) < 0.01);
  const auto [m2, v2] = moments([&] { return sample_normal(r, 0.0, 2.0); }, 100000);
  CHECK(std::abs(v2 - 4.0) < 0.2);
  CHECK(std::abs(v - 1.0) < 4.0 * std::sqrt(2.0 / 100000));
  CHECK_THROWS_AS(sample_normal(r, NAN, 1.0), InvalidArgument);
  CHECK_THROWS_AS(sample_normal(r, 0.0, -1.0), InvalidArgument);
}

TEST_CASE("poisson sampler") {
  RngStream r(12);
  CHECK(sample_poisson(r, 0.0) == 0);
  const auto [m, v] = moments([&] { return double(sample_poisson(r, 4.0)); }, 100000);
  CHECK(std::abs(m - 4.0) < 0.02);
  CHECK(std::abs(v - 4.0) < 4.0 * 4.0 * std::sqrt(2.0 / 100000));
  int zeros = 0;
  for (int i = 0; i < 100000; ++i) zeros += sample_poisson(r, 1.0) == 0;
  CHECK(std::abs(zeros / 1e5 - std::exp(-1.0)) < 0.005);
  CHECK_THROWS_AS(sample_poisson(r, -1.0), InvalidArgument);
  CHECK_THROWS_AS(sample_poisson(r, INFINITY), InvalidArgument);
}

TEST_CASE("poisson sampler in the rejection regime") {
  RngStream r(13);
  for (double lambda : {30.0, 250.0, 5000.0}) {
    const auto [m, v] = moments([&] { return double(sample_poisson(r, lambda)); }, 100000);
    const double se_mean = std::sqrt(lambda / 1e5);
    CHECK(std::abs(m - lambda) < 4.0 * se_mean);
    CHECK(std::abs(v / lambda - 1.0) < 4.0 * std::sqrt(2.0 / 1e5) + 0.01);
  }
}

TEST_CASE("poisson pmf at lambda 30 matches the analytic mass") {
  RngStream r(14);
  const int n = 200000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += sample_poisson(r, 30.0) == 30;
  const double p = std::exp(-30.0 + 30.0 * std::log(30.0) - std::lgamma(31.0));
  CHECK(std::abs(hits / double(n) - p) < 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("exponential sampler") {
  RngStream r(15);
  const auto [m, v] = moments([&] { return sample_exponential(r, 1.0 / 6.0); }, 100000);
  CHECK(std::abs(m - 6.0) < 0.06);
  CHECK(exponential_quantile(0.5, 2.0) == doctest::Approx(-std::log(0.5) / 2.0));
  RngStream a(16), b(16);
  CHECK(sample_exponential(a, 3.0) == exponential_quantile(b.uniform(), 3.0));
  CHECK_THROWS_AS(sample_exponential(r, 0.0), InvalidArgument);
}

TEST_CASE("uniform box sampler") {
  RngStream r(17);
  Vector lo{{1.0}}, hi{{1.0 + 1e-12}};
  for (int i = 0; i < 1000; ++i) {
    const double x = sample_uniform_box(r, lo, hi)[0];
    REQUIRE(x >= lo[0]);
    REQUIRE(x < hi[0]);
  }
  const auto [m, v] = moments([&] { return sample_uniform_box(r, Vector{{2.0}}, Vector{{5.0}})[0]; }, 100000);
  CHECK(std::abs(m - 3.5) < 0.01);
  CHECK_THROWS_AS(sample_uniform_box(r, Vector{{0.0}}, Vector{{0.0}}), InvalidArgument);
  CHECK_THROWS_AS(sample_uniform_box(r, Vector{{0.0}}, Vector{{1.0, 2.0}}), InvalidArgument);
}

TEST_CASE("event index sampler") {
  RngStream r(18);
  for (int i = 0; i < 100; ++i) CHECK(sample_event_index(r, Vector{{0.0, 1.0, 0.0}}) == 1);
  int ones = 0;
  for (int i = 0; i < 100000; ++i) ones += sample_event_index(r, Vector{{1.0, 1.0}}) == 1;
  CHECK(std::abs(ones / 1e5 - 0.5) < 0.005);
  CHECK_THROWS_AS(sample_event_index(r, Vector{{0.0, 0.0}}), InvalidArgument);
  CHECK_THROWS_AS(sample_event_index(r, Vector{{1.0, -1.0}}), InvalidArgument);
}

TEST_CASE("samplers are bit-reproducible") {
  RngStream a(99, 1), b(99, 1);
  for (int i = 0; i < 50; ++i) {
    CHECK(sample_normal(a, 1.0, 2.0) == sample_normal(b, 1.0, 2.0));
    CHECK(sample_poisson(a, 100.0) == sample_poisson(b, 100.0));
    CHECK(sample_exponential(a, 0.3) == sample_exponential(b, 0.3));
  }
}

TEST_CASE("cholesky") {
  CHECK(cholesky(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3)));
  Matrix a{{4.0, 2.0}, {2.0, 3.0}};
  const Matrix l = cholesky(a);
  CHECK(l(0, 1) == 0.0);
  CHECK((l * l.transpose() - a).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(cholesky(Matrix{{1.0, 2.0}, {2.0, 1.0}}), DecompositionError);
  CHECK_THROWS_AS(cholesky(Matrix(2, 3)), DecompositionError);
  CHECK_THROWS_AS(cholesky(Matrix{{1.0, 0.5}, {0.4, 1.0}}), DecompositionError);
}

TEST_CASE("cholesky with jitter reconstructs the loaded matrix") {
  RngStream r(21);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix x(6, 4);
    for (Index i = 0; i < x.size(); ++i) x(i) = sample_normal(r, 0.0, 1.0);
    const Matrix a = x.transpose() * x;
    const Matrix l = cholesky(a, Jitter::fixed(0.5));
    const Matrix target = a + 0.5 * Matrix::Identity(4, 4);
    CHECK(((l * l.transpose() - target).array().abs() <= 1e-10 * (1.0 + target.array().abs())).all());
  }
  // Rank-one plus automatic jitter becomes positive definite.
  Vector v{{1.0, 2.0, 3.0}};
  const Matrix rank1 = v * v.transpose();
  CHECK_NOTHROW(cholesky(rank1, Jitter::automatic()));
  CHECK(Jitter::automatic().resolve(rank1) == doctest::Approx(1e-8 * 14.0 / 3.0));
}

TEST_CASE("least squares") {
  Vector y{{1.0, 2.0, 3.0}};
  CHECK((least_squares(Matrix::Identity(3, 3), y) - y).norm() < 1e-14);
  Matrix x(5, 2);
  Vector line(5);
  for (int i = 0; i < 5; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i;
    line[i] = 2.0 * i + 1.0;
  }
  const Vector beta = least_squares(x, line);
  CHECK(std::abs(beta[0] - 1.0) < 1e-10);
  CHECK(std::abs(beta[1] - 2.0) < 1e-10);

  RngStream r(22);
  Matrix xr(20, 3);
  Vector yr(20);
  for (Index i = 0; i < xr.size(); ++i) xr(i) = sample_normal(r, 0.0, 1.0);
  for (Index i = 0; i < 20; ++i) yr[i] = sample_normal(r, 0.0, 1.0);
  const Vector b = least_squares(xr, yr);
  const Vector oracle = (xr.transpose() * xr).inverse() * xr.transpose() * yr;
  CHECK((b - oracle).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((xr.transpose() * (yr - xr * b)).cwiseAbs().maxCoeff() < 1e-8);

  Matrix deficient(4, 2);
  deficient << 1, 2, 1, 2, 1, 2, 1, 2;
  CHECK_THROWS_WITH_AS(least_squares(deficient, Vector::Ones(4)), doctest::Contains("2 columns"),
                       SingularSystemError);
}
