#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "lfi/errors.hpp"

namespace lfi {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// SplitMix64 finalizer; also used to key streams and hash values.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine64(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b + 0x632be59bd9b4e019ull));
}

std::uint64_t hash_string(const std::string& s) noexcept;

/// Splittable generator. A stream is identified by (seed, stream_id); the
/// draw sequence is a pure function of that key (xoshiro256** keyed through
/// SplitMix64), so substreams can be handed to workers in any order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Child stream keyed by this stream's identity and `child`, not by its
  /// current position.
  RngStream substream(std::uint64_t child) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::array<std::uint64_t, 4> state_{};
};

double sample_normal(RngStream& rng, double mu, double sigma);
std::int64_t sample_poisson(RngStream& rng, double lambda);
double sample_exponential(RngStream& rng, double rate);
Vector sample_uniform_box(RngStream& rng, const Vector& lo, const Vector& hi);
Index sample_event_index(RngStream& rng, const Eigen::Ref<const Vector>& weights);

/// Inverse CDF of Exponential(rate); `sample_exponential` is this applied to a uniform draw.
inline double exponential_quantile(double u, double rate) { return -std::log1p(-u) / rate; }

// ---------------------------------------------------------------------------
// Dense kernels
// ---------------------------------------------------------------------------

/// Diagonal loading applied before factorization. `automatic()` resolves to
/// 1e-8 * trace(a) / dim.
class Jitter {
 public:
  static Jitter automatic() { return Jitter{}; }
  static Jitter fixed(double value) { return Jitter{value}; }

  bool is_automatic() const { return !value_.has_value(); }

  template <class Derived>
  typename Derived::Scalar resolve(const Eigen::MatrixBase<Derived>& a) const {
    using Scalar = typename Derived::Scalar;
    if (value_) return static_cast<Scalar>(*value_);
    if (a.rows() == 0) return Scalar(0);
    const Scalar t = a.trace() / static_cast<Scalar>(a.rows());
    return std::abs(t) * Scalar(1e-8);
  }

 private:
  Jitter() = default;
  explicit Jitter(double v) : value_(v) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("jitter must be finite and >= 0");
  }
  std::optional<double> value_;
};

/// Lower-triangular L with L * L^T = a + jitter * I.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> cholesky(
    const Eigen::MatrixBase<Derived>& a, Jitter jitter = Jitter::fixed(0.0)) {
  using Scalar = typename Derived::Scalar;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (a.rows() != a.cols()) throw DecompositionError("cholesky: matrix is not square");
  if (!a.allFinite()) throw DecompositionError("cholesky: non-finite entries");
  const Scalar scale = Scalar(1) + a.cwiseAbs().maxCoeff();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-9) * scale)
    throw DecompositionError("cholesky: matrix is not symmetric");
  Dense loaded = a;
  loaded.diagonal().array() += jitter.resolve(a);
  Eigen::LLT<Dense> llt(loaded);
  if (llt.info() != Eigen::Success)
    throw DecompositionError("cholesky: matrix is not positive definite");
  Dense l = llt.matrixL();
  // LLT accepts some indefinite inputs without reporting failure.
  if ((l.diagonal().array() <= Scalar(0)).any() || !l.allFinite())
    throw DecompositionError("cholesky: matrix is not positive definite");
  return l;
}

/// argmin_beta ||x beta - y||_2 via column-pivoted Householder QR.
template <class DerivedX, class DerivedY>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, 1> least_squares(
    const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (x.rows() != y.rows())
    throw InvalidArgument("least_squares: design has " + std::to_string(x.rows()) +
                          " rows but response has " + std::to_string(y.rows()));
  if (x.rows() < x.cols())
    throw SingularSystemError("least_squares: fewer rows (" + std::to_string(x.rows()) +
                              ") than columns (" + std::to_string(x.cols()) + ")");
  Eigen::ColPivHouseholderQR<Dense> qr(x);
  if (qr.rank() < x.cols())
    throw SingularSystemError("least_squares: design of " + std::to_string(x.cols()) +
                              " columns has rank " + std::to_string(qr.rank()));
  return qr.solve(y);
}

/// Log-determinant from a Cholesky factor.
template <class Derived>
typename Derived::Scalar log_det_from_cholesky(const Eigen::MatrixBase<Derived>& l) {
  return typename Derived::Scalar(2) * l.diagonal().array().log().sum();
}

}  // namespace lfi
