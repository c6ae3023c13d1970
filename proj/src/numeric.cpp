#include "lfi/numeric.hpp"

#include <limits>
#include <numbers>

namespace lfi {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be finite");
}

std::int64_t poisson_inversion(RngStream& rng, double lambda) {
  double p = std::exp(-lambda);
  double cdf = p;
  const double u = rng.uniform();
  std::int64_t k = 0;
  // 1000 terms is far past the tail for lambda < 30; the cap only absorbs rounding.
  while (u > cdf && k < 1000) {
    ++k;
    p *= lambda / static_cast<double>(k);
    cdf += p;
  }
  return k;
}

// Hormann's transformed rejection with squeeze (PTRS).
std::int64_t poisson_ptrs(RngStream& rng, double lambda) {
  const double slam = std::sqrt(lambda);
  const double loglam = std::log(lambda);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
        -lambda + k * loglam - std::lgamma(k + 1.0))
      return static_cast<std::int64_t>(k);
  }
}

}  // namespace

std::uint64_t hash_string(const std::string& s) noexcept {
  // FNV-1a, then finalized.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return mix64(h);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
  std::uint64_t key = hash_combine64(seed, stream_id);
  for (auto& word : state_) {
    key += 0x9e3779b97f4a7c15ull;
    word = mix64(key);
  }
}

std::uint64_t RngStream::next_u64() noexcept {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

RngStream RngStream::substream(std::uint64_t child) const {
  return RngStream(hash_combine64(seed_, stream_id_ ^ 0xa0761d6478bd642full), child);
}

double sample_normal(RngStream& rng, double mu, double sigma) {
  require_finite(mu, "normal mean");
  require_finite(sigma, "normal sd");
  if (sigma < 0.0) throw InvalidArgument("normal sd must be >= 0");
  // Box-Muller, cosine branch only; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  if (sigma == 0.0) return mu;
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mu + sigma * z;
}

std::int64_t sample_poisson(RngStream& rng, double lambda) {
  require_finite(lambda, "poisson mean");
  if (lambda < 0.0) throw InvalidArgument("poisson mean must be >= 0");
  if (lambda == 0.0) return 0;
  return lambda < 30.0 ? poisson_inversion(rng, lambda) : poisson_ptrs(rng, lambda);
}

double sample_exponential(RngStream& rng, double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw InvalidArgument("exponential rate must be finite and > 0");
  return exponential_quantile(rng.uniform(), rate);
}

Vector sample_uniform_box(RngStream& rng, const Vector& lo, const Vector& hi) {
  if (lo.size() != hi.size()) throw InvalidArgument("uniform box: bound lengths differ");
  Vector out(lo.size());
  for (Index i = 0; i < lo.size(); ++i) {
    if (!(lo[i] < hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
      throw InvalidArgument("uniform box: require finite lo < hi in component " + std::to_string(i));
    double v = lo[i] + (hi[i] - lo[i]) * rng.uniform();
    // Rounding can land exactly on hi for very narrow boxes.
    if (v >= hi[i]) v = std::nextafter(hi[i], lo[i]);
    out[i] = v;
  }
  return out;
}

Index sample_event_index(RngStream& rng, const Eigen::Ref<const Vector>& weights) {
  double total = 0.0;
  for (Index i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
      throw InvalidArgument("event weights must be finite and >= 0");
    total += weights[i];
  }
  if (!(total > 0.0)) throw InvalidArgument("event weights must not all be zero");
  const double target = rng.uniform() * total;
  double acc = 0.0;
  Index last_positive = 0;
  for (Index i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (target < acc) return i;
  }
  return last_positive;
}

}  // namespace lfi
