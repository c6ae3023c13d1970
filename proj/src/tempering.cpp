#include "lfi/tempering.hpp"

namespace lfi {

double effective_sample_size(const Eigen::Ref<const Vector>& x) {
  const Index n = x.size();
  if (n < 4) return static_cast<double>(n);
  const Vector c = x.array() - x.mean();
  const double c0 = c.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  auto rho = [&](Index lag) { return c.head(n - lag).dot(c.tail(n - lag)) / (static_cast<double>(n) * c0); };
  // Sum consecutive pairs Gamma_k = rho(2k) + rho(2k+1) while positive.
  double sum = 0.0;
  for (Index k = 0; 2 * k + 1 < n; ++k) {
    const double gamma = rho(2 * k) + rho(2 * k + 1);
    if (gamma <= 0.0) break;
    sum += gamma;
  }
  const double tau = std::max(1.0, 2.0 * sum - 1.0);
  return static_cast<double>(n) / tau;
}

}  // namespace lfi
