#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "lfi/numeric.hpp"

namespace lfi {

struct TemperingOptions {
  Index steps = 10000;
  Index burn_in = 2000;
  Index swap_every = 10;
};

struct TemperingDiagnostics {
  std::vector<double> acceptance;  ///< per rung
  std::vector<double> swap_rate;   ///< per adjacent pair (r, r+1)
};

template <class State>
struct TemperingRun {
  std::vector<State> cold;  ///< rung-0 states after burn-in, one per step
  TemperingDiagnostics diagnostics;
};

/// Replica-exchange Metropolis over `rungs` chains. `Target` provides
///   State propose(const State&, Index rung, RngStream&)
///   double log_weight(const State&, Index rung)
/// with a symmetric proposal. Rung r draws from RngStream(seed, r); swap
/// decisions use RngStream(seed, rungs). Swaps are attempted every
/// `swap_every` steps on the adjacent pair chosen round-robin.
template <class State, class Target>
TemperingRun<State> run_tempering(Target& target, std::vector<State> init, const TemperingOptions& options,
                                  std::uint64_t seed) {
  const auto rungs = static_cast<Index>(init.size());
  if (rungs < 1) throw InvalidArgument("tempering: need at least one rung");
  if (options.steps < 1 || options.burn_in < 0 || options.burn_in >= options.steps)
    throw InvalidArgument("tempering: require 0 <= burn_in < steps");
  if (options.swap_every < 1) throw InvalidArgument("tempering: swap interval must be >= 1");

  std::vector<RngStream> rng;
  for (Index r = 0; r < rungs; ++r) rng.emplace_back(seed, static_cast<std::uint64_t>(r));
  RngStream swap_rng(seed, static_cast<std::uint64_t>(rungs));

  std::vector<State> state = std::move(init);
  std::vector<double> logw(static_cast<std::size_t>(rungs));
  for (Index r = 0; r < rungs; ++r) logw[static_cast<std::size_t>(r)] = target.log_weight(state[static_cast<std::size_t>(r)], r);

  std::vector<Index> accepted(static_cast<std::size_t>(rungs), 0);
  std::vector<Index> swaps_tried(static_cast<std::size_t>(std::max<Index>(rungs - 1, 0)), 0);
  std::vector<Index> swaps_done(swaps_tried.size(), 0);
  Index swap_round = 0;

  TemperingRun<State> run;
  run.cold.reserve(static_cast<std::size_t>(options.steps - options.burn_in));
  for (Index step = 0; step < options.steps; ++step) {
    for (Index r = 0; r < rungs; ++r) {
      const auto i = static_cast<std::size_t>(r);
      State next = target.propose(state[i], r, rng[i]);
      const double lw = target.log_weight(next, r);
      const double log_ratio = lw - logw[i];
      if (log_ratio >= 0.0 || std::log(rng[i].uniform()) < log_ratio) {
        state[i] = std::move(next);
        logw[i] = lw;
        ++accepted[i];
      }
    }
    if (rungs > 1 && (step + 1) % options.swap_every == 0) {
      const auto a = static_cast<std::size_t>(swap_round % (rungs - 1));
      const std::size_t b = a + 1;
      ++swap_round;
      ++swaps_tried[a];
      const double wa_b = target.log_weight(state[b], static_cast<Index>(a));
      const double wb_a = target.log_weight(state[a], static_cast<Index>(b));
      const double log_ratio = wa_b + wb_a - logw[a] - logw[b];
      // Draw unconditionally so the stream position does not depend on the outcome.
      const double u = swap_rng.uniform();
      if (log_ratio >= 0.0 || std::log(u) < log_ratio) {
        std::swap(state[a], state[b]);
        logw[a] = wa_b;
        logw[b] = wb_a;
        ++swaps_done[a];
      }
    }
    if (step >= options.burn_in) run.cold.push_back(state[0]);
  }
  for (Index r = 0; r < rungs; ++r)
    run.diagnostics.acceptance.push_back(static_cast<double>(accepted[static_cast<std::size_t>(r)]) /
                                         static_cast<double>(options.steps));
  for (std::size_t p = 0; p < swaps_tried.size(); ++p)
    run.diagnostics.swap_rate.push_back(swaps_tried[p] ? static_cast<double>(swaps_done[p]) / static_cast<double>(swaps_tried[p])
                                                       : 0.0);
  return run;
}

/// Effective sample size by Geyer's initial positive sequence.
double effective_sample_size(const Eigen::Ref<const Vector>& x);

}  // namespace lfi
