#pragma once

#include "params.hpp"
#include "rng.hpp"
#include "types.hpp"

#include <span>
#include <utility>
#include <vector>

namespace epi {

/// One day of the multi-type branching process, conditioned on x. Survival is
/// binomial per (phase, day); new exposures are Poisson; the branch counts at
/// P and I1 exits are complements of a single binomial draw, not independent
/// draws, so the counting identities hold path-wise. The draw order is fixed
/// (phases in block order, then exposures, then branches), so a given engine
/// state yields a reproducible step.
VecI step_stochastic(const VecI& x, const DiseaseParams& params, double alpha_i, double alpha_a,
                     Rng& rng);

/// Hot-loop variant with precomputed failure rates.
VecI step_stochastic(const VecI& x, const DiseaseParams& params, const FailureRates& fr,
                     double alpha_i, double alpha_a, Rng& rng);

inline VecI step_stochastic(const VecI& x, const DiseaseParams& params, Rng& rng) {
  return step_stochastic(x, params, params.alpha_i, params.alpha_a, rng);
}

struct StochasticTrajectory {
  std::vector<VecI> states;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

/// days+1 integer states; rates[t] = (alpha_i, alpha_a) for the step t -> t+1.
/// Fixed (seed, stream) reproduces the trajectory bit for bit.
StochasticTrajectory simulate_stochastic(const VecI& x0, const DiseaseParams& params,
                                         std::span<const std::pair<double, double>> rates,
                                         int days, std::uint64_t seed, std::uint64_t stream = 0);

/// Constant-rate convenience overload using the rates in params.
StochasticTrajectory simulate_stochastic(const VecI& x0, const DiseaseParams& params, int days,
                                         std::uint64_t seed, std::uint64_t stream = 0);

/// Covariance of the one-day child vector of a single parent, sparse over the
/// handful of reachable child coordinates.
struct OffspringCovariance {
  Phase phase = Phase::E;
  int day = 1;
  struct Entry {
    int row, col;
    double value;
  };
  std::vector<Entry> entries;

  Mat dense(int h) const;
};

OffspringCovariance offspring_covariance(Phase phase, int day, const DiseaseParams& params);

/// Per-phase exits between two consecutive states, recovered from the
/// counting identities (total minus survivors).
struct StepExits {
  std::int64_t e = 0, p = 0, i1 = 0, a = 0, i2 = 0;
};
StepExits step_exits(const VecI& before, const VecI& after, int h);

}  // namespace epi
