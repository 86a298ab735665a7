#include "branching.hpp"

namespace epi {

VecI step_stochastic(const VecI& x, const DiseaseParams& params, double alpha_i, double alpha_a,
                     Rng& rng) {
  return step_stochastic(x, params, FailureRates::from(params), alpha_i, alpha_a, rng);
}

VecI step_stochastic(const VecI& x, const DiseaseParams& params, const FailureRates& fr,
                     double alpha_i, double alpha_a, Rng& rng) {
  const int h = params.h;
  if (x.size() != state_dim(h))
    throw std::invalid_argument("step_stochastic: state dimension mismatch");
  for (int i = 0; i < x.size(); ++i)
    if (x[i] < 0) throw std::invalid_argument("step_stochastic: negative count");

  VecI next = VecI::Zero(state_dim(h));

  std::int64_t e_exits = 0, p_exits = 0, i1_exits = 0;
  std::int64_t sum_i = 0, sum_a = 0;  // infectious masses of day t

  for (Phase tau : kDurationPhaseList) {
    const auto& r = fr[tau];
    std::int64_t exits = 0;
    for (int d = 1; d <= h; ++d) {
      const std::int64_t n = x[state_index(tau, d, h)];
      if (n == 0) continue;
      std::int64_t survivors;
      const double rd = r[d - 1];
      if (rd <= 0.0)
        survivors = n;
      else if (rd >= 1.0)
        survivors = 0;
      else
        survivors = sample_binomial(n, 1.0 - rd, rng);
      if (d < h) next[state_index(tau, d + 1, h)] = survivors;
      // survivors at day h have nowhere to age into; with a valid pmf the
      // failure rate at the last support day is 1, so none exist
      exits += n - survivors;
    }
    switch (tau) {
      case Phase::E: e_exits = exits; break;
      case Phase::P: p_exits = exits; break;
      case Phase::I1: i1_exits = exits; break;
      default: break;
    }
  }
  for (int d = 1; d <= h; ++d) {
    sum_i += x[state_index(Phase::I1, d, h)] + x[state_index(Phase::I2, d, h)];
    sum_a += x[state_index(Phase::A, d, h)] + x[state_index(Phase::P, d, h)];
  }

  const double exposure_mean =
      alpha_i * static_cast<double>(sum_i) + alpha_a * static_cast<double>(sum_a);
  next[state_index(Phase::E, 1, h)] = sample_poisson(exposure_mean, rng);
  next[state_index(Phase::P, 1, h)] = e_exits;

  const std::int64_t new_i1 = sample_binomial(p_exits, params.p_i, rng);
  next[state_index(Phase::I1, 1, h)] = new_i1;
  next[state_index(Phase::A, 1, h)] = p_exits - new_i1;

  const std::int64_t new_i2 = sample_binomial(i1_exits, 1.0 - params.p_h, rng);
  next[state_index(Phase::I2, 1, h)] = new_i2;
  next[state_index(Phase::H, 1, h)] = i1_exits - new_i2;
  return next;
}

StochasticTrajectory simulate_stochastic(const VecI& x0, const DiseaseParams& params,
                                         std::span<const std::pair<double, double>> rates,
                                         int days, std::uint64_t seed, std::uint64_t stream) {
  if (days < 0) throw std::invalid_argument("simulate_stochastic: negative horizon");
  if (static_cast<int>(rates.size()) < days)
    throw std::invalid_argument("simulate_stochastic: rate schedule shorter than horizon");
  StochasticTrajectory traj;
  traj.seed = seed;
  traj.stream = stream;
  traj.states.reserve(days + 1);
  traj.states.push_back(x0);
  Rng rng = make_stream(seed, stream);
  const auto fr = FailureRates::from(params);
  for (int t = 0; t < days; ++t)
    traj.states.push_back(
        step_stochastic(traj.states.back(), params, fr, rates[t].first, rates[t].second, rng));
  return traj;
}

StochasticTrajectory simulate_stochastic(const VecI& x0, const DiseaseParams& params, int days,
                                         std::uint64_t seed, std::uint64_t stream) {
  std::vector<std::pair<double, double>> rates(std::max(days, 0),
                                               {params.alpha_i, params.alpha_a});
  return simulate_stochastic(x0, params, rates, days, seed, stream);
}

Mat OffspringCovariance::dense(int h) const {
  Mat m = Mat::Zero(state_dim(h), state_dim(h));
  for (const auto& e : entries) m(e.row, e.col) += e.value;
  return m;
}

OffspringCovariance offspring_covariance(Phase phase, int day, const DiseaseParams& params) {
  const int h = params.h;
  OffspringCovariance cov;
  cov.phase = phase;
  cov.day = day;
  if (phase == Phase::H) return cov;  // hospitalized parents have no children
  if (day < 1 || day > h) throw std::invalid_argument("offspring_covariance: day outside 1..h");

  const auto r = failure_rates(params.duration(phase));
  const double rd = r[day - 1];

  // transition outcomes of the parent: (coordinate, probability); outcomes
  // that leave the tracked state space are simply omitted
  std::vector<std::pair<int, double>> outcomes;
  if (day < h && 1.0 - rd > 0.0)
    outcomes.emplace_back(state_index(phase, day + 1, h), 1.0 - rd);
  switch (phase) {
    case Phase::E:
      if (rd > 0.0) outcomes.emplace_back(state_index(Phase::P, 1, h), rd);
      break;
    case Phase::P:
      if (rd * params.p_i > 0.0)
        outcomes.emplace_back(state_index(Phase::I1, 1, h), rd * params.p_i);
      if (rd * (1.0 - params.p_i) > 0.0)
        outcomes.emplace_back(state_index(Phase::A, 1, h), rd * (1.0 - params.p_i));
      break;
    case Phase::I1:
      if (rd * (1.0 - params.p_h) > 0.0)
        outcomes.emplace_back(state_index(Phase::I2, 1, h), rd * (1.0 - params.p_h));
      if (rd * params.p_h > 0.0)
        outcomes.emplace_back(state_index(Phase::H, 1, h), rd * params.p_h);
      break;
    default:
      break;  // A and I2 exits leave the contamination chain
  }

  // multinomial covariance of the single-trial outcome indicators
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    for (std::size_t j = 0; j < outcomes.size(); ++j) {
      double v = (i == j) ? outcomes[i].second * (1.0 - outcomes[i].second)
                          : -outcomes[i].second * outcomes[j].second;
      if (v != 0.0) cov.entries.push_back({outcomes[i].first, outcomes[j].first, v});
    }
  }

  // independent Poisson exposures contribute only to the (E,1) diagonal
  double alpha = 0.0;
  if (phase == Phase::P || phase == Phase::A) alpha = params.alpha_a;
  if (phase == Phase::I1 || phase == Phase::I2) alpha = params.alpha_i;
  if (alpha > 0.0) {
    int e1 = state_index(Phase::E, 1, h);
    cov.entries.push_back({e1, e1, alpha});
  }
  return cov;
}

StepExits step_exits(const VecI& before, const VecI& after, int h) {
  auto block_exits = [&](Phase tau) {
    std::int64_t total = 0, survivors = 0;
    for (int d = 1; d <= h; ++d) total += before[state_index(tau, d, h)];
    for (int d = 2; d <= h; ++d) survivors += after[state_index(tau, d, h)];
    return total - survivors;
  };
  StepExits ex;
  ex.e = block_exits(Phase::E);
  ex.p = block_exits(Phase::P);
  ex.i1 = block_exits(Phase::I1);
  ex.a = block_exits(Phase::A);
  ex.i2 = block_exits(Phase::I2);
  return ex;
}

}  // namespace epi
