#pragma once

#include "branching.hpp"
#include "meanfield.hpp"
#include "params.hpp"
#include "types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace epi {

struct FilterState {
  Vec x_hat;
  Mat P;
  int t = 0;
};

/// Observation model y = P_H x + v: P_H selects the listed state coordinates,
/// v has covariance R.
struct MeasurementModel {
  std::vector<int> observed;
  Mat R;
};

/// Process noise Q = sum_j weights_j S_j from the per-type offspring
/// covariances. Negative weights are rejected.
Mat process_noise(const DiseaseParams& params, const Vec& weights);

/// One predict/update cycle. The innovation covariance is solved as a
/// symmetric positive-definite system; a 1e-10 jitter is added once on
/// failure before giving up. P is symmetrized after the update.
FilterState kalman_step(const FilterState& prev, const Mat& m, const Mat& q,
                        const MeasurementModel& model, const Vec& y);

enum class NoiseWeights {
  FilteredClamped,  ///< Q(t) weighted by max(x_hat(t-1), 0)
  OpenLoop,         ///< paper-literal weights M^{t-1} x(0)
};

struct FilterOptions {
  NoiseWeights weights = NoiseWeights::FilteredClamped;
  /// R(t) = max(observation, r_floor) unless fixed_r is set (Poisson-like
  /// measurement noise by default).
  double r_floor = 1.0;
  std::optional<double> fixed_r;
};

struct FilterRun {
  std::vector<FilterState> states;  ///< states[0] is the initial condition
  std::vector<std::optional<double>> innovations;  ///< y - prediction, empty for gaps
};

/// Filters a daily x_H series. Missing observations are predict-only days.
FilterRun filter_series(std::span<const std::optional<double>> observations,
                        const DiseaseParams& params, const Vec& x0, const Mat& p0,
                        const FilterOptions& options = {});

}  // namespace epi
