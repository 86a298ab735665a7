#pragma once

#include "branching.hpp"
#include "params.hpp"
#include "types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace epi {

enum class LossKind { L1, L1Log };

/// Handling of zero counts inside the log loss: log(max(x,1)) by default,
/// log(1+x) as the alternative. The choice changes fitted values.
enum class LogPolicy { ClampToOne, Log1p };

struct LossEstimate {
  double mean = 0.0;
  double half_width = 0.0;  ///< 1.96 * standard error over replications
};

/// Monte Carlo estimate of the per-day L1 deviation, averaged over the days
/// covered by obs. sims holds one x_H series per replication.
LossEstimate loss_l1(const std::vector<std::vector<double>>& sims, std::span<const double> obs);
LossEstimate loss_l1_log(const std::vector<std::vector<double>>& sims,
                         std::span<const double> obs, LogPolicy policy = LogPolicy::ClampToOne);

/// Piecewise-constant contact schedule: alpha = a1 on [0, t2), a2 on
/// [t2, t3), a3 from t3 on, applied to both alpha_i and alpha_a.
struct PhaseSchedule {
  int t2 = 0;
  int t3 = 0;
  double a1 = 0.0, a2 = 0.0, a3 = 0.0;

  void validate() const;
  double rate_on(int day) const { return day < t2 ? a1 : (day < t3 ? a2 : a3); }
  std::vector<std::pair<double, double>> rates(int days) const;
};

struct GridSpec {
  std::vector<double> xe0;  ///< initial exposed-count candidates
  std::vector<double> a1, a2, a3;
  std::vector<int> t2, t3;

  void validate() const;
  std::size_t point_count() const;
  static GridSpec from_json(const std::string& text);
  std::string to_json() const;
};

struct GridPoint {
  double xe0 = 0.0;
  PhaseSchedule schedule;
  LossEstimate loss;
};

struct FitOptions {
  int n_reps = 200;
  LossKind loss = LossKind::L1Log;
  LogPolicy log_policy = LogPolicy::ClampToOne;
  int refine_rounds = 2;  ///< rounds of step-halving around the incumbent
  int threads = 0;        ///< 0 picks hardware concurrency
  std::uint64_t seed = 0;
};

struct FitResult {
  double xe0 = 0.0;
  PhaseSchedule schedule;
  LossEstimate train_loss;
  int n_reps = 0;
  LossKind loss = LossKind::L1Log;
  LogPolicy log_policy = LogPolicy::ClampToOne;
  std::uint64_t seed = 0;
  std::vector<GridPoint> evaluated;  ///< every point visited, in evaluation order

  std::string to_json() const;
  static FitResult from_json(const std::string& text);
};

/// Samples one x_H trajectory for the given schedule: X_E(0) individuals are
/// allocated across the exposed day slots by the E-duration distribution,
/// then the stochastic engine runs for `days` steps. Replication `rep` of a
/// master seed always sees the same substream, which keeps random numbers
/// common across grid points.
std::vector<double> sample_xh_trajectory(const DiseaseParams& base, const FailureRates& fr,
                                         double xe0, const PhaseSchedule& schedule, int days,
                                         std::uint64_t seed, std::uint64_t rep);

/// Six-parameter grid search driven by the Monte Carlo loss, with
/// `refine_rounds` passes of halved steps around the incumbent. Deterministic
/// for a fixed seed regardless of thread count.
FitResult grid_search_fit(std::span<const double> observed, const DiseaseParams& base,
                          const GridSpec& grid, const FitOptions& options);

/// Held-out mean L1 error of a fitted configuration: simulates from day 0
/// through test_end and averages |X_H - obs| over (train_end, test_end].
LossEstimate prediction_error(const FitResult& fit, const DiseaseParams& base,
                              std::span<const double> observed_full, int train_end,
                              int test_end, int n_reps, std::uint64_t seed);

}  // namespace epi
