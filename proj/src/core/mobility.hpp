#pragma once

#include "types.hpp"

#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace epi {

/// Daily outflow counts with their normalization (zero mean, unit population
/// standard deviation).
struct OutflowSeries {
  std::vector<double> raw;
  std::vector<double> f;
};

struct FlowStats {
  double mean = 0.0;
  double stddev = 0.0;  ///< population standard deviation
};

FlowStats flow_stats(std::span<const double> raw);

/// Throws on constant input (zero standard deviation is an error, not a
/// silent zero series).
OutflowSeries normalize_flow(std::span<const double> raw);

/// Normalizes against externally supplied statistics, e.g. reusing the
/// training-window mean/std on a test window.
OutflowSeries normalize_flow_with(std::span<const double> raw, const FlowStats& stats);

/// Centered moving average used by the optional smoothing flag.
std::vector<double> moving_average(std::span<const double> raw, int window);

enum class RateForm { Linear, Logistic, Custom };

/// Per-phase base rates with mobility sensitivity. Linear form:
/// alpha(t) = alpha_phase * (1 + gamma f(t)); logistic form:
/// alpha_phase * 2 / (1 + exp(-gamma f(t))) so f = 0 keeps the base rate.
struct MobilityRateSpec {
  std::vector<double> base_i;
  std::vector<double> base_a;
  double gamma_i = 0.0;
  double gamma_a = 0.0;
  RateForm form = RateForm::Linear;
  /// Only consulted for RateForm::Custom: (base rate, f) -> rate.
  std::function<double(double, double)> custom;

  /// Construction-time check: the linear form must stay nonnegative over the
  /// observed f range.
  void validate(std::span<const int> phase_of_day, const OutflowSeries& flow) const;
};

/// Per-day (alpha_i(t), alpha_a(t)) from the phase schedule and normalized
/// flow. phase_of_day holds 0-based phase indices covering the flow range.
std::vector<std::pair<double, double>> contact_rate_series(const MobilityRateSpec& spec,
                                                           std::span<const int> phase_of_day,
                                                           const OutflowSeries& flow);

}  // namespace epi
