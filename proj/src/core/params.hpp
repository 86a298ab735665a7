#pragma once

#include "types.hpp"

#include <array>
#include <initializer_list>
#include <string>
#include <vector>

namespace epi {

/// Discrete distribution of the number of days spent in one phase, stored
/// dense over 1..h days (pmf[d-1] = P(duration == d)).
struct DurationDist {
  Phase phase = Phase::E;
  std::vector<double> pmf;

  int horizon() const { return static_cast<int>(pmf.size()); }
  /// Largest day with positive mass; 0 for an all-zero pmf.
  int max_support() const;
  /// Entries in [0,1], total mass 1 within 1e-12. Throws on violation.
  void validate() const;

  static DurationDist uniform(Phase phase, std::initializer_list<int> days, int h);
  static DurationDist point_mass(Phase phase, int day, int h);
};

/// Failure rates r(d) = p(d) / sum_{delta>=d} p(delta) where the tail mass is
/// positive, 0 otherwise. r equals 1 at the last support day of a proper pmf.
std::vector<double> failure_rates(const DurationDist& dist);

/// Parameters of the single-population model. Immutable by convention once
/// validated; engines copy what they need.
struct DiseaseParams {
  int h = 25;
  std::array<DurationDist, kDurationPhases> durations;  // indexed by Phase E,P,I1,A,I2
  double p_i = 0.7;      ///< probability an exposed individual turns symptomatic
  double p_h = 0.05;     ///< probability of hospitalization at end of phase 1
  double p_d = 0.0;      ///< probability of death given hospitalization
  double alpha_i = 0.4;  ///< new exposures per symptomatic (I1/I2) individual per day
  double alpha_a = 0.3;  ///< new exposures per asymptomatic/prodromic (A/P) individual per day

  const DurationDist& duration(Phase p) const;
  int dim() const { return state_dim(h); }
  void validate() const;

  /// Baseline parameterization: E uniform on {3,4,5}, P uniform on {1,2},
  /// I1 uniform on {5,6,7}, I2 fixed at 4 days, A fixed at 11 days,
  /// p_i = 0.7, p_h = 0.05, contact rates 0.4 / 0.3.
  static DiseaseParams baseline(int h = 25);
};

/// Failure-rate vectors for all duration phases of a parameter set.
struct FailureRates {
  std::array<std::vector<double>, kDurationPhases> rates;

  const std::vector<double>& operator[](Phase p) const {
    return rates[static_cast<int>(p)];
  }
  static FailureRates from(const DiseaseParams& params);
};

struct DeathImmunCounters {
  double deaths = 0.0;
  double immunized = 0.0;
};

/// Deaths and immunizations produced between day t and t+1, from the day-t
/// slices of the state vector: deaths = p_d * x_H; immunized collects the
/// hospitalized survivors plus A and I2 completions.
DeathImmunCounters death_immun_update(double x_h, const Vec& x_a, const Vec& x_i2,
                                      const DiseaseParams& params);

/// JSON (de)serialization of DiseaseParams. Keys: h, p_i, p_h, p_d, alpha_i,
/// alpha_a and durations.{E,P,I1,A,I2} as arrays indexed by day-1.
DiseaseParams params_from_json(const std::string& text);
std::string params_to_json(const DiseaseParams& params);
DiseaseParams load_params(const std::string& path);
void save_params(const DiseaseParams& params, const std::string& path);

}  // namespace epi
