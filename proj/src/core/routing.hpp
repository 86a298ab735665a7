#pragma once

#include "meanfield.hpp"
#include "params.hpp"
#include "types.hpp"

#include <map>
#include <string>
#include <vector>

namespace epi {

/// Cohort identity: (usual region, previous-night region, age range).
/// prev_region may be empty for the (region, age) flavour.
struct CohortId {
  std::string region;
  std::string prev_region;
  std::string age;

  std::string str() const;
};

struct Cohort {
  CohortId id;
  double population = 0.0;
  DiseaseParams params;
};

/// alpha = q .* n after checking the reciprocity identity
/// N_c n(c,c') = N_{c'} n(c',c) within rtol relative; the error message lists
/// every violating pair.
Mat infection_rate_matrix(const Mat& q, const Mat& n, const Vec& populations,
                          double rtol = 1e-9);

/// Validates reciprocity of each contact addend (home/work/school/transit)
/// and returns their sum.
Mat total_contacts(const std::vector<Mat>& addends, const Vec& populations,
                   double rtol = 1e-9);

/// Transit contacts from visit counts: n^T(c,c') = sum_z beta_z n(c,z)
/// n(c',z) / N_c. beta must have mean 1 (the model's gauge choice); cohorts
/// with visits need a positive population.
Mat transit_contacts(const Mat& visits, const Vec& beta, const Vec& populations);

/// Multi-cohort mean-field system. alpha(src, dst) is the infection rate a
/// src-cohort individual exerts on dst; within-cohort rates sit on the
/// diagonal. routing(from, to) are the daily migration fractions (row sums
/// <= 1, the remainder leaves the system). H is never routed.
struct CohortSystem {
  int h = 25;
  std::vector<Cohort> cohorts;
  Mat alpha;
  Mat routing;
  std::vector<Vec> states;
  Vec arrivals;  ///< external arrivals per cohort per day (population only)

  int size() const { return static_cast<int>(cohorts.size()); }
  void validate() const;
};

/// Epidemic stage: per-cohort one-day update where the within-cohort part is
/// the dense single-population matrix at rate alpha(c,c) and cross-cohort
/// infections add alpha(c',c) times the infectious mass of c' to (E,1).
std::vector<Vec> epidemic_stage(const CohortSystem& system);

/// Routing stage: mixes the E..I2 blocks by the routing fractions, keeps H in
/// place, and updates populations (including external arrivals).
void routing_stage(CohortSystem& system, const std::vector<Vec>& y);

struct CohortTrajectories {
  std::vector<std::vector<Vec>> states;        ///< [cohort][day]
  std::vector<std::vector<double>> populations;  ///< [cohort][day]
};

CohortTrajectories simulate_cohorts(CohortSystem system, int days);

/// Instance of the routing-fraction estimation problem: cohorts are
/// identified by (home region, previous-night region, age); the observed
/// flows aggregate by (previous-night region, next-night region, age).
struct MaxEntInstance {
  std::vector<CohortId> ids;
  Vec populations;
  struct Flow {
    std::string from_region;
    std::string to_region;
    std::string age;
    double count = 0.0;
  };
  std::vector<Flow> flows;
};

struct MaxEntOptions {
  double kkt_tol = 1e-10;
  int max_sweeps = 100000;
};

struct MaxEntResult {
  Mat routing;            ///< estimated fractions, cross-age entries zero
  double objective = 0.0; ///< sum R ln(1/R), 0 ln(1/0) = 0
  double kkt_residual = 0.0;
  int sweeps = 0;
  bool converged = false;
};

/// Maximum-entropy routing estimation by dual ascent with multiplicative
/// primal updates: R(e) = exp(-1 - lambda_g N_row - mu_row), flow multipliers
/// solved exactly per sweep, row multipliers clamped at the simplex bound.
/// Flow groups with zero observed count are pinned to zero. Throws when the
/// flow totals are infeasible against the sleeping populations.
MaxEntResult maxent_routing(const MaxEntInstance& instance, const MaxEntOptions& options = {});

}  // namespace epi
