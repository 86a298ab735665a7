#pragma once

#include "meanfield.hpp"
#include "params.hpp"
#include "rng.hpp"
#include "types.hpp"

#include <Eigen/Sparse>

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace epi {

/// Sentinel for "never tested" in the extended type space.
constexpr int kNeverTested = std::numeric_limits<int>::max();

/// A full future course of one individual: the phase it occupies on each day
/// of its life, from the first exposed day up to removal (paths through
/// hospitalization end on the H day).
struct PhasePath {
  std::vector<Phase> phases;
  double probability = 0.0;
};

/// Exhaustive enumeration of duration/branch combinations with product
/// probabilities (weights sum to 1). Throws if the count exceeds cap.
std::vector<PhasePath> enumerate_paths(const DiseaseParams& params, std::size_t cap = 10000);

/// Extended type (j, d): remaining phase path plus days-until-positive-test.
/// days_until_test counts the current day: 1 means tested at the end of
/// today, so a freshly infected individual's value equals the length its
/// path was truncated to. kNeverTested marks individuals whose test would
/// fall beyond the D_max horizon (or never happens).
struct ExtendedType {
  std::vector<Phase> path;
  int days_until_test = kNeverTested;

  std::string key() const;
  bool operator==(const ExtendedType& o) const {
    return days_until_test == o.days_until_test && path == o.path;
  }
};

struct TracingConfig {
  double p_t = 0.0;         ///< tracing probability
  double epsilon = 0.0;     ///< daily random-test probability
  int d_max = 0;            ///< test horizon; 0 selects the longest enumerated path
  std::vector<Phase> phi0 = {Phase::H};  ///< phases that trigger an automatic positive test
  std::size_t path_cap = 10000;
  std::size_t type_cap = 200000;
};

/// Samples the birth type of a child of `parent` per the tracing rules: a
/// fresh path is drawn, the test day is the earliest of entering a phi0
/// phase, the random-test day (truncated geometric in epsilon), and - with
/// probability p_t - the day after the parent's test; the path is truncated
/// to that length. The parent's days_until_test is its current value.
ExtendedType sample_child_type(const ExtendedType& parent, const TracingConfig& config,
                               const DiseaseParams& params, Rng& rng);

/// The contact-tracing branching model over extended types: the reachable
/// type space and the mean daily progeny matrix (column = parent; the aging
/// step appears as a unit entry, infections at the contact rate of the
/// current phase).
class TracingModel {
 public:
  TracingModel(const DiseaseParams& params, const TracingConfig& config);

  int type_count() const { return static_cast<int>(types_.size()); }
  const ExtendedType& type(int idx) const { return types_[idx]; }
  int type_index(const ExtendedType& t) const;
  int d_max() const { return d_max_; }

  const Eigen::SparseMatrix<double>& progeny_matrix() const { return progeny_; }

  /// Distribution of the type of a fresh infection with no traced parent
  /// (also the law for seeding initial individuals).
  const Vec& birth_distribution() const { return birth_; }

  SpectralResult spectral_radius(double tol = 1e-10, int max_iters = 50000) const;

  /// <x0, (I - M^T)^{-1} e>: expected total person-days of the infected
  /// population over the whole epidemic. Throws if the spectral radius is
  /// not below 1. x0 is a nonnegative vector over the type space.
  double expected_total_infected(const Vec& x0) const;
  double expected_total_infected(double n_initial) const;

  /// One day of children of a single parent of the given type (aging
  /// included); used as the Monte Carlo oracle for the progeny columns.
  std::map<int, std::int64_t> sample_children(int parent_type, Rng& rng) const;

  struct SimulationResult {
    double total_person_days = 0.0;  ///< population summed over days, day 0 included
    int days = 0;
    bool extinct = false;
  };
  /// Runs the extended process forward from n_initial fresh infections until
  /// extinction or max_days.
  SimulationResult simulate(std::int64_t n_initial, int max_days, Rng& rng) const;

 private:
  struct PathDetail {
    std::vector<Phase> phases;
    double probability = 0.0;
    int test_day = kNeverTested;  // 1-based day the course enters a phi0 phase
  };

  int register_type(const ExtendedType& t);
  const std::vector<std::pair<int, double>>& law_for_bound(int bound);
  ExtendedType aged_type(const ExtendedType& t) const;

  DiseaseParams params_;
  TracingConfig config_;
  int d_max_ = 0;
  std::vector<PathDetail> paths_;
  std::vector<ExtendedType> types_;
  std::unordered_map<std::string, int> index_;
  // child birth law per traced bound, mixed over the p_t coin
  std::map<int, std::vector<std::pair<int, double>>> law_;
  Eigen::SparseMatrix<double> progeny_;
  Vec birth_;
};

/// Expected total person-days for the base (unexpanded) model, same formula
/// against the dense one-day matrix. Throws when the spectral radius is >= 1.
double expected_total_infected(const Mat& m, const Vec& x0);

struct CriticalTracingResult {
  std::optional<double> p_star;
  double rho_at_zero = 0.0;
  double rho_at_one = 0.0;
  std::string note;
};

/// Bisection on p_t for rho(M(p_t)) = 1 at the given epsilon, to |rho-1| <=
/// tol. Returns no value when the endpoints do not bracket 1 (note says which
/// side), and reports a violated monotonicity precondition instead of
/// guessing.
CriticalTracingResult critical_tracing_probability(const DiseaseParams& params, double epsilon,
                                                   const TracingConfig& base = {},
                                                   double tol = 1e-4);

struct TracingSweepRow {
  double p_t = 0.0;
  double epsilon = 0.0;
  double rho = 0.0;
  double expected_total = 0.0;  ///< +inf when rho >= 1
};

/// (p_t, epsilon) grid sweep of the spectral radius and expected totals for
/// n_initial fresh infections.
std::vector<TracingSweepRow> tracing_sweep(const DiseaseParams& params,
                                           const TracingConfig& base,
                                           const std::vector<double>& p_t_values,
                                           const std::vector<double>& epsilon_values,
                                           double n_initial);

}  // namespace epi
