#pragma once

#include "params.hpp"
#include "spectral.hpp"
#include "types.hpp"

#include <span>
#include <utility>
#include <vector>

namespace epi {

/// Dense one-day transition matrix of the mean-field model, x(t+1) = M x(t).
struct TransitionMatrix {
  Mat m;
  int h = 0;
  double alpha_i = 0.0;
  double alpha_a = 0.0;

  int dim() const { return static_cast<int>(m.rows()); }
};

/// Assembles M from the per-day survival/exit structure: aging with
/// probability 1-r, new exposures from contact rates, and the branch splits
/// p_i (symptomatic) and p_h (hospitalization).
TransitionMatrix build_transition_matrix(const DiseaseParams& params);

/// days+1 states, trajectory[0] = x0, trajectory[t+1] = M * trajectory[t].
std::vector<Vec> simulate_meanfield(const TransitionMatrix& M, const Vec& x0, int days);

/// Mean-field run with per-day contact rates (rates[t] applies to the step
/// t -> t+1). Used by the mobility-modulated and piecewise-constant models.
std::vector<Vec> simulate_meanfield_schedule(const DiseaseParams& params, const Vec& x0,
                                             std::span<const std::pair<double, double>> rates);

/// Perron root and direction of a nonnegative matrix by power iteration.
SpectralResult spectral_radius(const Mat& m, double tol = 1e-10, int max_iters = 10000);
SpectralResult spectral_radius(const TransitionMatrix& m, double tol = 1e-10,
                               int max_iters = 10000);

/// exp(slope) of the least-squares line through (t, log series(t)).
/// Throws if the window is shorter than 2 or contains nonpositive values.
double estimate_growth_rate(std::span<const double> series);

struct ShockFitOptions {
  std::vector<double> rate_grid;     ///< candidate contact rates (both theta0 and theta1)
  int pre_window = 14;               ///< regression window (points) ending at t0
  double lambda_match_tol = 1e-3;    ///< |F(theta0) - lambda_hat| feasibility tolerance
  bool two_dimensional = false;      ///< search (alpha_i, alpha_a) separately
  int golden_iters = 60;             ///< refinement iterations per coordinate
};

struct ShockFit {
  double alpha_i0 = 0, alpha_a0 = 0;  ///< pre-shock rates
  double alpha_i1 = 0, alpha_a1 = 0;  ///< post-shock rates
  double scale = 0;                   ///< C with C*u_H = x_H(t0)
  double residual = 0;                ///< post-shock squared loss at the optimum
  double lambda_hat = 0;              ///< growth estimate used for the constraint
};

/// Fits pre/post-shock contact rates to an observed x_H series with a rate
/// change at day t0: theta0 is pinned by matching the pre-shock growth rate,
/// the state at t0 is C*u(theta0), and theta1 minimizes the squared
/// post-shock prediction error over the grid with golden-section refinement.
ShockFit fit_shock(std::span<const double> observed_xh, int t0, const DiseaseParams& base,
                   const ShockFitOptions& options);

/// Coefficients a_1..a_n with x_H(t) = sum_i a_i x_H(t-i) along mean-field
/// trajectories (characteristic polynomial via the Faddeev-LeVerrier
/// recurrence). Throws on numeric overflow, which large h can trigger.
std::vector<double> ar_coefficients(const Mat& m);

}  // namespace epi
