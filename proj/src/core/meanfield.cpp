#include "meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace epi {

TransitionMatrix build_transition_matrix(const DiseaseParams& params) {
  params.validate();
  const int h = params.h;
  const int n = state_dim(h);
  const auto fr = FailureRates::from(params);

  TransitionMatrix tm;
  tm.h = h;
  tm.alpha_i = params.alpha_i;
  tm.alpha_a = params.alpha_a;
  tm.m = Mat::Zero(n, n);
  Mat& m = tm.m;

  // aging: x_{tau,d+1}(t+1) = x_{tau,d}(t) (1 - r_tau(d))
  for (Phase tau : kDurationPhaseList) {
    const auto& r = fr[tau];
    for (int d = 1; d < h; ++d)
      m(state_index(tau, d + 1, h), state_index(tau, d, h)) = 1.0 - r[d - 1];
  }

  // new exposures: alpha_i per I1/I2 individual, alpha_a per A/P individual
  const int e1 = state_index(Phase::E, 1, h);
  for (int d = 1; d <= h; ++d) {
    m(e1, state_index(Phase::I1, d, h)) = params.alpha_i;
    m(e1, state_index(Phase::I2, d, h)) = params.alpha_i;
    m(e1, state_index(Phase::A, d, h)) = params.alpha_a;
    m(e1, state_index(Phase::P, d, h)) = params.alpha_a;
  }

  // phase exits feeding the next block, split at the branch points
  const int p1 = state_index(Phase::P, 1, h);
  const int i11 = state_index(Phase::I1, 1, h);
  const int a1 = state_index(Phase::A, 1, h);
  const int i21 = state_index(Phase::I2, 1, h);
  const int hx = state_index(Phase::H, 1, h);
  for (int d = 1; d <= h; ++d) {
    m(p1, state_index(Phase::E, d, h)) = fr[Phase::E][d - 1];
    m(i11, state_index(Phase::P, d, h)) = params.p_i * fr[Phase::P][d - 1];
    m(a1, state_index(Phase::P, d, h)) = (1.0 - params.p_i) * fr[Phase::P][d - 1];
    m(i21, state_index(Phase::I1, d, h)) = (1.0 - params.p_h) * fr[Phase::I1][d - 1];
    m(hx, state_index(Phase::I1, d, h)) = params.p_h * fr[Phase::I1][d - 1];
  }
  return tm;
}

std::vector<Vec> simulate_meanfield(const TransitionMatrix& M, const Vec& x0, int days) {
  if (x0.size() != M.dim())
    throw std::invalid_argument("simulate_meanfield: x0 dimension does not match matrix");
  if (days < 0) throw std::invalid_argument("simulate_meanfield: negative horizon");
  std::vector<Vec> traj;
  traj.reserve(days + 1);
  traj.push_back(x0);
  for (int t = 0; t < days; ++t) traj.push_back(M.m * traj.back());
  return traj;
}

std::vector<Vec> simulate_meanfield_schedule(const DiseaseParams& params, const Vec& x0,
                                             std::span<const std::pair<double, double>> rates) {
  const int h = params.h;
  if (x0.size() != state_dim(h))
    throw std::invalid_argument("simulate_meanfield_schedule: bad x0 dimension");
  const auto fr = FailureRates::from(params);
  std::vector<Vec> traj;
  traj.reserve(rates.size() + 1);
  traj.push_back(x0);
  Vec next(state_dim(h));
  for (const auto& [ai, aa] : rates) {
    const Vec& x = traj.back();
    next.setZero();
    double infectious_i = 0, infectious_a = 0;
    double e_exit = 0, p_exit = 0, i1_exit = 0;
    for (Phase tau : kDurationPhaseList) {
      const auto& r = fr[tau];
      for (int d = 1; d <= h; ++d) {
        double v = x[state_index(tau, d, h)];
        if (v == 0.0) continue;
        if (d < h) next[state_index(tau, d + 1, h)] = v * (1.0 - r[d - 1]);
        double exit = v * r[d - 1];
        switch (tau) {
          case Phase::E: e_exit += exit; break;
          case Phase::P: p_exit += exit; infectious_a += v; break;
          case Phase::I1: i1_exit += exit; infectious_i += v; break;
          case Phase::A: infectious_a += v; break;
          case Phase::I2: infectious_i += v; break;
          default: break;
        }
      }
    }
    next[state_index(Phase::E, 1, h)] = ai * infectious_i + aa * infectious_a;
    next[state_index(Phase::P, 1, h)] = e_exit;
    next[state_index(Phase::I1, 1, h)] = params.p_i * p_exit;
    next[state_index(Phase::A, 1, h)] = (1.0 - params.p_i) * p_exit;
    next[state_index(Phase::I2, 1, h)] = (1.0 - params.p_h) * i1_exit;
    next[state_index(Phase::H, 1, h)] = params.p_h * i1_exit;
    traj.push_back(next);
  }
  return traj;
}

SpectralResult spectral_radius(const Mat& m, double tol, int max_iters) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix not square");
  const Mat& a = m;
  return power_iteration(
      static_cast<int>(m.rows()), [&a](const Vec& x, Vec& y) { y.noalias() = a * x; }, tol,
      max_iters);
}

SpectralResult spectral_radius(const TransitionMatrix& m, double tol, int max_iters) {
  return spectral_radius(m.m, tol, max_iters);
}

double estimate_growth_rate(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 2) throw std::invalid_argument("estimate_growth_rate: window shorter than 2");
  double sum_t = 0, sum_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(series[i] > 0.0))
      throw std::invalid_argument("estimate_growth_rate: nonpositive value in window");
    sum_t += static_cast<double>(i);
    sum_y += std::log(series[i]);
  }
  const double tbar = sum_t / n, ybar = sum_y / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dt = static_cast<double>(i) - tbar;
    sxx += dt * dt;
    sxy += dt * (std::log(series[i]) - ybar);
  }
  return std::exp(sxy / sxx);
}

namespace {

// golden-section minimization of f over [lo, hi]
template <typename F>
double golden_min(F&& f, double lo, double hi, int iters) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 < f2 ? x1 : x2;
}

DiseaseParams with_rates(const DiseaseParams& base, double ai, double aa) {
  DiseaseParams p = base;
  p.alpha_i = ai;
  p.alpha_a = aa;
  return p;
}

double perron(const DiseaseParams& p) {
  auto res = spectral_radius(build_transition_matrix(p));
  return res.lambda;
}

// squared post-shock loss of candidate theta1 given the t0 state
double shock_loss(const DiseaseParams& base, double ai1, double aa1, const Vec& x_t0,
                  std::span<const double> observed, int t0) {
  auto M1 = build_transition_matrix(with_rates(base, ai1, aa1));
  const int steps = static_cast<int>(observed.size()) - 1 - t0;
  Vec x = x_t0;
  double loss = 0.0;
  const int hslot = state_dim(base.h) - 1;
  for (int s = 1; s <= steps; ++s) {
    x = M1.m * x;
    double d = x[hslot] - observed[t0 + s];
    loss += d * d;
  }
  return loss;
}

}  // namespace

ShockFit fit_shock(std::span<const double> observed_xh, int t0, const DiseaseParams& base,
                   const ShockFitOptions& options) {
  if (options.rate_grid.size() < 2)
    throw std::invalid_argument("fit_shock: rate grid needs at least 2 points");
  if (t0 <= 0 || t0 + 1 >= static_cast<int>(observed_xh.size()))
    throw std::invalid_argument("fit_shock: t0 must leave observations on both sides");

  std::vector<double> grid = options.rate_grid;
  std::sort(grid.begin(), grid.end());

  // growth rate over the window ending at t0
  const int win = std::min(options.pre_window, t0 + 1);
  std::span<const double> pre = observed_xh.subspan(t0 + 1 - win, win);
  const double lambda_hat = estimate_growth_rate(pre);

  ShockFit fit;
  fit.lambda_hat = lambda_hat;

  // theta0: match F(theta0) = lambda_hat on the grid, then refine
  auto lambda_gap = [&](double a) { return std::abs(perron(with_rates(base, a, a)) - lambda_hat); };
  std::size_t best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double g = lambda_gap(grid[i]);
    if (g < best_gap) {
      best_gap = g;
      best = i;
    }
  }
  double lo = grid[best > 0 ? best - 1 : 0];
  double hi = grid[std::min(best + 1, grid.size() - 1)];
  double a0 = golden_min(lambda_gap, lo, hi, options.golden_iters);
  if (lambda_gap(a0) > best_gap) a0 = grid[best];
  if (lambda_gap(a0) > options.lambda_match_tol)
    throw std::runtime_error(
        "fit_shock: no theta0 on the grid matches the estimated growth rate within tolerance");
  fit.alpha_i0 = fit.alpha_a0 = a0;

  // state at t0 along the Perron direction, scaled to the observed x_H(t0)
  auto M0 = build_transition_matrix(with_rates(base, a0, a0));
  auto spec = spectral_radius(M0);
  const int hslot = state_dim(base.h) - 1;
  if (!(spec.u[hslot] > 0))
    throw std::runtime_error("fit_shock: Perron direction has no mass on the observable");
  const double C = observed_xh[t0] / spec.u[hslot];
  fit.scale = C;
  Vec x_t0 = C * spec.u;

  // theta1: grid + golden-section refinement (per coordinate in 2-D mode)
  auto loss1 = [&](double ai, double aa) {
    return shock_loss(base, ai, aa, x_t0, observed_xh, t0);
  };
  double bi = grid[0], ba = grid[0];
  double best_loss = std::numeric_limits<double>::infinity();
  if (options.two_dimensional) {
    for (double ai : grid)
      for (double aa : grid) {
        double l = loss1(ai, aa);
        if (l < best_loss) {
          best_loss = l;
          bi = ai;
          ba = aa;
        }
      }
    for (int round = 0; round < 2; ++round) {
      auto bracket = [&](double v) {
        auto it = std::lower_bound(grid.begin(), grid.end(), v);
        std::size_t k = static_cast<std::size_t>(std::distance(grid.begin(), it));
        double l = grid[k > 0 ? k - 1 : 0];
        double r = grid[std::min(k + 1, grid.size() - 1)];
        return std::pair<double, double>(l, r);
      };
      auto [li, ri] = bracket(bi);
      bi = golden_min([&](double v) { return loss1(v, ba); }, li, ri, options.golden_iters);
      auto [la, ra] = bracket(ba);
      ba = golden_min([&](double v) { return loss1(bi, v); }, la, ra, options.golden_iters);
    }
    best_loss = loss1(bi, ba);
  } else {
    std::size_t bidx = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double l = loss1(grid[i], grid[i]);
      if (l < best_loss) {
        best_loss = l;
        bidx = i;
      }
    }
    double l = grid[bidx > 0 ? bidx - 1 : 0];
    double r = grid[std::min(bidx + 1, grid.size() - 1)];
    double refined = golden_min([&](double v) { return loss1(v, v); }, l, r, options.golden_iters);
    if (loss1(refined, refined) <= best_loss) {
      bi = ba = refined;
      best_loss = loss1(refined, refined);
    } else {
      bi = ba = grid[bidx];
    }
  }
  fit.alpha_i1 = bi;
  fit.alpha_a1 = ba;
  fit.residual = best_loss;
  return fit;
}

std::vector<double> ar_coefficients(const Mat& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("ar_coefficients: matrix not square");
  const int n = static_cast<int>(m.rows());
  // Faddeev-LeVerrier: p(z) = z^n + c_1 z^{n-1} + ... + c_n, a_i = -c_i
  Mat mk = Mat::Zero(n, n);
  std::vector<double> a(n, 0.0);
  Mat ident = Mat::Identity(n, n);
  double ck = 1.0;  // c_0 of the recurrence
  for (int k = 1; k <= n; ++k) {
    mk = m * (mk + ck * ident);
    ck = -mk.trace() / static_cast<double>(k);
    if (!std::isfinite(ck))
      throw std::runtime_error(
          "ar_coefficients: overflow in the characteristic recurrence; reduce h");
    a[k - 1] = -ck;
  }
  return a;
}

}  // namespace epi
