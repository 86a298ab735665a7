#pragma once

#include "types.hpp"

#include <cmath>
#include <functional>

namespace epi {

struct SpectralResult {
  double lambda = 0.0;
  Vec u;  ///< unit 1-norm, nonnegative Perron direction
  bool converged = false;
  int iterations = 0;
};

/// Power iteration for the Perron root of a nonnegative operator given by its
/// action y = A x. All-ones start; stops when both the eigenvalue change and
/// the residual |Au - lambda u|_1 fall below tol. Restarts from a perturbed
/// positive vector when the estimate stagnates without meeting the residual
/// test (no deflation involved).
inline SpectralResult power_iteration(int n, const std::function<void(const Vec&, Vec&)>& apply,
                                      double tol = 1e-10, int max_iters = 10000) {
  SpectralResult res;
  if (n == 0) {
    res.converged = true;
    return res;
  }
  Vec v = Vec::Ones(n) / static_cast<double>(n);
  Vec w(n);
  double lambda_prev = -1.0;
  int stagnant = 0;
  for (int it = 1; it <= max_iters; ++it) {
    apply(v, w);
    double norm = w.lpNorm<1>();
    res.iterations = it;
    if (norm == 0.0) {
      // nilpotent direction: spectral radius 0
      res.lambda = 0.0;
      res.u = v;
      res.converged = true;
      return res;
    }
    double lambda = norm;  // v has unit 1-norm and both are nonnegative
    Vec u = w / norm;
    double residual = (w - lambda * v).lpNorm<1>();
    if (std::abs(lambda - lambda_prev) <= tol * std::max(1.0, lambda) &&
        residual <= tol * std::max(1.0, lambda)) {
      res.lambda = lambda;
      res.u = u;
      res.converged = true;
      return res;
    }
    if (std::abs(lambda - lambda_prev) <= 1e-3 * tol * std::max(1.0, lambda) &&
        residual > 1e3 * tol * std::max(1.0, lambda)) {
      // eigenvalue estimate frozen but the direction is not settling
      // (e.g. rotating pair of equal modulus): nudge and restart
      if (++stagnant > 50) {
        for (int i = 0; i < n; ++i)
          v[i] = u[i] + (1.0 + 0.5 * std::cos(0.7 * i)) / (3.0 * n);
        v /= v.lpNorm<1>();
        lambda_prev = -1.0;
        stagnant = 0;
        continue;
      }
    } else {
      stagnant = 0;
    }
    lambda_prev = lambda;
    v = u;
  }
  apply(v, w);
  res.lambda = w.lpNorm<1>();
  res.u = v;
  res.converged = false;
  return res;
}

}  // namespace epi
