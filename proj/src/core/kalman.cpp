#include "kalman.hpp"

#include <Eigen/Cholesky>

namespace epi {

Mat process_noise(const DiseaseParams& params, const Vec& weights) {
  const int n = params.dim();
  if (weights.size() != n)
    throw std::invalid_argument("process_noise: weights length must equal the type count");
  Mat q = Mat::Zero(n, n);
  for (int idx = 0; idx < n; ++idx) {
    const double w = weights[idx];
    if (w < 0.0) throw std::invalid_argument("process_noise: negative weight");
    if (w == 0.0) continue;
    auto cov = offspring_covariance(phase_of_index(idx, params.h), day_of_index(idx, params.h),
                                    params);
    for (const auto& e : cov.entries) q(e.row, e.col) += w * e.value;
  }
  return q;
}

FilterState kalman_step(const FilterState& prev, const Mat& m, const Mat& q,
                        const MeasurementModel& model, const Vec& y) {
  const int n = static_cast<int>(prev.x_hat.size());
  if (m.rows() != n || m.cols() != n || q.rows() != n || q.cols() != n)
    throw std::invalid_argument("kalman_step: dimension mismatch");
  const int k = static_cast<int>(model.observed.size());
  if (y.size() != k || model.R.rows() != k || model.R.cols() != k)
    throw std::invalid_argument("kalman_step: observation dimension mismatch");

  // predict
  Vec xp = m * prev.x_hat;
  Mat pp = m * prev.P * m.transpose() + q;
  pp = 0.5 * (pp + pp.transpose()).eval();

  // innovation
  Mat pht(n, k);
  Vec yp(k);
  for (int j = 0; j < k; ++j) {
    pht.col(j) = pp.col(model.observed[j]);
    yp[j] = xp[model.observed[j]];
  }
  Mat s(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) s(i, j) = pht(model.observed[i], j);
  s += model.R;

  auto solvable = [](const Eigen::LDLT<Mat>& f) {
    if (f.info() != Eigen::Success) return false;
    double dmax = f.vectorD().maxCoeff();
    double dmin = f.vectorD().minCoeff();
    return dmax > 0.0 && dmin > dmax * 1e-14;
  };
  Eigen::LDLT<Mat> ldlt(s);
  if (!solvable(ldlt)) {
    s += 1e-10 * Mat::Identity(k, k);
    ldlt.compute(s);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
      throw std::runtime_error(
          "kalman_step: singular innovation covariance (R = 0 with a degenerate P)");
  }
  // K = P_H^T-side gain: pht * s^{-1}
  Mat gain = ldlt.solve(pht.transpose()).transpose();

  FilterState next;
  next.t = prev.t + 1;
  next.x_hat = xp + gain * (y - yp);
  // P = (I - K P_H) P^- computed as P^- - K * (rows of P^- at the observed coords)
  Mat hp(k, n);
  for (int j = 0; j < k; ++j) hp.row(j) = pp.row(model.observed[j]);
  next.P = pp - gain * hp;
  next.P = 0.5 * (next.P + next.P.transpose()).eval();
  return next;
}

FilterRun filter_series(std::span<const std::optional<double>> observations,
                        const DiseaseParams& params, const Vec& x0, const Mat& p0,
                        const FilterOptions& options) {
  const int n = params.dim();
  if (x0.size() != n || p0.rows() != n || p0.cols() != n)
    throw std::invalid_argument("filter_series: initial condition dimension mismatch");
  auto tm = build_transition_matrix(params);
  const int hslot = n - 1;

  FilterRun run;
  run.states.push_back({x0, p0, 0});
  Vec open_loop = x0;  // M^{t-1} x(0) weights for the paper-literal mode

  for (const auto& obs : observations) {
    const FilterState& prev = run.states.back();
    Vec weights = options.weights == NoiseWeights::OpenLoop
                      ? open_loop
                      : Vec(prev.x_hat.cwiseMax(0.0));
    weights = weights.cwiseMax(0.0);
    Mat q = process_noise(params, weights);

    if (obs.has_value()) {
      MeasurementModel model;
      model.observed = {hslot};
      double r = options.fixed_r ? *options.fixed_r
                                 : std::max(std::abs(*obs), options.r_floor);
      model.R = Mat::Constant(1, 1, r);
      Vec y(1);
      y[0] = *obs;
      Vec xp = tm.m * prev.x_hat;
      FilterState next = kalman_step(prev, tm.m, q, model, y);
      run.innovations.push_back(*obs - xp[hslot]);
      run.states.push_back(std::move(next));
    } else {
      // gap: predict only
      FilterState next;
      next.t = prev.t + 1;
      next.x_hat = tm.m * prev.x_hat;
      next.P = tm.m * prev.P * tm.m.transpose() + q;
      next.P = 0.5 * (next.P + next.P.transpose()).eval();
      run.innovations.push_back(std::nullopt);
      run.states.push_back(std::move(next));
    }
    open_loop = tm.m * open_loop;
  }
  return run;
}

}  // namespace epi
