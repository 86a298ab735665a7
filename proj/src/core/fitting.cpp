#include "fitting.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <thread>

namespace epi {

namespace {

LossEstimate summarize(const std::vector<double>& rep_losses) {
  LossEstimate est;
  const std::size_t n = rep_losses.size();
  if (n == 0) return est;
  double sum = 0.0;
  for (double v : rep_losses) sum += v;
  est.mean = sum / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (double v : rep_losses) ss += (v - est.mean) * (v - est.mean);
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    est.half_width = 1.96 * sd / std::sqrt(static_cast<double>(n));
  }
  return est;
}

double log_value(double x, LogPolicy policy) {
  return policy == LogPolicy::ClampToOne ? std::log(std::max(x, 1.0)) : std::log1p(x);
}

}  // namespace

LossEstimate loss_l1(const std::vector<std::vector<double>>& sims, std::span<const double> obs) {
  std::vector<double> losses;
  losses.reserve(sims.size());
  for (const auto& sim : sims) {
    if (sim.size() < obs.size()) throw std::invalid_argument("loss_l1: trajectory too short");
    double acc = 0.0;
    for (std::size_t t = 0; t < obs.size(); ++t) acc += std::abs(sim[t] - obs[t]);
    losses.push_back(acc / static_cast<double>(obs.size()));
  }
  return summarize(losses);
}

LossEstimate loss_l1_log(const std::vector<std::vector<double>>& sims,
                         std::span<const double> obs, LogPolicy policy) {
  std::vector<double> losses;
  losses.reserve(sims.size());
  for (const auto& sim : sims) {
    if (sim.size() < obs.size())
      throw std::invalid_argument("loss_l1_log: trajectory too short");
    double acc = 0.0;
    for (std::size_t t = 0; t < obs.size(); ++t)
      acc += std::abs(log_value(sim[t], policy) - log_value(obs[t], policy));
    losses.push_back(acc / static_cast<double>(obs.size()));
  }
  return summarize(losses);
}

void PhaseSchedule::validate() const {
  if (!(t2 >= 0 && t3 >= t2)) throw std::invalid_argument("schedule: breakpoints out of order");
  if (!(a1 >= 0 && a2 >= 0 && a3 >= 0))
    throw std::invalid_argument("schedule: negative contact rate");
}

std::vector<std::pair<double, double>> PhaseSchedule::rates(int days) const {
  std::vector<std::pair<double, double>> out;
  out.reserve(days);
  for (int t = 0; t < days; ++t) {
    double a = rate_on(t);
    out.emplace_back(a, a);
  }
  return out;
}

void GridSpec::validate() const {
  if (xe0.empty() || a1.empty() || a2.empty() || a3.empty() || t2.empty() || t3.empty())
    throw std::invalid_argument("grid: every dimension needs at least one value");
}

std::size_t GridSpec::point_count() const {
  return xe0.size() * a1.size() * a2.size() * a3.size() * t2.size() * t3.size();
}

GridSpec GridSpec::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  GridSpec g;
  g.xe0 = j.at("xe0").get<std::vector<double>>();
  g.a1 = j.at("a1").get<std::vector<double>>();
  g.a2 = j.at("a2").get<std::vector<double>>();
  g.a3 = j.at("a3").get<std::vector<double>>();
  g.t2 = j.at("t2").get<std::vector<int>>();
  g.t3 = j.at("t3").get<std::vector<int>>();
  g.validate();
  return g;
}

std::string GridSpec::to_json() const {
  nlohmann::json j;
  j["xe0"] = xe0;
  j["a1"] = a1;
  j["a2"] = a2;
  j["a3"] = a3;
  j["t2"] = t2;
  j["t3"] = t3;
  return j.dump(2);
}

std::vector<double> sample_xh_trajectory(const DiseaseParams& base, const FailureRates& fr,
                                         double xe0, const PhaseSchedule& schedule, int days,
                                         std::uint64_t seed, std::uint64_t rep) {
  Rng rng = make_stream(seed, rep);
  const int h = base.h;
  VecI x = VecI::Zero(state_dim(h));
  // allocate the initial exposed across day positions by the E distribution
  auto counts = sample_multinomial(static_cast<std::int64_t>(std::llround(xe0)),
                                   base.duration(Phase::E).pmf, rng);
  for (int d = 1; d <= h; ++d)
    if (counts[d - 1] > 0) x[state_index(Phase::E, d, h)] = counts[d - 1];

  std::vector<double> xh;
  xh.reserve(days + 1);
  const int hslot = state_dim(h) - 1;
  xh.push_back(static_cast<double>(x[hslot]));
  for (int t = 0; t < days; ++t) {
    double a = schedule.rate_on(t);
    x = step_stochastic(x, base, fr, a, a, rng);
    xh.push_back(static_cast<double>(x[hslot]));
  }
  return xh;
}

namespace {

struct PointKey {
  double xe0, a1, a2, a3;
  int t2, t3;
  bool operator<(const PointKey& o) const {
    return std::tie(xe0, a1, a2, a3, t2, t3) <
           std::tie(o.xe0, o.a1, o.a2, o.a3, o.t2, o.t3);
  }
};

LossEstimate evaluate_point(const DiseaseParams& base, const FailureRates& fr,
                            std::span<const double> observed, const PointKey& pt,
                            const FitOptions& options) {
  PhaseSchedule sched{pt.t2, pt.t3, pt.a1, pt.a2, pt.a3};
  const int days = static_cast<int>(observed.size()) - 1;
  std::vector<double> losses(options.n_reps);
  for (int rep = 0; rep < options.n_reps; ++rep) {
    auto xh = sample_xh_trajectory(base, fr, pt.xe0, sched, days, options.seed,
                                   static_cast<std::uint64_t>(rep));
    double acc = 0.0;
    for (std::size_t t = 0; t < observed.size(); ++t) {
      if (options.loss == LossKind::L1)
        acc += std::abs(xh[t] - observed[t]);
      else
        acc += std::abs(log_value(xh[t], options.log_policy) -
                        log_value(observed[t], options.log_policy));
    }
    losses[rep] = acc / static_cast<double>(observed.size());
  }
  return summarize(losses);
}

// evaluates the given points in parallel; results land at matching indices
std::vector<LossEstimate> evaluate_points(const DiseaseParams& base, const FailureRates& fr,
                                          std::span<const double> observed,
                                          const std::vector<PointKey>& points,
                                          const FitOptions& options) {
  std::vector<LossEstimate> out(points.size());
  unsigned want = options.threads > 0 ? options.threads : std::thread::hardware_concurrency();
  if (want == 0) want = 1;
  want = std::min<unsigned>(want, points.size() == 0 ? 1 : points.size());
  std::atomic<std::size_t> cursor{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = cursor.fetch_add(1);
      if (i >= points.size()) return;
      out[i] = evaluate_point(base, fr, observed, points[i], options);
    }
  };
  if (want <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < want; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

std::vector<double> neighborhood(double center, double step, double lo, double hi) {
  std::vector<double> v;
  for (double c : {center - step, center, center + step})
    if (c >= lo - 1e-12 && c <= hi + 1e-12) v.push_back(std::clamp(c, lo, hi));
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<int> neighborhood_int(int center, int step, int lo, int hi) {
  std::vector<int> v;
  for (int c : {center - step, center, center + step})
    if (c >= lo && c <= hi) v.push_back(c);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

double spacing(const std::vector<double>& vals) {
  if (vals.size() < 2) return 0.0;
  auto s = vals;
  std::sort(s.begin(), s.end());
  double d = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) d = std::max(d, s[i] - s[i - 1]);
  return d;
}

int spacing_int(const std::vector<int>& vals) {
  if (vals.size() < 2) return 0;
  auto s = vals;
  std::sort(s.begin(), s.end());
  int d = 0;
  for (std::size_t i = 1; i < s.size(); ++i) d = std::max(d, s[i] - s[i - 1]);
  return d;
}

}  // namespace

FitResult grid_search_fit(std::span<const double> observed, const DiseaseParams& base,
                          const GridSpec& grid, const FitOptions& options) {
  grid.validate();
  base.validate();
  if (observed.size() < 2) throw std::invalid_argument("grid_search_fit: observations too short");
  if (options.n_reps < 1) throw std::invalid_argument("grid_search_fit: n_reps must be >= 1");
  const int last_day = static_cast<int>(observed.size()) - 1;
  for (int t : grid.t2)
    if (t < 0 || t > last_day) throw std::invalid_argument("grid_search_fit: t2 out of range");
  for (int t : grid.t3)
    if (t < 0 || t > last_day) throw std::invalid_argument("grid_search_fit: t3 out of range");

  const auto fr = FailureRates::from(base);

  FitResult result;
  result.n_reps = options.n_reps;
  result.loss = options.loss;
  result.log_policy = options.log_policy;
  result.seed = options.seed;

  std::map<PointKey, LossEstimate> cache;
  auto run_batch = [&](const std::vector<PointKey>& pts) {
    std::vector<PointKey> fresh;
    for (const auto& p : pts)
      if (!cache.count(p)) fresh.push_back(p);
    auto est = evaluate_points(base, fr, observed, fresh, options);
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      cache.emplace(fresh[i], est[i]);
      result.evaluated.push_back(
          {fresh[i].xe0, {fresh[i].t2, fresh[i].t3, fresh[i].a1, fresh[i].a2, fresh[i].a3},
           est[i]});
    }
  };

  auto make_points = [&](const std::vector<double>& xe0s, const std::vector<double>& a1s,
                         const std::vector<double>& a2s, const std::vector<double>& a3s,
                         const std::vector<int>& t2s, const std::vector<int>& t3s) {
    std::vector<PointKey> pts;
    for (double x : xe0s)
      for (double v1 : a1s)
        for (double v2 : a2s)
          for (double v3 : a3s)
            for (int b2 : t2s)
              for (int b3 : t3s)
                if (b2 <= b3) pts.push_back({x, v1, v2, v3, b2, b3});
    return pts;
  };

  run_batch(make_points(grid.xe0, grid.a1, grid.a2, grid.a3, grid.t2, grid.t3));

  auto incumbent = [&]() {
    PointKey best{};
    double best_loss = std::numeric_limits<double>::infinity();
    bool found = false;
    for (const auto& [key, est] : cache) {
      if (std::isfinite(est.mean) && est.mean < best_loss) {
        best_loss = est.mean;
        best = key;
        found = true;
      }
    }
    if (!found)
      throw std::runtime_error("grid_search_fit: no grid point produced a finite loss");
    return best;
  };

  // refinement: halved steps around the incumbent, clipped to the grid range
  double sx = spacing(grid.xe0) / 2, s1 = spacing(grid.a1) / 2, s2 = spacing(grid.a2) / 2,
         s3 = spacing(grid.a3) / 2;
  int st2 = (spacing_int(grid.t2) + 1) / 2, st3 = (spacing_int(grid.t3) + 1) / 2;
  auto lohi = [](const std::vector<double>& v) {
    auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    return std::pair<double, double>(*mn, *mx);
  };
  auto lohi_int = [](const std::vector<int>& v) {
    auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    return std::pair<int, int>(*mn, *mx);
  };
  auto [xlo, xhi] = lohi(grid.xe0);
  auto [a1lo, a1hi] = lohi(grid.a1);
  auto [a2lo, a2hi] = lohi(grid.a2);
  auto [a3lo, a3hi] = lohi(grid.a3);
  auto [t2lo, t2hi] = lohi_int(grid.t2);
  auto [t3lo, t3hi] = lohi_int(grid.t3);

  for (int round = 0; round < options.refine_rounds; ++round) {
    PointKey c = incumbent();
    auto pts = make_points(neighborhood(c.xe0, sx, xlo, xhi),
                           neighborhood(c.a1, s1, a1lo, a1hi),
                           neighborhood(c.a2, s2, a2lo, a2hi),
                           neighborhood(c.a3, s3, a3lo, a3hi),
                           neighborhood_int(c.t2, st2, t2lo, t2hi),
                           neighborhood_int(c.t3, st3, t3lo, t3hi));
    run_batch(pts);
    sx /= 2;
    s1 /= 2;
    s2 /= 2;
    s3 /= 2;
    st2 = std::max(st2 / 2, 1);
    st3 = std::max(st3 / 2, 1);
  }

  PointKey best = incumbent();
  result.xe0 = best.xe0;
  result.schedule = {best.t2, best.t3, best.a1, best.a2, best.a3};
  result.train_loss = cache.at(best);
  return result;
}

LossEstimate prediction_error(const FitResult& fit, const DiseaseParams& base,
                              std::span<const double> observed_full, int train_end,
                              int test_end, int n_reps, std::uint64_t seed) {
  if (!(train_end < test_end) || test_end >= static_cast<int>(observed_full.size()))
    throw std::invalid_argument("prediction_error: empty or out-of-range test window");
  const auto fr = FailureRates::from(base);
  std::vector<double> losses(n_reps);
  for (int rep = 0; rep < n_reps; ++rep) {
    auto xh = sample_xh_trajectory(base, fr, fit.xe0, fit.schedule, test_end, seed,
                                   static_cast<std::uint64_t>(rep));
    double acc = 0.0;
    for (int t = train_end + 1; t <= test_end; ++t) acc += std::abs(xh[t] - observed_full[t]);
    losses[rep] = acc / static_cast<double>(test_end - train_end);
  }
  return summarize(losses);
}

namespace {

nlohmann::json schedule_to_json(const PhaseSchedule& s) {
  return {{"t2", s.t2}, {"t3", s.t3}, {"a1", s.a1}, {"a2", s.a2}, {"a3", s.a3}};
}

PhaseSchedule schedule_from_json(const nlohmann::json& j) {
  PhaseSchedule s;
  s.t2 = j.at("t2").get<int>();
  s.t3 = j.at("t3").get<int>();
  s.a1 = j.at("a1").get<double>();
  s.a2 = j.at("a2").get<double>();
  s.a3 = j.at("a3").get<double>();
  return s;
}

}  // namespace

std::string FitResult::to_json() const {
  nlohmann::json j;
  j["xe0"] = xe0;
  j["schedule"] = schedule_to_json(schedule);
  j["train_loss"] = {{"mean", train_loss.mean}, {"half_width", train_loss.half_width}};
  j["n_reps"] = n_reps;
  j["loss"] = loss == LossKind::L1 ? "l1" : "l1log";
  j["log_policy"] = log_policy == LogPolicy::ClampToOne ? "clamp1" : "log1p";
  j["seed"] = seed;
  return j.dump(2);
}

FitResult FitResult::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  FitResult r;
  r.xe0 = j.at("xe0").get<double>();
  r.schedule = schedule_from_json(j.at("schedule"));
  r.train_loss.mean = j.at("train_loss").at("mean").get<double>();
  r.train_loss.half_width = j.at("train_loss").at("half_width").get<double>();
  r.n_reps = j.at("n_reps").get<int>();
  r.loss = j.at("loss").get<std::string>() == "l1" ? LossKind::L1 : LossKind::L1Log;
  r.log_policy =
      j.value("log_policy", "clamp1") == std::string("log1p") ? LogPolicy::Log1p
                                                              : LogPolicy::ClampToOne;
  r.seed = j.value("seed", 0ULL);
  return r;
}

}  // namespace epi
