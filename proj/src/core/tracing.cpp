#include "tracing.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>

namespace epi {

namespace {

int first_phi0_day(const std::vector<Phase>& phases, const std::vector<Phase>& phi0) {
  for (std::size_t k = 0; k < phases.size(); ++k)
    for (Phase p : phi0)
      if (phases[k] == p) return static_cast<int>(k) + 1;
  return kNeverTested;
}

double contact_rate_of(Phase p, const DiseaseParams& params) {
  switch (p) {
    case Phase::P:
    case Phase::A: return params.alpha_a;
    case Phase::I1:
    case Phase::I2: return params.alpha_i;
    default: return 0.0;
  }
}

// support days (1-based) of a duration pmf with their probabilities
std::vector<std::pair<int, double>> support_of(const DurationDist& d) {
  std::vector<std::pair<int, double>> s;
  for (int day = 1; day <= d.horizon(); ++day)
    if (d.pmf[day - 1] > 0.0) s.emplace_back(day, d.pmf[day - 1]);
  return s;
}

// distribution of the random-test day X: geometric(epsilon) truncated to
// 1..d_max, mass beyond the horizon collapsing to "never"
std::vector<std::pair<int, double>> random_test_distribution(double epsilon, int d_max) {
  std::vector<std::pair<int, double>> xs;
  if (epsilon <= 0.0) {
    xs.emplace_back(kNeverTested, 1.0);
    return xs;
  }
  if (epsilon >= 1.0) {
    xs.emplace_back(1, 1.0);
    return xs;
  }
  double tail = 1.0;
  for (int k = 1; k <= d_max; ++k) {
    double p = epsilon * std::pow(1.0 - epsilon, k - 1);
    xs.emplace_back(k, p);
    tail -= p;
  }
  xs.emplace_back(kNeverTested, std::max(tail, 0.0));
  return xs;
}

inline int min_day(int a, int b) { return a < b ? a : b; }

// birth type of a child whose course is `phases` and whose test day is d_prime
ExtendedType truncated_child(const std::vector<Phase>& phases, int d_prime) {
  ExtendedType t;
  t.days_until_test = d_prime;
  if (d_prime == kNeverTested || d_prime >= static_cast<int>(phases.size()))
    t.path = phases;
  else
    t.path.assign(phases.begin(), phases.begin() + d_prime);
  return t;
}

}  // namespace

std::vector<PhasePath> enumerate_paths(const DiseaseParams& params, std::size_t cap) {
  params.validate();
  const auto se = support_of(params.duration(Phase::E));
  const auto sp = support_of(params.duration(Phase::P));
  const auto si1 = support_of(params.duration(Phase::I1));
  const auto sa = support_of(params.duration(Phase::A));
  const auto si2 = support_of(params.duration(Phase::I2));

  std::vector<PhasePath> out;
  auto emit = [&](const std::vector<std::pair<Phase, int>>& runs, double prob) {
    if (prob <= 0.0) return;
    if (out.size() >= cap)
      throw std::runtime_error("enumerate_paths: path count exceeds cap of " +
                               std::to_string(cap));
    PhasePath p;
    p.probability = prob;
    for (auto [phase, len] : runs)
      for (int i = 0; i < len; ++i) p.phases.push_back(phase);
    out.push_back(std::move(p));
  };

  for (auto [de, pe] : se) {
    for (auto [dp, pp] : sp) {
      const double base = pe * pp;
      // asymptomatic course
      for (auto [da, pa] : sa)
        emit({{Phase::E, de}, {Phase::P, dp}, {Phase::A, da}}, base * (1.0 - params.p_i) * pa);
      // symptomatic course: hospitalization or a phase-2 tail
      for (auto [di1, pi1] : si1) {
        emit({{Phase::E, de}, {Phase::P, dp}, {Phase::I1, di1}, {Phase::H, 1}},
             base * params.p_i * pi1 * params.p_h);
        for (auto [di2, pi2] : si2)
          emit({{Phase::E, de}, {Phase::P, dp}, {Phase::I1, di1}, {Phase::I2, di2}},
               base * params.p_i * pi1 * (1.0 - params.p_h) * pi2);
      }
    }
  }
  return out;
}

std::string ExtendedType::key() const {
  std::string k;
  k.reserve(path.size() + 12);
  for (Phase p : path) {
    switch (p) {
      case Phase::E: k += 'E'; break;
      case Phase::P: k += 'P'; break;
      case Phase::I1: k += '1'; break;
      case Phase::A: k += 'A'; break;
      case Phase::I2: k += '2'; break;
      case Phase::H: k += 'H'; break;
    }
  }
  k += ':';
  k += days_until_test == kNeverTested ? "inf" : std::to_string(days_until_test);
  return k;
}

ExtendedType sample_child_type(const ExtendedType& parent, const TracingConfig& config,
                               const DiseaseParams& params, Rng& rng) {
  auto paths = enumerate_paths(params, config.path_cap);
  int maxlen = 0;
  for (const auto& p : paths) maxlen = std::max<int>(maxlen, p.phases.size());
  const int d_max = config.d_max > 0 ? config.d_max : maxlen;
  if (d_max < maxlen)
    throw std::invalid_argument("sample_child_type: d_max below the longest path");

  // fresh course
  double u = uniform01(rng);
  std::size_t pick = paths.size() - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    acc += paths[i].probability;
    if (u <= acc) {
      pick = i;
      break;
    }
  }
  const auto& phases = paths[pick].phases;
  const int test_day = first_phi0_day(phases, config.phi0);

  // random-test day
  int x = kNeverTested;
  if (config.epsilon >= 1.0) {
    x = 1;
  } else if (config.epsilon > 0.0) {
    std::geometric_distribution<int> geo(config.epsilon);
    int g = geo(rng) + 1;
    x = g <= d_max ? g : kNeverTested;
  }

  int d_prime = min_day(test_day, x);
  if (config.p_t > 0.0 && parent.days_until_test != kNeverTested &&
      uniform01(rng) < config.p_t) {
    // traced: tested no later than the day after the parent, i.e.
    // parent.days_until_test days counted from the child's first day
    d_prime = min_day(d_prime, min_day(parent.days_until_test, d_max));
  }
  return truncated_child(phases, d_prime);
}

TracingModel::TracingModel(const DiseaseParams& params, const TracingConfig& config)
    : params_(params), config_(config) {
  params_.validate();
  if (!(config.p_t >= 0.0 && config.p_t <= 1.0))
    throw std::invalid_argument("tracing: p_t outside [0,1]");
  if (!(config.epsilon >= 0.0 && config.epsilon <= 1.0))
    throw std::invalid_argument("tracing: epsilon outside [0,1]");

  auto raw = enumerate_paths(params_, config_.path_cap);
  int maxlen = 0;
  for (const auto& p : raw) maxlen = std::max<int>(maxlen, p.phases.size());
  d_max_ = config_.d_max > 0 ? config_.d_max : maxlen;
  if (d_max_ < maxlen)
    throw std::invalid_argument("tracing: d_max below the longest enumerated path");

  paths_.reserve(raw.size());
  for (auto& p : raw) {
    PathDetail d;
    d.phases = std::move(p.phases);
    d.probability = p.probability;
    d.test_day = first_phi0_day(d.phases, config_.phi0);
    paths_.push_back(std::move(d));
  }

  // discover the reachable type space: fresh-infection births, daily aging,
  // and the births of every traced bound that occurs
  law_for_bound(kNeverTested);
  std::deque<int> queue;
  std::vector<char> seen;
  auto enqueue = [&](int idx) {
    if (idx >= static_cast<int>(seen.size())) seen.resize(idx + 1, 0);
    if (!seen[idx]) {
      seen[idx] = 1;
      queue.push_back(idx);
    }
  };
  for (int i = 0; i < static_cast<int>(types_.size()); ++i) enqueue(i);
  while (!queue.empty()) {
    int idx = queue.front();
    queue.pop_front();
    ExtendedType t = types_[idx];  // copy: registration may reallocate types_
    if (t.path.size() >= 2) enqueue(register_type(aged_type(t)));
    if (contact_rate_of(t.path.front(), params_) > 0.0) {
      int bound = t.days_until_test == kNeverTested ? kNeverTested
                                                    : min_day(t.days_until_test, d_max_);
      const auto law = law_for_bound(bound);  // copy: enqueue may extend types_
      for (const auto& [cidx, prob] : law) enqueue(cidx);
    }
    if (types_.size() > config_.type_cap)
      throw std::runtime_error("tracing: extended type space exceeds cap of " +
                               std::to_string(config_.type_cap));
  }

  // assemble the sparse progeny matrix, column = parent
  const int n = type_count();
  std::vector<Eigen::Triplet<double>> trips;
  for (int idx = 0; idx < n; ++idx) {
    const ExtendedType& t = types_[idx];
    if (t.path.size() >= 2) trips.emplace_back(type_index(aged_type(t)), idx, 1.0);
    double alpha = contact_rate_of(t.path.front(), params_);
    if (alpha > 0.0) {
      int bound = t.days_until_test == kNeverTested ? kNeverTested
                                                    : min_day(t.days_until_test, d_max_);
      for (const auto& [cidx, prob] : law_.at(bound))
        trips.emplace_back(cidx, idx, alpha * prob);
    }
  }
  progeny_.resize(n, n);
  progeny_.setFromTriplets(trips.begin(), trips.end());

  birth_ = Vec::Zero(n);
  for (const auto& [idx, prob] : law_.at(kNeverTested)) birth_[idx] = prob;
}

ExtendedType TracingModel::aged_type(const ExtendedType& t) const {
  ExtendedType aged;
  aged.path.assign(t.path.begin() + 1, t.path.end());
  aged.days_until_test =
      t.days_until_test == kNeverTested ? kNeverTested : t.days_until_test - 1;
  return aged;
}

int TracingModel::register_type(const ExtendedType& t) {
  auto k = t.key();
  auto it = index_.find(k);
  if (it != index_.end()) return it->second;
  int idx = static_cast<int>(types_.size());
  types_.push_back(t);
  index_.emplace(std::move(k), idx);
  return idx;
}

int TracingModel::type_index(const ExtendedType& t) const {
  auto it = index_.find(t.key());
  return it == index_.end() ? -1 : it->second;
}

const std::vector<std::pair<int, double>>& TracingModel::law_for_bound(int bound) {
  auto it = law_.find(bound);
  if (it != law_.end()) return it->second;

  // accumulate the birth law: traced with probability p_t (bounded by the
  // parent's remaining days), untraced otherwise
  std::map<int, double> acc;
  const auto xs = random_test_distribution(config_.epsilon, d_max_);
  auto add = [&](int effective_bound, double weight) {
    if (weight <= 0.0) return;
    for (const auto& path : paths_) {
      for (const auto& [x, px] : xs) {
        int d_prime = min_day(min_day(path.test_day, x), effective_bound);
        acc[register_type(truncated_child(path.phases, d_prime))] +=
            weight * path.probability * px;
      }
    }
  };
  if (bound == kNeverTested) {
    add(kNeverTested, 1.0);
  } else {
    add(bound, config_.p_t);
    add(kNeverTested, 1.0 - config_.p_t);
  }
  std::vector<std::pair<int, double>> law(acc.begin(), acc.end());
  return law_.emplace(bound, std::move(law)).first->second;
}

SpectralResult TracingModel::spectral_radius(double tol, int max_iters) const {
  const auto& m = progeny_;
  return power_iteration(
      type_count(), [&m](const Vec& x, Vec& y) { y.noalias() = m * x; }, tol, max_iters);
}

double TracingModel::expected_total_infected(const Vec& x0) const {
  if (x0.size() != type_count())
    throw std::invalid_argument("expected_total_infected: x0 dimension mismatch");
  auto spec = spectral_radius(1e-12, 100000);
  if (!(spec.lambda < 1.0))
    throw std::runtime_error("expected_total_infected: process is supercritical (rho = " +
                             std::to_string(spec.lambda) + " >= 1), the total diverges");
  Eigen::SparseMatrix<double> a(type_count(), type_count());
  a.setIdentity();
  a -= progeny_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(a);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("expected_total_infected: singular I - M");
  Vec z = lu.solve(x0);
  return z.sum();
}

double TracingModel::expected_total_infected(double n_initial) const {
  return expected_total_infected(Vec(n_initial * birth_));
}

std::map<int, std::int64_t> TracingModel::sample_children(int parent_type, Rng& rng) const {
  std::map<int, std::int64_t> children;
  const ExtendedType& t = types_[parent_type];
  if (t.path.size() >= 2) children[type_index(aged_type(t))] += 1;
  double alpha = contact_rate_of(t.path.front(), params_);
  if (alpha > 0.0) {
    int bound =
        t.days_until_test == kNeverTested ? kNeverTested : min_day(t.days_until_test, d_max_);
    const auto& law = law_.at(bound);
    std::int64_t n = sample_poisson(alpha, rng);
    if (n > 0) {
      std::vector<double> probs;
      probs.reserve(law.size());
      for (const auto& [idx, p] : law) probs.push_back(p);
      auto counts = sample_multinomial(n, probs, rng);
      for (std::size_t i = 0; i < law.size(); ++i)
        if (counts[i] > 0) children[law[i].first] += counts[i];
    }
  }
  return children;
}

TracingModel::SimulationResult TracingModel::simulate(std::int64_t n_initial, int max_days,
                                                      Rng& rng) const {
  SimulationResult res;
  std::map<int, std::int64_t> pop;
  {
    const auto& law = law_.at(kNeverTested);
    std::vector<double> probs;
    probs.reserve(law.size());
    for (const auto& [idx, p] : law) probs.push_back(p);
    auto counts = sample_multinomial(n_initial, probs, rng);
    for (std::size_t i = 0; i < law.size(); ++i)
      if (counts[i] > 0) pop[law[i].first] += counts[i];
  }
  for (int day = 0; day <= max_days; ++day) {
    std::int64_t total = 0;
    for (const auto& [idx, n] : pop) total += n;
    res.total_person_days += static_cast<double>(total);
    res.days = day;
    if (total == 0) {
      res.extinct = true;
      return res;
    }
    std::map<int, std::int64_t> next;
    for (const auto& [idx, n] : pop) {
      const ExtendedType& t = types_[idx];
      double alpha = contact_rate_of(t.path.front(), params_);
      if (alpha > 0.0) {
        int bound = t.days_until_test == kNeverTested ? kNeverTested
                                                      : min_day(t.days_until_test, d_max_);
        const auto& law = law_.at(bound);
        std::int64_t kids = sample_poisson(alpha * static_cast<double>(n), rng);
        if (kids > 0) {
          std::vector<double> probs;
          probs.reserve(law.size());
          for (const auto& [cidx, p] : law) probs.push_back(p);
          auto counts = sample_multinomial(kids, probs, rng);
          for (std::size_t i = 0; i < law.size(); ++i)
            if (counts[i] > 0) next[law[i].first] += counts[i];
        }
      }
      if (t.path.size() >= 2) next[type_index(aged_type(t))] += n;
    }
    pop = std::move(next);
  }
  return res;
}

double expected_total_infected(const Mat& m, const Vec& x0) {
  if (m.rows() != m.cols() || x0.size() != m.rows())
    throw std::invalid_argument("expected_total_infected: dimension mismatch");
  auto spec = spectral_radius(m, 1e-12, 100000);
  if (!(spec.lambda < 1.0))
    throw std::runtime_error("expected_total_infected: process is supercritical (rho = " +
                             std::to_string(spec.lambda) + " >= 1), the total diverges");
  Mat a = Mat::Identity(m.rows(), m.cols()) - m;
  Vec z = a.partialPivLu().solve(x0);
  return z.sum();
}

CriticalTracingResult critical_tracing_probability(const DiseaseParams& params, double epsilon,
                                                   const TracingConfig& base, double tol) {
  auto rho_at = [&](double pt) {
    TracingConfig c = base;
    c.p_t = pt;
    c.epsilon = epsilon;
    TracingModel model(params, c);
    return model.spectral_radius(1e-12).lambda;
  };
  CriticalTracingResult res;
  res.rho_at_zero = rho_at(0.0);
  res.rho_at_one = rho_at(1.0);
  if (res.rho_at_zero < res.rho_at_one - 1e-9) {
    res.note = "rho is not nonincreasing in p_t on the endpoints";
    return res;
  }
  if (res.rho_at_zero < 1.0) {
    res.note = "already subcritical at p_t = 0";
    return res;
  }
  if (res.rho_at_one >= 1.0) {
    res.note = "still supercritical at p_t = 1";
    return res;
  }
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double rho = rho_at(mid);
    if (std::abs(rho - 1.0) <= tol) {
      res.p_star = mid;
      return res;
    }
    if (rho > 1.0)
      lo = mid;
    else
      hi = mid;
  }
  res.note = "bisection did not reach |rho - 1| <= tol";
  return res;
}

std::vector<TracingSweepRow> tracing_sweep(const DiseaseParams& params,
                                           const TracingConfig& base,
                                           const std::vector<double>& p_t_values,
                                           const std::vector<double>& epsilon_values,
                                           double n_initial) {
  std::vector<TracingSweepRow> rows;
  for (double pt : p_t_values) {
    for (double eps : epsilon_values) {
      TracingConfig c = base;
      c.p_t = pt;
      c.epsilon = eps;
      TracingModel model(params, c);
      TracingSweepRow row;
      row.p_t = pt;
      row.epsilon = eps;
      row.rho = model.spectral_radius(1e-12).lambda;
      row.expected_total = row.rho < 1.0 ? model.expected_total_infected(n_initial)
                                         : std::numeric_limits<double>::infinity();
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace epi
