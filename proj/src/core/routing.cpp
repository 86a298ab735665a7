#include "routing.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace epi {

std::string CohortId::str() const {
  std::string s = region;
  if (!prev_region.empty()) s += "/" + prev_region;
  if (!age.empty()) s += "/" + age;
  return s;
}

Mat infection_rate_matrix(const Mat& q, const Mat& n, const Vec& populations, double rtol) {
  const auto c = n.rows();
  if (n.cols() != c || q.rows() != c || q.cols() != c || populations.size() != c)
    throw std::invalid_argument("infection_rate_matrix: dimension mismatch");
  std::ostringstream bad;
  int violations = 0;
  for (int i = 0; i < c; ++i) {
    for (int j = i + 1; j < c; ++j) {
      double lhs = populations[i] * n(i, j);
      double rhs = populations[j] * n(j, i);
      double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
      if (std::abs(lhs - rhs) > rtol * scale) {
        if (violations++ < 8) bad << " (" << i << "," << j << ")";
      }
    }
  }
  if (violations > 0)
    throw std::invalid_argument("infection_rate_matrix: reciprocity violated for " +
                                std::to_string(violations) + " pair(s):" + bad.str());
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j) {
      if (!(q(i, j) >= 0.0 && q(i, j) <= 1.0))
        throw std::invalid_argument("infection_rate_matrix: q outside [0,1]");
      if (!(n(i, j) >= 0.0))
        throw std::invalid_argument("infection_rate_matrix: negative contact intensity");
    }
  return q.cwiseProduct(n);
}

Mat total_contacts(const std::vector<Mat>& addends, const Vec& populations, double rtol) {
  if (addends.empty()) throw std::invalid_argument("total_contacts: no addends");
  Mat total = Mat::Zero(addends[0].rows(), addends[0].cols());
  for (const auto& a : addends) {
    // validation piggybacks on the rate check with q = 1
    infection_rate_matrix(Mat::Ones(a.rows(), a.cols()), a, populations, rtol);
    total += a;
  }
  return total;
}

Mat transit_contacts(const Mat& visits, const Vec& beta, const Vec& populations) {
  const auto c = visits.rows();
  const auto z = visits.cols();
  if (beta.size() != z || populations.size() != c)
    throw std::invalid_argument("transit_contacts: dimension mismatch");
  if (std::abs(beta.mean() - 1.0) > 1e-9)
    throw std::invalid_argument("transit_contacts: beta must have mean 1 (gauge fixing)");
  for (int i = 0; i < c; ++i)
    if (populations[i] <= 0.0 && visits.row(i).cwiseAbs().sum() > 0.0)
      throw std::invalid_argument("transit_contacts: cohort " + std::to_string(i) +
                                  " has visits but no population");
  Mat out = Mat::Zero(c, c);
  for (int i = 0; i < c; ++i) {
    if (populations[i] <= 0.0) continue;
    for (int j = 0; j < c; ++j) {
      double acc = 0.0;
      for (int k = 0; k < z; ++k) acc += beta[k] * visits(i, k) * visits(j, k);
      out(i, j) = acc / populations[i];
    }
  }
  return out;
}

void CohortSystem::validate() const {
  const int c = size();
  if (c == 0) throw std::invalid_argument("cohort system: no cohorts");
  if (alpha.rows() != c || alpha.cols() != c)
    throw std::invalid_argument("cohort system: alpha dimension mismatch");
  if (routing.rows() != c || routing.cols() != c)
    throw std::invalid_argument("cohort system: routing dimension mismatch");
  if (static_cast<int>(states.size()) != c)
    throw std::invalid_argument("cohort system: states dimension mismatch");
  if (arrivals.size() != 0 && arrivals.size() != c)
    throw std::invalid_argument("cohort system: arrivals dimension mismatch");
  for (const auto& cohort : cohorts) {
    cohort.params.validate();
    if (cohort.params.h != h)
      throw std::invalid_argument("cohort system: all cohorts must share the horizon h");
    if (cohort.population < 0.0)
      throw std::invalid_argument("cohort system: negative population");
  }
  for (int i = 0; i < c; ++i) {
    if (states[i].size() != state_dim(h))
      throw std::invalid_argument("cohort system: state dimension mismatch");
    double row = 0.0;
    for (int j = 0; j < c; ++j) {
      if (!(routing(i, j) >= 0.0 && routing(i, j) <= 1.0))
        throw std::invalid_argument("cohort system: routing fraction outside [0,1]");
      row += routing(i, j);
    }
    if (row > 1.0 + 1e-12)
      throw std::invalid_argument("cohort system: routing row " + std::to_string(i) +
                                  " sums to " + std::to_string(row) + " > 1");
    if (!(alpha.row(i).minCoeff() >= 0.0))
      throw std::invalid_argument("cohort system: negative infection rate");
  }
}

namespace {

// infectious mass of a state: P, A, I1, I2 blocks summed
double infectious_mass(const Vec& x, int h) {
  double acc = 0.0;
  for (Phase tau : {Phase::P, Phase::A, Phase::I1, Phase::I2})
    for (int d = 1; d <= h; ++d) acc += x[state_index(tau, d, h)];
  return acc;
}

std::vector<TransitionMatrix> within_cohort_matrices(const CohortSystem& system) {
  std::vector<TransitionMatrix> ms;
  ms.reserve(system.size());
  for (int c = 0; c < system.size(); ++c) {
    DiseaseParams p = system.cohorts[c].params;
    p.alpha_i = system.alpha(c, c);
    p.alpha_a = system.alpha(c, c);
    ms.push_back(build_transition_matrix(p));
  }
  return ms;
}

std::vector<Vec> epidemic_stage_with(const CohortSystem& system,
                                     const std::vector<TransitionMatrix>& within) {
  const int c = system.size();
  const int h = system.h;
  std::vector<Vec> y(c);
  for (int i = 0; i < c; ++i) y[i] = within[i].m * system.states[i];
  // cross-cohort infections: a single rate applies to every infectious phase
  const int e1 = state_index(Phase::E, 1, h);
  for (int dst = 0; dst < c; ++dst) {
    for (int src = 0; src < c; ++src) {
      if (src == dst) continue;
      double a = system.alpha(src, dst);
      if (a != 0.0) y[dst][e1] += a * infectious_mass(system.states[src], h);
    }
  }
  return y;
}

}  // namespace

std::vector<Vec> epidemic_stage(const CohortSystem& system) {
  system.validate();
  return epidemic_stage_with(system, within_cohort_matrices(system));
}

void routing_stage(CohortSystem& system, const std::vector<Vec>& y) {
  const int c = system.size();
  const int h = system.h;
  const int hslot = state_dim(h) - 1;
  std::vector<Vec> next(c);
  for (int dst = 0; dst < c; ++dst) {
    Vec x = Vec::Zero(state_dim(h));
    for (int src = 0; src < c; ++src) {
      double r = system.routing(src, dst);
      if (r != 0.0) x += r * y[src];
    }
    x[hslot] = y[dst][hslot];  // hospitalized cases stay put
    next[dst] = std::move(x);
  }
  Vec pops(c);
  for (int dst = 0; dst < c; ++dst) {
    double n = 0.0;
    for (int src = 0; src < c; ++src)
      n += system.routing(src, dst) * system.cohorts[src].population;
    if (system.arrivals.size() == c) n += system.arrivals[dst];
    pops[dst] = n;
  }
  for (int i = 0; i < c; ++i) {
    system.states[i] = std::move(next[i]);
    system.cohorts[i].population = pops[i];
  }
}

CohortTrajectories simulate_cohorts(CohortSystem system, int days) {
  system.validate();
  if (days < 0) throw std::invalid_argument("simulate_cohorts: negative horizon");
  const auto within = within_cohort_matrices(system);
  CohortTrajectories out;
  out.states.resize(system.size());
  out.populations.resize(system.size());
  for (int i = 0; i < system.size(); ++i) {
    out.states[i].push_back(system.states[i]);
    out.populations[i].push_back(system.cohorts[i].population);
  }
  for (int t = 0; t < days; ++t) {
    auto y = epidemic_stage_with(system, within);
    routing_stage(system, y);
    for (int i = 0; i < system.size(); ++i) {
      out.states[i].push_back(system.states[i]);
      out.populations[i].push_back(system.cohorts[i].population);
    }
  }
  return out;
}

namespace {

struct MaxEntWork {
  // entries are the admissible (row, col) pairs; groups are the flow
  // constraints; rows cover every cohort with at least one entry
  struct Entry {
    int row, col;
    int group;  // -1 when pinned by a zero flow
    double weight;
  };
  std::vector<Entry> entries;
  std::vector<double> deltas;                 // per group
  std::vector<std::vector<int>> group_entries;
  std::vector<std::vector<int>> row_entries;
};

}  // namespace

MaxEntResult maxent_routing(const MaxEntInstance& instance, const MaxEntOptions& options) {
  const int c = static_cast<int>(instance.ids.size());
  if (instance.populations.size() != c)
    throw std::invalid_argument("maxent_routing: populations size mismatch");

  // group key: (sleep region of row, sleep region of col, age)
  std::map<std::tuple<std::string, std::string, std::string>, int> group_index;
  MaxEntWork w;
  auto sleep_of = [&](int i) {
    const auto& id = instance.ids[i];
    return id.prev_region.empty() ? id.region : id.prev_region;
  };
  for (const auto& f : instance.flows) {
    auto key = std::make_tuple(f.from_region, f.to_region, f.age);
    if (group_index.count(key))
      throw std::invalid_argument("maxent_routing: duplicate flow for (" + f.from_region +
                                  "," + f.to_region + "," + f.age + ")");
    group_index[key] = static_cast<int>(w.deltas.size());
    w.deltas.push_back(f.count);
  }
  w.group_entries.resize(w.deltas.size());
  w.row_entries.resize(c);

  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) {
      if (instance.ids[i].age != instance.ids[j].age) continue;  // age is preserved
      auto key = std::make_tuple(sleep_of(i), sleep_of(j), instance.ids[i].age);
      auto it = group_index.find(key);
      int group = it == group_index.end() ? -1 : it->second;
      // an absent flow row means zero observed flow: pin the entries
      if (group >= 0 && w.deltas[group] <= 0.0) group = -1;
      MaxEntWork::Entry e{i, j, group, instance.populations[i]};
      if (group >= 0) {
        w.group_entries[group].push_back(static_cast<int>(w.entries.size()));
        w.row_entries[i].push_back(static_cast<int>(w.entries.size()));
        w.entries.push_back(e);
      }
      // pinned entries are omitted entirely (their value is 0)
    }
  }

  // feasibility: per (sleep region, age), observed outflow cannot exceed the
  // sleeping population
  {
    std::map<std::pair<std::string, std::string>, double> out_flow, sleeping;
    for (const auto& f : instance.flows)
      out_flow[{f.from_region, f.age}] += f.count;
    for (int i = 0; i < c; ++i)
      sleeping[{sleep_of(i), instance.ids[i].age}] += instance.populations[i];
    for (const auto& [key, total] : out_flow) {
      double cap = sleeping.count(key) ? sleeping.at(key) : 0.0;
      if (total > cap * (1.0 + 1e-9))
        throw std::invalid_argument("maxent_routing: flows out of region " + key.first +
                                    " (age " + key.second + ") total " + std::to_string(total) +
                                    " but only " + std::to_string(cap) + " slept there");
    }
    for (std::size_t g = 0; g < w.deltas.size(); ++g) {
      if (w.deltas[g] > 0.0 && w.group_entries[g].empty())
        throw std::invalid_argument("maxent_routing: positive flow with no admissible entries");
    }
  }

  const int ne = static_cast<int>(w.entries.size());
  std::vector<double> lambda(w.deltas.size(), 0.0), mu(c, 0.0), x(ne, 0.0);

  auto primal = [&](int e) {
    const auto& en = w.entries[e];
    return std::exp(-1.0 - lambda[en.group] * en.weight - mu[en.row]);
  };

  auto group_value = [&](int g, double lam) {
    double acc = 0.0;
    for (int e : w.group_entries[g]) {
      const auto& en = w.entries[e];
      acc += en.weight * std::exp(-1.0 - lam * en.weight - mu[en.row]);
    }
    return acc;
  };

  MaxEntResult res;
  int sweep = 0;
  for (; sweep < options.max_sweeps; ++sweep) {
    // flow multipliers: 1-D monotone solves
    for (std::size_t g = 0; g < w.deltas.size(); ++g) {
      if (w.group_entries[g].empty()) continue;
      double lo = lambda[g], hi = lambda[g];
      double flo = group_value(g, lo);
      if (flo < w.deltas[g]) {
        double step = 1.0;
        while (group_value(g, lo - step) < w.deltas[g] && step < 1e12) step *= 2.0;
        lo -= step;
      } else {
        double step = 1.0;
        while (group_value(g, hi + step) > w.deltas[g] && step < 1e12) step *= 2.0;
        hi += step;
      }
      for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (group_value(g, mid) > w.deltas[g])
          lo = mid;
        else
          hi = mid;
      }
      lambda[g] = 0.5 * (lo + hi);
    }
    // row multipliers: closed form with the nonnegativity clamp
    for (int i = 0; i < c; ++i) {
      if (w.row_entries[i].empty()) {
        mu[i] = 0.0;
        continue;
      }
      double a = 0.0;
      for (int e : w.row_entries[i]) {
        const auto& en = w.entries[e];
        a += std::exp(-1.0 - lambda[en.group] * en.weight);
      }
      mu[i] = a > 1.0 ? std::log(a) : 0.0;
    }
    // KKT residual
    double resid = 0.0;
    for (std::size_t g = 0; g < w.deltas.size(); ++g) {
      if (w.group_entries[g].empty()) continue;
      double acc = 0.0;
      for (int e : w.group_entries[g]) acc += w.entries[e].weight * primal(e);
      resid = std::max(resid, std::abs(acc - w.deltas[g]) / std::max(1.0, w.deltas[g]));
    }
    for (int i = 0; i < c; ++i) {
      double rs = 0.0;
      for (int e : w.row_entries[i]) rs += primal(e);
      resid = std::max(resid, rs - 1.0);
      resid = std::max(resid, std::abs(mu[i] * (rs - 1.0)));
    }
    if (resid <= options.kkt_tol) {
      res.kkt_residual = resid;
      res.converged = true;
      break;
    }
    res.kkt_residual = resid;
  }
  res.sweeps = sweep + 1;

  res.routing = Mat::Zero(c, c);
  res.objective = 0.0;
  for (int e = 0; e < ne; ++e) {
    double v = primal(e);
    if (v < 1e-300) v = 0.0;  // the dual has pushed the entry to zero
    res.routing(w.entries[e].row, w.entries[e].col) = v;
    if (v > 0.0) res.objective += v * std::log(1.0 / v);
  }
  return res;
}

}  // namespace epi
