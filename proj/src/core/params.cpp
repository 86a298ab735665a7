#include "params.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace epi {

int DurationDist::max_support() const {
  for (int d = horizon(); d >= 1; --d)
    if (pmf[d - 1] > 0.0) return d;
  return 0;
}

void DurationDist::validate() const {
  if (pmf.empty()) throw std::invalid_argument("duration pmf is empty");
  double total = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument(std::string("duration pmf entry out of [0,1] for phase ") +
                                  phase_name(phase));
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument(std::string("duration pmf for phase ") + phase_name(phase) +
                                " sums to " + std::to_string(total) + ", expected 1");
}

DurationDist DurationDist::uniform(Phase phase, std::initializer_list<int> days, int h) {
  DurationDist d;
  d.phase = phase;
  d.pmf.assign(h, 0.0);
  const double w = 1.0 / static_cast<double>(days.size());
  for (int day : days) {
    if (day < 1 || day > h) throw std::invalid_argument("uniform support day outside 1..h");
    d.pmf[day - 1] = w;
  }
  return d;
}

DurationDist DurationDist::point_mass(Phase phase, int day, int h) {
  DurationDist d;
  d.phase = phase;
  d.pmf.assign(h, 0.0);
  if (day < 1 || day > h) throw std::invalid_argument("point mass day outside 1..h");
  d.pmf[day - 1] = 1.0;
  return d;
}

std::vector<double> failure_rates(const DurationDist& dist) {
  const int h = dist.horizon();
  std::vector<double> r(h, 0.0);
  // tail(d) = sum_{delta >= d} p(delta), accumulated right to left
  double tail = 0.0;
  std::vector<double> tails(h, 0.0);
  for (int d = h; d >= 1; --d) {
    tail += dist.pmf[d - 1];
    tails[d - 1] = tail;
  }
  for (int d = 1; d <= h; ++d) {
    if (tails[d - 1] > 0.0) {
      double v = dist.pmf[d - 1] / tails[d - 1];
      r[d - 1] = v > 1.0 ? 1.0 : v;  // guard rounding at the last support day
    }
  }
  return r;
}

const DurationDist& DiseaseParams::duration(Phase p) const {
  int i = static_cast<int>(p);
  if (i < 0 || i >= kDurationPhases)
    throw std::invalid_argument("phase has no duration distribution");
  return durations[i];
}

void DiseaseParams::validate() const {
  if (h < 1) throw std::invalid_argument("horizon h must be >= 1");
  for (const auto& d : durations) {
    d.validate();
    if (d.horizon() != h) throw std::invalid_argument("duration pmf length differs from h");
    if (d.max_support() > h) throw std::invalid_argument("duration support exceeds h");
  }
  auto chk01 = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument(std::string(name) + " outside [0,1]");
  };
  chk01(p_i, "p_i");
  chk01(p_h, "p_h");
  chk01(p_d, "p_d");
  if (!(alpha_i >= 0.0) || !(alpha_a >= 0.0))
    throw std::invalid_argument("contact rates must be nonnegative");
}

DiseaseParams DiseaseParams::baseline(int h) {
  DiseaseParams p;
  p.h = h;
  p.durations[static_cast<int>(Phase::E)] = DurationDist::uniform(Phase::E, {3, 4, 5}, h);
  p.durations[static_cast<int>(Phase::P)] = DurationDist::uniform(Phase::P, {1, 2}, h);
  p.durations[static_cast<int>(Phase::I1)] = DurationDist::uniform(Phase::I1, {5, 6, 7}, h);
  p.durations[static_cast<int>(Phase::A)] = DurationDist::point_mass(Phase::A, 11, h);
  p.durations[static_cast<int>(Phase::I2)] = DurationDist::point_mass(Phase::I2, 4, h);
  p.p_i = 0.7;
  p.p_h = 0.05;
  p.p_d = 0.0;
  p.alpha_i = 0.4;
  p.alpha_a = 0.3;
  p.validate();
  return p;
}

FailureRates FailureRates::from(const DiseaseParams& params) {
  FailureRates fr;
  for (int i = 0; i < kDurationPhases; ++i) fr.rates[i] = failure_rates(params.durations[i]);
  return fr;
}

DeathImmunCounters death_immun_update(double x_h, const Vec& x_a, const Vec& x_i2,
                                      const DiseaseParams& params) {
  DeathImmunCounters c;
  c.deaths = params.p_d * x_h;
  double exits = 0.0;
  const auto r_a = failure_rates(params.duration(Phase::A));
  const auto r_i2 = failure_rates(params.duration(Phase::I2));
  for (int d = 0; d < x_a.size() && d < static_cast<int>(r_a.size()); ++d)
    exits += x_a[d] * r_a[d];
  for (int d = 0; d < x_i2.size() && d < static_cast<int>(r_i2.size()); ++d)
    exits += x_i2[d] * r_i2[d];
  c.immunized = (1.0 - params.p_d) * x_h + exits;
  return c;
}

namespace {

using nlohmann::json;

json durations_to_json(const DiseaseParams& p) {
  json j;
  for (int i = 0; i < kDurationPhases; ++i)
    j[phase_name(static_cast<Phase>(i))] = p.durations[i].pmf;
  return j;
}

}  // namespace

DiseaseParams params_from_json(const std::string& text) {
  json j = json::parse(text);
  DiseaseParams p;
  p.h = j.value("h", 25);
  p.p_i = j.value("p_i", 0.7);
  p.p_h = j.value("p_h", 0.05);
  p.p_d = j.value("p_d", 0.0);
  p.alpha_i = j.value("alpha_i", 0.4);
  p.alpha_a = j.value("alpha_a", 0.3);
  if (j.contains("durations")) {
    for (int i = 0; i < kDurationPhases; ++i) {
      auto ph = static_cast<Phase>(i);
      DurationDist d;
      d.phase = ph;
      d.pmf.assign(p.h, 0.0);
      if (j["durations"].contains(phase_name(ph))) {
        auto arr = j["durations"][phase_name(ph)].get<std::vector<double>>();
        if (static_cast<int>(arr.size()) > p.h)
          throw std::invalid_argument(std::string("durations.") + phase_name(ph) +
                                      " longer than h");
        for (std::size_t k = 0; k < arr.size(); ++k) d.pmf[k] = arr[k];
      } else {
        throw std::invalid_argument(std::string("durations.") + phase_name(ph) + " missing");
      }
      p.durations[i] = std::move(d);
    }
  } else {
    p.durations = DiseaseParams::baseline(p.h).durations;
  }
  p.validate();
  return p;
}

std::string params_to_json(const DiseaseParams& params) {
  json j;
  j["h"] = params.h;
  j["p_i"] = params.p_i;
  j["p_h"] = params.p_h;
  j["p_d"] = params.p_d;
  j["alpha_i"] = params.alpha_i;
  j["alpha_a"] = params.alpha_a;
  j["durations"] = durations_to_json(params);
  return j.dump(2);
}

DiseaseParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open params file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return params_from_json(ss.str());
}

void save_params(const DiseaseParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write params file: " + path);
  out << params_to_json(params) << "\n";
}

}  // namespace epi
