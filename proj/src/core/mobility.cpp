#include "mobility.hpp"

#include <cmath>
#include <stdexcept>

namespace epi {

FlowStats flow_stats(std::span<const double> raw) {
  if (raw.size() < 2) throw std::invalid_argument("flow_stats: series shorter than 2");
  FlowStats s;
  for (double v : raw) s.mean += v;
  s.mean /= static_cast<double>(raw.size());
  double ss = 0.0;
  for (double v : raw) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(raw.size()));
  return s;
}

OutflowSeries normalize_flow(std::span<const double> raw) {
  auto stats = flow_stats(raw);
  if (stats.stddev <= 0.0)
    throw std::invalid_argument("normalize_flow: constant series has no scale");
  return normalize_flow_with(raw, stats);
}

OutflowSeries normalize_flow_with(std::span<const double> raw, const FlowStats& stats) {
  if (stats.stddev <= 0.0) throw std::invalid_argument("normalize_flow_with: zero stddev");
  OutflowSeries out;
  out.raw.assign(raw.begin(), raw.end());
  out.f.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out.f[i] = (raw[i] - stats.mean) / stats.stddev;
  return out;
}

std::vector<double> moving_average(std::span<const double> raw, int window) {
  if (window <= 1) return {raw.begin(), raw.end()};
  std::vector<double> out(raw.size());
  const int half = window / 2;
  for (int i = 0; i < static_cast<int>(raw.size()); ++i) {
    int lo = std::max(0, i - half);
    int hi = std::min<int>(raw.size() - 1, i + half);
    double acc = 0.0;
    for (int k = lo; k <= hi; ++k) acc += raw[k];
    out[i] = acc / static_cast<double>(hi - lo + 1);
  }
  return out;
}

namespace {

double apply_form(const MobilityRateSpec& spec, double base, double gamma, double f) {
  switch (spec.form) {
    case RateForm::Linear: return base * (1.0 + gamma * f);
    case RateForm::Logistic: return base * 2.0 / (1.0 + std::exp(-gamma * f));
    case RateForm::Custom:
      if (!spec.custom) throw std::invalid_argument("mobility: custom form without a function");
      return spec.custom(base, f);
  }
  return base;
}

}  // namespace

void MobilityRateSpec::validate(std::span<const int> phase_of_day,
                                const OutflowSeries& flow) const {
  if (base_i.empty() || base_i.size() != base_a.size())
    throw std::invalid_argument("mobility: per-phase base rates missing or mismatched");
  if (gamma_i < 0.0 || gamma_a < 0.0)
    throw std::invalid_argument("mobility: sensitivities must be nonnegative");
  if (phase_of_day.size() < flow.f.size())
    throw std::invalid_argument("mobility: phase schedule does not cover the flow range");
  for (std::size_t t = 0; t < flow.f.size(); ++t) {
    int ph = phase_of_day[t];
    if (ph < 0 || ph >= static_cast<int>(base_i.size()))
      throw std::invalid_argument("mobility: phase index out of range");
    if (form == RateForm::Linear) {
      if (apply_form(*this, base_i[ph], gamma_i, flow.f[t]) < 0.0 ||
          apply_form(*this, base_a[ph], gamma_a, flow.f[t]) < 0.0)
        throw std::invalid_argument(
            "mobility: linear form goes negative at day " + std::to_string(t) +
            "; shrink gamma or switch to the logistic form");
    }
  }
}

std::vector<std::pair<double, double>> contact_rate_series(const MobilityRateSpec& spec,
                                                           std::span<const int> phase_of_day,
                                                           const OutflowSeries& flow) {
  spec.validate(phase_of_day, flow);
  std::vector<std::pair<double, double>> rates;
  rates.reserve(flow.f.size());
  for (std::size_t t = 0; t < flow.f.size(); ++t) {
    int ph = phase_of_day[t];
    rates.emplace_back(apply_form(spec, spec.base_i[ph], spec.gamma_i, flow.f[t]),
                       apply_form(spec, spec.base_a[ph], spec.gamma_a, flow.f[t]));
  }
  return rates;
}

}  // namespace epi
