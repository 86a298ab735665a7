#include "run.hpp"

#include "branching.hpp"
#include "csv.hpp"
#include "fitting.hpp"
#include "kalman.hpp"
#include "meanfield.hpp"
#include "mobility.hpp"
#include "params.hpp"
#include "routing.hpp"
#include "tracing.hpp"

#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace epi {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << text;
}

std::string iso_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&tt, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

DiseaseParams params_for(const RunConfig& cfg) {
  return cfg.params_path.empty() ? DiseaseParams::baseline() : load_params(cfg.params_path);
}

// day index of a --train-end/--test-end value: a date resolves against the
// series start, otherwise it is a plain day index
int day_index_of(const std::string& value, const Date& start) {
  if (value.find('-') != std::string::npos)
    return static_cast<int>(days_between(start, parse_date(value)));
  return std::stoi(value);
}

Vec initial_state(const DiseaseParams& p, long long exposed) {
  Vec x0 = Vec::Zero(p.dim());
  x0[state_index(Phase::E, 1, p.h)] = static_cast<double>(exposed);
  return x0;
}

void write_trajectory_wide(const std::string& path, const std::vector<Vec>& traj, int h) {
  std::ostringstream out;
  out << "t,x_H,sum_E,sum_P,sum_I1,sum_A,sum_I2\n";
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const Vec& x = traj[t];
    double sums[kDurationPhases] = {0, 0, 0, 0, 0};
    for (int p = 0; p < kDurationPhases; ++p)
      for (int d = 1; d <= h; ++d) sums[p] += x[state_index(static_cast<Phase>(p), d, h)];
    out << t << "," << fmt_double(x[state_dim(h) - 1]);
    out << "," << fmt_double(sums[0]) << "," << fmt_double(sums[1]) << ","
        << fmt_double(sums[2]) << "," << fmt_double(sums[3]) << "," << fmt_double(sums[4])
        << "\n";
  }
  write_file(path, out.str());
}

void write_trajectory_long(const std::string& path, const std::vector<Vec>& traj, int h) {
  std::ostringstream out;
  out << "t,phase,day,value\n";
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const Vec& x = traj[t];
    for (int i = 0; i < state_dim(h); ++i) {
      Phase ph = phase_of_index(i, h);
      out << t << "," << phase_name(ph) << "," << (ph == Phase::H ? 1 : day_of_index(i, h))
          << "," << fmt_double(x[i]) << "\n";
    }
  }
  write_file(path, out.str());
}

std::vector<Vec> to_real(const std::vector<VecI>& states) {
  std::vector<Vec> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.cast<double>());
  return out;
}

// per-day contact rates: constant from params, or mobility-modulated when a
// mobility file plus spec are configured
std::vector<std::pair<double, double>> rate_schedule(const RunConfig& cfg,
                                                     const DiseaseParams& params, int days,
                                                     std::vector<std::string>& outputs,
                                                     const std::string& out_dir) {
  if (cfg.mobility_path.empty())
    return std::vector<std::pair<double, double>>(days, {params.alpha_i, params.alpha_a});

  auto series = load_daily_series(cfg.mobility_path);
  json spec_json;
  if (!cfg.params_path.empty()) spec_json = json::parse(read_file(cfg.params_path));
  MobilityRateSpec spec;
  std::vector<int> breakpoints;
  int smooth = 1;
  if (spec_json.contains("mobility")) {
    const auto& m = spec_json["mobility"];
    spec.base_i = m.value("base_i", std::vector<double>{params.alpha_i});
    spec.base_a = m.value("base_a", std::vector<double>{params.alpha_a});
    spec.gamma_i = m.value("gamma_i", 0.0);
    spec.gamma_a = m.value("gamma_a", 0.0);
    std::string form = m.value("form", "linear");
    spec.form = form == "logistic" ? RateForm::Logistic : RateForm::Linear;
    breakpoints = m.value("breakpoints", std::vector<int>{});
    smooth = m.value("smooth_window", 1);
  } else {
    spec.base_i = {params.alpha_i};
    spec.base_a = {params.alpha_a};
  }

  std::vector<double> raw = smooth > 1 ? moving_average(series.values, smooth) : series.values;
  auto flow = normalize_flow(raw);
  std::vector<int> phase_of_day(flow.f.size(), 0);
  for (std::size_t t = 0; t < phase_of_day.size(); ++t)
    for (std::size_t b = 0; b < breakpoints.size(); ++b)
      if (static_cast<int>(t) >= breakpoints[b]) phase_of_day[t] = static_cast<int>(b) + 1;
  auto rates = contact_rate_series(spec, phase_of_day, flow);
  if (static_cast<int>(rates.size()) < days)
    throw std::invalid_argument("mobility series shorter than the requested horizon");

  std::ostringstream out;
  out << "date,alpha_i,alpha_a\n";
  for (std::size_t t = 0; t < rates.size(); ++t)
    out << format_date(add_days(series.start, t)) << "," << fmt_double(rates[t].first) << ","
        << fmt_double(rates[t].second) << "\n";
  auto path = out_dir + "/rates.csv";
  write_file(path, out.str());
  outputs.push_back("rates.csv");

  rates.resize(days);
  return rates;
}

struct CohortSetup {
  CohortSystem system;
  MaxEntInstance instance;
};

CohortSetup load_cohort_config(const std::string& path) {
  auto j = json::parse(read_file(path));
  CohortSetup setup;
  CohortSystem& sys = setup.system;
  sys.h = j.value("h", 25);
  DiseaseParams shared = j.contains("params")
                             ? params_from_json(j["params"].dump())
                             : DiseaseParams::baseline(sys.h);
  if (shared.h != sys.h) throw std::invalid_argument("cohort config: params h differs");

  for (const auto& cj : j.at("cohorts")) {
    Cohort c;
    c.id.region = cj.value("region", "");
    c.id.prev_region = cj.value("prev_region", "");
    c.id.age = cj.value("age", "all");
    c.population = cj.value("population", 0.0);
    c.params = cj.contains("params") ? params_from_json(cj["params"].dump()) : shared;
    sys.cohorts.push_back(std::move(c));
    Vec x0 = Vec::Zero(state_dim(sys.h));
    x0[state_index(Phase::E, 1, sys.h)] = cj.value("initial_exposed", 0.0);
    sys.states.push_back(std::move(x0));
  }
  const int n = sys.size();

  auto load_matrix = [&](const char* key) {
    auto rows = j.at(key).get<std::vector<std::vector<double>>>();
    if (static_cast<int>(rows.size()) != n)
      throw std::invalid_argument(std::string("cohort config: ") + key + " row count");
    Mat m(n, n);
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(rows[i].size()) != n)
        throw std::invalid_argument(std::string("cohort config: ") + key + " column count");
      for (int k = 0; k < n; ++k) m(i, k) = rows[i][k];
    }
    return m;
  };

  Vec populations(n);
  for (int i = 0; i < n; ++i) populations[i] = sys.cohorts[i].population;

  if (j.contains("alpha")) {
    sys.alpha = load_matrix("alpha");
  } else if (j.contains("q") && j.contains("n")) {
    sys.alpha = infection_rate_matrix(load_matrix("q"), load_matrix("n"), populations);
  } else {
    sys.alpha = Mat::Zero(n, n);
  }
  sys.routing = j.contains("routing") ? load_matrix("routing")
                                      : Mat(Mat::Identity(n, n));
  if (j.contains("arrivals")) {
    auto arr = j["arrivals"].get<std::vector<double>>();
    if (static_cast<int>(arr.size()) != n)
      throw std::invalid_argument("cohort config: arrivals size");
    sys.arrivals = Eigen::Map<Vec>(arr.data(), n);
  }

  for (int i = 0; i < n; ++i) setup.instance.ids.push_back(sys.cohorts[i].id);
  setup.instance.populations = populations;
  return setup;
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
  auto j = json::parse(text);
  RunConfig c;
  c.command = j.at("command").get<std::string>();
  c.params_path = j.value("params", "");
  c.data_path = j.value("data", "");
  c.mobility_path = j.value("mobility", "");
  c.flows_path = j.value("flows", "");
  c.visits_path = j.value("visits", "");
  c.cohorts_path = j.value("cohorts", "");
  c.grid_path = j.value("grid", "");
  c.fit_path = j.value("fit", "");
  c.out_dir = j.value("out", ".");
  c.loss = j.value("loss", "l1log");
  c.log_policy = j.value("log_policy", "clamp1");
  c.format = j.value("format", "wide");
  c.train_end = j.value("train_end", "");
  c.test_end = j.value("test_end", "");
  c.days = j.value("days", 60);
  c.reps = j.value("reps", 200);
  c.refine_rounds = j.value("refine_rounds", 2);
  c.threads = j.value("threads", 0);
  c.initial_exposed = j.value("initial_exposed", 200LL);
  if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
  c.paper_weights = j.value("paper_weights", false);
  if (j.contains("fixed_r") && !j["fixed_r"].is_null()) c.fixed_r = j["fixed_r"].get<double>();
  c.pt_grid = j.value("pt_grid", std::vector<double>{});
  c.eps_grid = j.value("eps_grid", std::vector<double>{});
  c.p_t = j.value("p_t", 0.0);
  c.epsilon = j.value("epsilon", 0.0);
  c.d_max = j.value("d_max", 0);
  return c;
}

std::string RunConfig::to_json() const {
  json j;
  j["command"] = command;
  j["params"] = params_path;
  j["data"] = data_path;
  j["mobility"] = mobility_path;
  j["flows"] = flows_path;
  j["visits"] = visits_path;
  j["cohorts"] = cohorts_path;
  j["grid"] = grid_path;
  j["fit"] = fit_path;
  j["out"] = out_dir;
  j["loss"] = loss;
  j["log_policy"] = log_policy;
  j["format"] = format;
  j["train_end"] = train_end;
  j["test_end"] = test_end;
  j["days"] = days;
  j["reps"] = reps;
  j["refine_rounds"] = refine_rounds;
  j["threads"] = threads;
  j["initial_exposed"] = initial_exposed;
  if (seed)
    j["seed"] = *seed;
  else
    j["seed"] = nullptr;
  j["paper_weights"] = paper_weights;
  if (fixed_r)
    j["fixed_r"] = *fixed_r;
  else
    j["fixed_r"] = nullptr;
  j["pt_grid"] = pt_grid;
  j["eps_grid"] = eps_grid;
  j["p_t"] = p_t;
  j["epsilon"] = epsilon;
  j["d_max"] = d_max;
  return j.dump();
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

RunResult run(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const std::string& dir = cfg.out_dir;
  std::vector<std::string> outputs;

  try {
    const std::set<std::string> stochastic = {"simulate-stochastic", "fit", "predict"};
    if (stochastic.count(cfg.command) && !cfg.seed)
      throw std::invalid_argument(cfg.command + " requires an explicit --seed");

    if (cfg.command == "simulate") {
      auto params = params_for(cfg);
      auto x0 = initial_state(params, cfg.initial_exposed);
      std::vector<Vec> traj;
      if (cfg.mobility_path.empty()) {
        auto tm = build_transition_matrix(params);
        traj = simulate_meanfield(tm, x0, cfg.days);
      } else {
        auto rates = rate_schedule(cfg, params, cfg.days, outputs, dir);
        traj = simulate_meanfield_schedule(params, x0, rates);
      }
      if (cfg.format == "long")
        write_trajectory_long(dir + "/trajectory.csv", traj, params.h);
      else
        write_trajectory_wide(dir + "/trajectory.csv", traj, params.h);
      outputs.push_back("trajectory.csv");

    } else if (cfg.command == "simulate-stochastic") {
      auto params = params_for(cfg);
      VecI x0 = VecI::Zero(params.dim());
      x0[state_index(Phase::E, 1, params.h)] = cfg.initial_exposed;
      auto rates = rate_schedule(cfg, params, cfg.days, outputs, dir);
      int reps = std::max(cfg.reps, 1);
      for (int rep = 0; rep < reps; ++rep) {
        auto traj = simulate_stochastic(x0, params, rates, cfg.days, *cfg.seed,
                                        static_cast<std::uint64_t>(rep));
        std::string name = rep == 0 ? "stochastic_trajectory.csv"
                                    : "stochastic_trajectory_r" + std::to_string(rep) + ".csv";
        if (cfg.format == "long")
          write_trajectory_long(dir + "/" + name, to_real(traj.states), params.h);
        else
          write_trajectory_wide(dir + "/" + name, to_real(traj.states), params.h);
        outputs.push_back(name);
      }

    } else if (cfg.command == "spectral") {
      auto params = params_for(cfg);
      auto tm = build_transition_matrix(params);
      auto spec = spectral_radius(tm);
      json j;
      j["lambda"] = spec.lambda;
      j["converged"] = spec.converged;
      j["iterations"] = spec.iterations;
      write_file(dir + "/spectral.json", j.dump(2) + "\n");
      outputs.push_back("spectral.json");
      std::ostringstream out;
      out << "index,phase,day,value\n";
      for (int i = 0; i < spec.u.size(); ++i) {
        Phase ph = phase_of_index(i, params.h);
        out << i << "," << phase_name(ph) << ","
            << (ph == Phase::H ? 1 : day_of_index(i, params.h)) << ","
            << fmt_double(spec.u[i]) << "\n";
      }
      write_file(dir + "/eigenvector.csv", out.str());
      outputs.push_back("eigenvector.csv");

    } else if (cfg.command == "filter") {
      auto params = params_for(cfg);
      if (cfg.data_path.empty()) throw std::invalid_argument("filter requires --data");
      auto series = load_observations(cfg.data_path);
      std::vector<std::optional<double>> obs;
      obs.reserve(series.size());
      for (const auto& c : series.counts)
        obs.push_back(c ? std::optional<double>(static_cast<double>(*c)) : std::nullopt);
      FilterOptions fo;
      fo.weights = cfg.paper_weights ? NoiseWeights::OpenLoop : NoiseWeights::FilteredClamped;
      fo.fixed_r = cfg.fixed_r;
      auto x0 = initial_state(params, cfg.initial_exposed);
      auto run = filter_series(obs, params, x0, Mat::Zero(params.dim(), params.dim()), fo);
      std::ostringstream out;
      out << "t,coordinate,x_hat,std\n";
      for (const auto& st : run.states) {
        for (int i = 0; i < params.dim(); ++i) {
          Phase ph = phase_of_index(i, params.h);
          std::string coord = std::string(phase_name(ph)) +
                              (ph == Phase::H ? "" : std::to_string(day_of_index(i, params.h)));
          out << st.t << "," << coord << "," << fmt_double(st.x_hat[i]) << ","
              << fmt_double(std::sqrt(std::max(st.P(i, i), 0.0))) << "\n";
        }
      }
      write_file(dir + "/filtered.csv", out.str());
      outputs.push_back("filtered.csv");
      std::ostringstream inn;
      inn << "t,innovation\n";
      for (std::size_t t = 0; t < run.innovations.size(); ++t) {
        inn << (t + 1) << ",";
        if (run.innovations[t]) inn << fmt_double(*run.innovations[t]);
        inn << "\n";
      }
      write_file(dir + "/innovations.csv", inn.str());
      outputs.push_back("innovations.csv");

    } else if (cfg.command == "fit") {
      auto params = params_for(cfg);
      if (cfg.data_path.empty() || cfg.grid_path.empty())
        throw std::invalid_argument("fit requires --data and --grid");
      auto series = load_observations(cfg.data_path);
      auto obs = series.dense();
      int train_end = cfg.train_end.empty()
                          ? static_cast<int>(obs.size()) - 1
                          : day_index_of(cfg.train_end, series.start);
      if (train_end < 1 || train_end >= static_cast<int>(obs.size()))
        throw std::invalid_argument("fit: train_end outside the observation range");
      std::vector<double> train(obs.begin(), obs.begin() + train_end + 1);
      auto grid = GridSpec::from_json(read_file(cfg.grid_path));
      FitOptions fo;
      fo.n_reps = cfg.reps;
      fo.loss = cfg.loss == "l1" ? LossKind::L1 : LossKind::L1Log;
      fo.log_policy = cfg.log_policy == "log1p" ? LogPolicy::Log1p : LogPolicy::ClampToOne;
      fo.refine_rounds = cfg.refine_rounds;
      fo.threads = cfg.threads;
      fo.seed = *cfg.seed;
      auto fit = grid_search_fit(train, params, grid, fo);
      write_file(dir + "/fit.json", fit.to_json() + "\n");
      outputs.push_back("fit.json");
      std::ostringstream out;
      out << "xe0,a1,t2,a2,t3,a3,loss_mean,loss_half_width\n";
      for (const auto& p : fit.evaluated)
        out << fmt_double(p.xe0) << "," << fmt_double(p.schedule.a1) << "," << p.schedule.t2
            << "," << fmt_double(p.schedule.a2) << "," << p.schedule.t3 << ","
            << fmt_double(p.schedule.a3) << "," << fmt_double(p.loss.mean) << ","
            << fmt_double(p.loss.half_width) << "\n";
      write_file(dir + "/grid_losses.csv", out.str());
      outputs.push_back("grid_losses.csv");

    } else if (cfg.command == "predict") {
      auto params = params_for(cfg);
      if (cfg.data_path.empty() || cfg.fit_path.empty())
        throw std::invalid_argument("predict requires --data and --fit");
      auto series = load_observations(cfg.data_path);
      auto obs = series.dense();
      if (cfg.train_end.empty() || cfg.test_end.empty())
        throw std::invalid_argument("predict requires --train-end and --test-end");
      int train_end = day_index_of(cfg.train_end, series.start);
      int test_end = day_index_of(cfg.test_end, series.start);
      auto fit = FitResult::from_json(read_file(cfg.fit_path));
      auto est = prediction_error(fit, params, obs, train_end, test_end, cfg.reps, *cfg.seed);
      json j;
      j["pred_loss"] = {{"mean", est.mean}, {"half_width", est.half_width}};
      j["train_end"] = train_end;
      j["test_end"] = test_end;
      j["n_reps"] = cfg.reps;
      write_file(dir + "/prediction.json", j.dump(2) + "\n");
      outputs.push_back("prediction.json");

    } else if (cfg.command == "tracing-sweep") {
      auto params = params_for(cfg);
      TracingConfig base;
      base.d_max = cfg.d_max;
      std::vector<double> pts = cfg.pt_grid.empty()
                                    ? std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}
                                    : cfg.pt_grid;
      std::vector<double> eps = cfg.eps_grid.empty()
                                    ? std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}
                                    : cfg.eps_grid;
      auto rows = tracing_sweep(params, base, pts, eps,
                                static_cast<double>(cfg.initial_exposed));
      std::ostringstream out;
      out << "p_t,epsilon,rho,expected_total_infected\n";
      for (const auto& r : rows)
        out << fmt_double(r.p_t) << "," << fmt_double(r.epsilon) << "," << fmt_double(r.rho)
            << "," << fmt_double(r.expected_total) << "\n";
      write_file(dir + "/tracing_sweep.csv", out.str());
      outputs.push_back("tracing_sweep.csv");

    } else if (cfg.command == "routing") {
      if (cfg.cohorts_path.empty()) throw std::invalid_argument("routing requires --cohorts");
      auto setup = load_cohort_config(cfg.cohorts_path);
      auto traj = simulate_cohorts(setup.system, cfg.days);
      std::ostringstream out;
      out << "day,cohort,x_H\n";
      const int hslot = state_dim(setup.system.h) - 1;
      for (std::size_t t = 0; t <= static_cast<std::size_t>(cfg.days); ++t)
        for (int c = 0; c < setup.system.size(); ++c)
          out << t << "," << setup.system.cohorts[c].id.str() << ","
              << fmt_double(traj.states[c][t][hslot]) << "\n";
      write_file(dir + "/routing_xh.csv", out.str());
      outputs.push_back("routing_xh.csv");
      std::ostringstream pops;
      pops << "day,cohort,population\n";
      for (std::size_t t = 0; t <= static_cast<std::size_t>(cfg.days); ++t)
        for (int c = 0; c < setup.system.size(); ++c)
          pops << t << "," << setup.system.cohorts[c].id.str() << ","
               << fmt_double(traj.populations[c][t]) << "\n";
      write_file(dir + "/routing_populations.csv", pops.str());
      outputs.push_back("routing_populations.csv");

    } else if (cfg.command == "routing-estimate") {
      if (cfg.cohorts_path.empty() || cfg.flows_path.empty())
        throw std::invalid_argument("routing-estimate requires --cohorts and --flows");
      auto setup = load_cohort_config(cfg.cohorts_path);
      auto flows = load_flows(cfg.flows_path);
      if (flows.empty()) throw std::invalid_argument("routing-estimate: no flow rows");
      // one day at a time: the first date in the file is estimated
      Date day = flows.front().date;
      for (const auto& f : flows)
        if (days_between(day, f.date) < 0) day = f.date;
      MaxEntInstance inst = setup.instance;
      for (const auto& f : flows)
        if (days_between(day, f.date) == 0)
          inst.flows.push_back({f.from_region, f.to_region, f.age, f.count});
      auto res = maxent_routing(inst);
      std::ostringstream out;
      out << "from,to,value\n";
      for (int i = 0; i < res.routing.rows(); ++i)
        for (int j = 0; j < res.routing.cols(); ++j)
          out << inst.ids[i].str() << "," << inst.ids[j].str() << ","
              << fmt_double(res.routing(i, j)) << "\n";
      write_file(dir + "/routing_estimate.csv", out.str());
      outputs.push_back("routing_estimate.csv");
      json j;
      j["objective"] = res.objective;
      j["kkt_residual"] = res.kkt_residual;
      j["converged"] = res.converged;
      j["sweeps"] = res.sweeps;
      j["date"] = format_date(day);
      write_file(dir + "/routing_estimate.json", j.dump(2) + "\n");
      outputs.push_back("routing_estimate.json");

    } else {
      throw std::invalid_argument("unknown command: " + cfg.command);
    }
  } catch (const std::exception& e) {
    json err;
    err["command"] = cfg.command;
    err["error"] = e.what();
    try {
      write_file(dir + "/error.json", err.dump(2) + "\n");
    } catch (...) {
    }
    throw;
  }

  json manifest;
  manifest["command"] = cfg.command;
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a64(cfg.to_json())));
  manifest["config_hash"] = hash;
  if (cfg.seed)
    manifest["seed"] = *cfg.seed;
  else
    manifest["seed"] = nullptr;
  manifest["started_at"] = iso_now();
  manifest["outputs"] = outputs;
  RunResult result;
  result.manifest_path = dir + "/manifest.json";
  write_file(result.manifest_path, manifest.dump(2) + "\n");
  for (const auto& o : outputs) result.outputs.push_back(dir + "/" + o);
  return result;
}

}  // namespace epi
