#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace epi {

/// One CLI invocation, normalized. Built from flags (by the CLI) or a JSON
/// object (through the C API); all engines below receive day indices only.
struct RunConfig {
  std::string command;

  std::string params_path;
  std::string data_path;
  std::string mobility_path;
  std::string flows_path;
  std::string visits_path;
  std::string cohorts_path;
  std::string grid_path;
  std::string fit_path;
  std::string out_dir = ".";

  std::string loss = "l1log";      // l1 | l1log
  std::string log_policy = "clamp1";  // clamp1 | log1p
  std::string format = "wide";     // wide | long trajectory layout
  std::string train_end;           // date or day index
  std::string test_end;

  int days = 60;
  int reps = 200;
  int refine_rounds = 2;
  int threads = 0;
  long long initial_exposed = 200;
  std::optional<std::uint64_t> seed;

  bool paper_weights = false;      // open-loop Q(t) weights in the filter
  std::optional<double> fixed_r;

  std::vector<double> pt_grid;     // tracing sweep axes; defaults 0,.25,.5,.75,1
  std::vector<double> eps_grid;
  double p_t = 0.0;
  double epsilon = 0.0;
  int d_max = 0;

  static RunConfig from_json(const std::string& text);
  std::string to_json() const;  // normalized form, also the hash input
};

struct RunResult {
  std::string manifest_path;
  std::vector<std::string> outputs;
};

/// Dispatches the command, writes its output files plus manifest.json under
/// out_dir. Stochastic commands require an explicit seed. On error an
/// error.json is left in out_dir and the exception propagates.
RunResult run(const RunConfig& config);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace epi
