#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "twr/simulate.hpp"
#include "twr/solver.hpp"
#include "twr/stage1.hpp"
#include "twr/tuning.hpp"

namespace twr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

/// Everything a command needs. Unset paths resolve inside out_dir.
struct RunConfig {
  ScenarioSpec scenario = desk_scenario();
  SolverOptions solver;
  CvSpec cv;
  GcvSpec gcv;
  int passes = 2;

  std::string method = "twr";
  double ridge_lambda = 0.0;
  double rank_tol = kDefaultRankTol;

  std::vector<double> peak_times_s{0.025, 0.058};
  double zero_tol = 0.0;
  bool timing = true;  // false drops wall-clock fields so outputs are byte-stable

  fs::path out_dir = ".";
  fs::path x_path, y_path, geometry_path, b_true_path, b_est_path, tuning_path;

  // compare
  std::vector<std::string> methods{"mne", "twr", "sowr", "towr"};
  int n_runs = 20;
  std::uint64_t base_seed = 0;
  bool tune = true;  // compare: tune each method per run instead of using solver.mu1/mu2

  fs::path resolve(const fs::path& given, const char* default_name) const;
  void validate() const;
};

RunConfig config_from_json(const json& j);
json config_to_json(const RunConfig& c);

/// Per-field command-line overrides; they win over the config file.
struct Overrides {
  std::optional<double> mu1, mu2, snr_db, ridge_lambda;
  std::optional<std::string> method;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::optional<int> runs;
  std::optional<std::vector<std::string>> methods;
  bool no_timing = false;
  bool no_tune = false;
  std::optional<fs::path> x, y, geometry, b_true, b_est, tuning;
};

void apply(RunConfig& config, const Overrides& o);

const std::vector<std::string>& known_methods();

struct Reconstruction {
  Matrix B_est;
  json diagnostics;
};

/// Runs one method on an instance with explicit penalty weights.
Reconstruction reconstruct(const std::string& method, const Matrix& X, const Matrix& Y, const RunConfig& config,
                           double mu1, double mu2);

/// Tunes the weights a method uses; returns (mu1, mu2) and the report.
TuneResult tune_method(const std::string& method, const ProblemInstance& instance, const RunConfig& config);

json cmd_simulate(const RunConfig& config);
json cmd_reconstruct(const RunConfig& config);
json cmd_tune(const RunConfig& config);
json cmd_evaluate(const RunConfig& config);
json cmd_compare(const RunConfig& config);

/// CSV rendering of the compare table (one row per method).
std::string compare_csv(const json& table);

/// Structured error document and exit code for an exception escaping a command.
json error_json(const std::exception& e);
int exit_code_for(const std::exception& e);

/// Full command-line entry point; JSON results go to `out`, errors to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace twr::cli
