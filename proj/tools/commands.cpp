#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "twr/metrics.hpp"
#include "twr/penalty.hpp"

namespace twr::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string trace_name(GcvTrace t) {
  switch (t) {
    case GcvTrace::Normalized: return "normalized";
    case GcvTrace::HatMatrix: return "hat_matrix";
    case GcvTrace::PerEntry: return "per_entry";
  }
  return "normalized";
}

GcvTrace trace_from(const std::string& name) {
  if (name == "normalized") return GcvTrace::Normalized;
  if (name == "hat_matrix") return GcvTrace::HatMatrix;
  if (name == "per_entry") return GcvTrace::PerEntry;
  throw Error(ErrorCode::InvalidArgument, "unknown gcv trace '" + name + "'");
}

bool uses_ridge_raw(const std::string& method) { return method == "mne" || method.starts_with("mne+"); }

Regularization mode_of(const std::string& method) {
  if (method == "twr" || method == "mne+twr") return Regularization::TwoWay;
  if (method == "sowr" || method == "mne+sowr") return Regularization::SpatialOnly;
  if (method == "towr") return Regularization::TemporalOnly;
  throw Error(ErrorCode::InvalidArgument, "method '" + method + "' has no stage-2 decomposition");
}

void require_method(const std::string& method) {
  const auto& all = known_methods();
  if (std::find(all.begin(), all.end(), method) == all.end()) {
    throw Error(ErrorCode::InvalidArgument, "unknown method '" + method + "'");
  }
}

json read_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

std::vector<Eigen::Index> peak_indices(const RunConfig& c, Eigen::Index s) {
  ScenarioSpec timing = c.scenario;
  timing.n_timepoints = static_cast<std::size_t>(s);
  std::vector<Eigen::Index> out;
  for (double t : c.peak_times_s) out.push_back(static_cast<Eigen::Index>(timing.nearest_sample(t)));
  return out;
}

DipoleGeometry geometry_or_default(const RunConfig& c, Eigen::Index p) {
  const fs::path path = c.resolve(c.geometry_path, "geometry.txt");
  if (!c.geometry_path.empty() || fs::exists(path)) return read_geometry(path);
  if (p % 3 != 0) throw Error(ErrorCode::DimensionMismatch, "source count is not a multiple of 3");
  return sphere_geometry(static_cast<std::size_t>(p / 3));
}

json state_json(const DecompositionState& st) {
  const double worst =
      st.orthonormality_trace.empty() ? 0.0 : *std::max_element(st.orthonormality_trace.begin(), st.orthonormality_trace.end());
  return {{"iterations_run", st.iterations_run},
          {"converged", st.converged},
          {"objective_trace", st.objective_trace},
          {"sparsity_trace", st.sparsity_trace},
          {"relative_change_trace", st.relative_change_trace},
          {"max_orthonormality_error", worst}};
}

struct Summary {
  double mean = 0.0;
  double se = 0.0;
};

Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
  }
  return s;
}

json summary_json(const std::vector<double>& v) {
  const Summary s = summarize(v);
  return {{"mean", s.mean}, {"se", s.se}};
}

}  // namespace

// ---------------------------------------------------------------- config

fs::path RunConfig::resolve(const fs::path& given, const char* default_name) const {
  return given.empty() ? out_dir / default_name : given;
}

void RunConfig::validate() const {
  require_method(method);
  for (const auto& m : methods) require_method(m);
  if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
    throw Error(ErrorCode::InvalidArgument, "ridge_lambda must be finite and >= 0");
  }
  if (!(rank_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "rank_tol must be > 0");
  if (passes < 1) throw Error(ErrorCode::InvalidArgument, "passes must be >= 1");
  if (n_runs < 1) throw Error(ErrorCode::InvalidArgument, "n_runs must be >= 1");
  if (!(zero_tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "zero_tol must be >= 0");
  gcv.validate();
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config must be a JSON object");
  RunConfig c;
  try {
    if (j.contains("scenario")) c.scenario = j.at("scenario").get<ScenarioSpec>();
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      c.solver.mu1 = s.value("mu1", c.solver.mu1);
      c.solver.mu2 = s.value("mu2", c.solver.mu2);
      c.solver.q = s.value("q", c.solver.q);
      c.solver.max_iter = s.value("max_iter", c.solver.max_iter);
      c.solver.rel_tol = s.value("rel_tol", c.solver.rel_tol);
    }
    if (j.contains("cv")) {
      const auto& s = j.at("cv");
      c.cv.K = s.value("K", c.cv.K);
      c.cv.mu1_grid = s.value("mu1_grid", c.cv.mu1_grid);
      c.cv.fold_seed = s.value("fold_seed", c.cv.fold_seed);
    }
    if (j.contains("gcv")) {
      const auto& s = j.at("gcv");
      c.gcv.mu2_lo = s.value("mu2_lo", c.gcv.mu2_lo);
      c.gcv.mu2_hi = s.value("mu2_hi", c.gcv.mu2_hi);
      c.gcv.tol = s.value("tol", c.gcv.tol);
      c.gcv.max_evals = s.value("max_evals", c.gcv.max_evals);
      c.gcv.scan_points = s.value("scan_points", c.gcv.scan_points);
      if (s.contains("trace")) c.gcv.trace = trace_from(s.at("trace").get<std::string>());
    }
    c.passes = j.value("passes", c.passes);
    c.method = j.value("method", c.method);
    c.ridge_lambda = j.value("ridge_lambda", c.ridge_lambda);
    c.rank_tol = j.value("rank_tol", c.rank_tol);
    c.peak_times_s = j.value("peak_times_s", c.peak_times_s);
    c.zero_tol = j.value("zero_tol", c.zero_tol);
    c.timing = j.value("timing", c.timing);
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      auto path = [&](const char* key, fs::path& dst) {
        if (p.contains(key)) dst = p.at(key).get<std::string>();
      };
      path("out", c.out_dir);
      path("X", c.x_path);
      path("Y", c.y_path);
      path("geometry", c.geometry_path);
      path("B_true", c.b_true_path);
      path("B_est", c.b_est_path);
      path("tuning", c.tuning_path);
    }
    if (j.contains("compare")) {
      const auto& s = j.at("compare");
      c.methods = s.value("methods", c.methods);
      c.n_runs = s.value("n_runs", c.n_runs);
      c.base_seed = s.value("base_seed", c.base_seed);
      c.tune = s.value("tune", c.tune);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  return c;
}

json config_to_json(const RunConfig& c) {
  return {{"scenario", c.scenario},
          {"solver",
           {{"mu1", c.solver.mu1},
            {"mu2", c.solver.mu2},
            {"q", c.solver.q},
            {"max_iter", c.solver.max_iter},
            {"rel_tol", c.solver.rel_tol}}},
          {"cv", {{"K", c.cv.K}, {"mu1_grid", c.cv.mu1_grid}, {"fold_seed", c.cv.fold_seed}}},
          {"gcv",
           {{"mu2_lo", c.gcv.mu2_lo},
            {"mu2_hi", c.gcv.mu2_hi},
            {"tol", c.gcv.tol},
            {"max_evals", c.gcv.max_evals},
            {"scan_points", c.gcv.scan_points},
            {"trace", trace_name(c.gcv.trace)}}},
          {"passes", c.passes},
          {"method", c.method},
          {"ridge_lambda", c.ridge_lambda},
          {"rank_tol", c.rank_tol},
          {"peak_times_s", c.peak_times_s},
          {"zero_tol", c.zero_tol},
          {"timing", c.timing},
          {"paths",
           {{"out", c.out_dir.string()},
            {"X", c.x_path.string()},
            {"Y", c.y_path.string()},
            {"geometry", c.geometry_path.string()},
            {"B_true", c.b_true_path.string()},
            {"B_est", c.b_est_path.string()},
            {"tuning", c.tuning_path.string()}}},
          {"compare", {{"methods", c.methods}, {"n_runs", c.n_runs}, {"base_seed", c.base_seed}, {"tune", c.tune}}}};
}

void apply(RunConfig& c, const Overrides& o) {
  if (o.mu1) c.solver.mu1 = *o.mu1;
  if (o.mu2) c.solver.mu2 = *o.mu2;
  if (o.snr_db) c.scenario.snr_db = *o.snr_db;
  if (o.ridge_lambda) c.ridge_lambda = *o.ridge_lambda;
  if (o.method) c.method = *o.method;
  if (o.seed) {
    c.scenario.noise_seed = *o.seed;
    c.base_seed = *o.seed;
  }
  if (o.out) c.out_dir = *o.out;
  if (o.runs) c.n_runs = *o.runs;
  if (o.methods) c.methods = *o.methods;
  if (o.no_timing) c.timing = false;
  if (o.no_tune) c.tune = false;
  if (o.x) c.x_path = *o.x;
  if (o.y) c.y_path = *o.y;
  if (o.geometry) c.geometry_path = *o.geometry;
  if (o.b_true) c.b_true_path = *o.b_true;
  if (o.b_est) c.b_est_path = *o.b_est;
  if (o.tuning) c.tuning_path = *o.tuning;
}

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> all{"mne", "twr", "towr", "sowr", "mne+sowr", "mne+twr"};
  return all;
}

// ---------------------------------------------------------------- methods

Reconstruction reconstruct(const std::string& method, const Matrix& X, const Matrix& Y, const RunConfig& config,
                           double mu1, double mu2) {
  require_method(method);
  const auto t0 = Clock::now();
  const double ridge = uses_ridge_raw(method) ? config.ridge_lambda : 0.0;
  const RawEstimate raw =
      ridge > 0.0 ? raw_estimate_ridge(X, Y, ridge, config.rank_tol) : raw_estimate(X, Y, config.rank_tol);

  Reconstruction out;
  json d = {{"method", method}, {"raw_effective_rank", raw.effective_rank}, {"ridge_lambda", ridge}};
  if (method == "mne") {
    out.B_est = raw.B_hat;
    d["iterations_run"] = 0;
    d["converged"] = true;
  } else {
    SolverOptions opts = config.solver;
    opts.mu1 = mu1;
    opts.mu2 = mu2;
    const Regularization mode = mode_of(method);
    DecompositionState st;
    if (mode == Regularization::SpatialOnly) {
      st = sowr_solve(raw.B_hat, opts);
    } else {
      const PenaltyOperator pen = second_diff_penalty(raw.B_hat.cols());
      st = mode == Regularization::TwoWay ? twr_solve(raw.B_hat, pen, opts) : towr_solve(raw.B_hat, pen, opts);
    }
    out.B_est = st.reconstruction();
    d["mu1"] = mode == Regularization::TemporalOnly ? 0.0 : mu1;
    d["mu2"] = mode == Regularization::SpatialOnly ? 0.0 : mu2;
    d["q"] = opts.rank_for(raw.B_hat.cols());
    d.update(state_json(st));
  }
  if (config.timing) d["wall_time_s"] = seconds_since(t0);
  out.diagnostics = std::move(d);
  return out;
}

TuneResult tune_method(const std::string& method, const ProblemInstance& instance, const RunConfig& config) {
  require_method(method);
  return auto_tune(instance, config.cv, config.gcv, config.solver, config.passes, mode_of(method));
}

// ---------------------------------------------------------------- commands

json cmd_simulate(const RunConfig& config) {
  const ScenarioSpec& spec = config.scenario;
  spec.validate();
  ensure_dir(config.out_dir);

  const bool given_x = !config.x_path.empty();
  const Matrix X = given_x ? read_matrix(config.x_path)
                           : random_forward_operator(spec.n_sensors, spec.n_sources(), spec.condition_number,
                                                     spec.forward_seed);
  require_shape(X, static_cast<Eigen::Index>(spec.n_sensors), static_cast<Eigen::Index>(spec.n_sources()), "X");
  const DipoleGeometry geometry =
      config.geometry_path.empty() ? sphere_geometry(spec.n_dipoles) : read_geometry(config.geometry_path);
  if (geometry.n_dipoles() != spec.n_dipoles) {
    throw Error(ErrorCode::DimensionMismatch, "geometry has " + std::to_string(geometry.n_dipoles()) +
                                                  " dipoles, scenario has " + std::to_string(spec.n_dipoles));
  }

  const Matrix B = build_truth(spec, X);
  const SensorData data = synthesize(X, B, spec.snr_db, spec.noise_seed);

  json files = json::object();
  auto put = [&](const char* key, const char* name, auto&& write) {
    const fs::path path = config.out_dir / name;
    write(path);
    files[key] = path.string();
  };
  if (!given_x) put("X", "X.txt", [&](const fs::path& p) { write_matrix(X, p); });
  put("B_true", "B_true.txt", [&](const fs::path& p) { write_matrix(B, p); });
  put("Y", "Y.txt", [&](const fs::path& p) { write_matrix(data.Y, p); });
  put("geometry", "geometry.txt", [&](const fs::path& p) { write_geometry(geometry, p); });

  json echo = {{"scenario", spec}, {"achieved_snr_db", std::isinf(data.achieved_snr_db) ? json(nullptr) : json(data.achieved_snr_db)}};
  put("scenario", "scenario.json", [&](const fs::path& p) { write_json_file(p, echo); });
  echo["files"] = files;
  return echo;
}

json cmd_reconstruct(const RunConfig& config) {
  config.validate();
  const Matrix X = read_matrix(config.resolve(config.x_path, "X.txt"));
  const Matrix Y = read_matrix(config.resolve(config.y_path, "Y.txt"));
  if (X.rows() != Y.rows()) throw Error(ErrorCode::DimensionMismatch, "X and Y must have the same number of rows");

  double mu1 = config.solver.mu1, mu2 = config.solver.mu2;
  if (!config.tuning_path.empty()) {
    const json t = read_json_file(config.tuning_path);
    try {
      mu1 = t.at("mu1_star").get<double>();
      mu2 = t.at("mu2_star").get<double>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, config.tuning_path.string() + ": " + e.what());
    }
  }
  ensure_dir(config.out_dir);
  Reconstruction r = reconstruct(config.method, X, Y, config, mu1, mu2);
  const fs::path est = config.resolve(config.b_est_path, "B_est.txt");
  write_matrix(r.B_est, est);
  write_json_file(config.out_dir / "diagnostics.json", r.diagnostics);
  r.diagnostics["files"] = {{"B_est", est.string()}, {"diagnostics", (config.out_dir / "diagnostics.json").string()}};
  return r.diagnostics;
}

json cmd_tune(const RunConfig& config) {
  config.validate();
  Matrix X = read_matrix(config.resolve(config.x_path, "X.txt"));
  Matrix Y = read_matrix(config.resolve(config.y_path, "Y.txt"));
  DipoleGeometry geometry = geometry_or_default(config, X.cols());
  const ProblemInstance instance(std::move(X), std::move(Y), std::move(geometry), config.scenario.sample_rate_hz);
  const TuneResult t = tune_method(config.method, instance, config);
  json report = t.report;
  report["method"] = config.method;
  ensure_dir(config.out_dir);
  write_json_file(config.out_dir / "tuning.json", report);
  return report;
}

json cmd_evaluate(const RunConfig& config) {
  const Matrix B_true = read_matrix(config.resolve(config.b_true_path, "B_true.txt"));
  const Matrix B_est = read_matrix(config.resolve(config.b_est_path, "B_est.txt"));
  const DipoleGeometry geometry = geometry_or_default(config, B_true.rows());
  const auto peaks = peak_indices(config, B_true.cols());

  double runtime = 0.0;
  const fs::path diag = config.out_dir / "diagnostics.json";
  if (config.timing && fs::exists(diag)) runtime = read_json_file(diag).value("wall_time_s", 0.0);

  const EvaluationReport report = evaluate(B_true, B_est, geometry, peaks, config.zero_tol, runtime);
  json j = report;
  if (!config.timing) j.erase("runtime_s");
  j["peak_indices"] = peaks;

  ensure_dir(config.out_dir);
  write_matrix(energy_table(B_true, geometry), config.out_dir / "energy_true.txt");
  write_matrix(energy_table(B_est, geometry), config.out_dir / "energy_est.txt");
  write_json_file(config.out_dir / "evaluation.json", j);
  j["files"] = {{"evaluation", (config.out_dir / "evaluation.json").string()},
                {"energy_true", (config.out_dir / "energy_true.txt").string()},
                {"energy_est", (config.out_dir / "energy_est.txt").string()}};
  return j;
}

json cmd_compare(const RunConfig& config) {
  config.validate();
  ScenarioSpec spec = config.scenario;
  spec.validate();
  const Matrix X = config.x_path.empty() ? random_forward_operator(spec.n_sensors, spec.n_sources(),
                                                                   spec.condition_number, spec.forward_seed)
                                         : read_matrix(config.x_path);
  require_shape(X, static_cast<Eigen::Index>(spec.n_sensors), static_cast<Eigen::Index>(spec.n_sources()), "X");
  const DipoleGeometry geometry =
      config.geometry_path.empty() ? sphere_geometry(spec.n_dipoles) : read_geometry(config.geometry_path);
  const Matrix B = build_truth(spec, X);
  const auto peaks = peak_indices(config, B.cols());

  struct Column {
    std::vector<double> mse, sparsity, wall;
    std::vector<std::vector<double>> d;
    int failed = 0;
  };
  std::vector<Column> cols(config.methods.size());
  for (auto& c : cols) c.d.resize(peaks.size());

  json runs = json::array();
  for (int r = 0; r < config.n_runs; ++r) {
    spec.noise_seed = config.base_seed + static_cast<std::uint64_t>(r);
    const SensorData data = synthesize(X, B, spec.snr_db, spec.noise_seed);
    const ProblemInstance instance(X, data.Y, geometry, spec.sample_rate_hz);
    json cells = json::object();
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
      const std::string& method = config.methods[m];
      try {
        const auto t0 = Clock::now();
        double mu1 = config.solver.mu1, mu2 = config.solver.mu2;
        if (config.tune && method != "mne") {
          const TuneResult t = tune_method(method, instance, config);
          mu1 = t.mu1_star;
          mu2 = t.mu2_star;
        }
        const Reconstruction rec = reconstruct(method, X, data.Y, config, mu1, mu2);
        const double wall = seconds_since(t0);
        const EvaluationReport ev = evaluate(B, rec.B_est, geometry, peaks, config.zero_tol, wall);

        json cell = {{"mse", ev.mse}, {"sparsity", ev.sparsity}};
        json d = json::object();
        for (std::size_t k = 0; k < peaks.size(); ++k) {
          const double v = ev.peak_distances.at(static_cast<std::size_t>(peaks[k]));
          d["d_" + std::to_string(peaks[k])] = v;
          cols[m].d[k].push_back(v);
        }
        cell["d"] = d;
        for (const char* key : {"mu1", "mu2", "iterations_run", "converged"}) {
          if (rec.diagnostics.contains(key)) cell[key] = rec.diagnostics.at(key);
        }
        if (config.timing) cell["wall_time_s"] = wall;
        cols[m].mse.push_back(ev.mse);
        cols[m].sparsity.push_back(ev.sparsity);
        cols[m].wall.push_back(wall);
        cells[method] = cell;
      } catch (const std::exception& e) {
        ++cols[m].failed;
        cells[method] = {{"failed", true}, {"error", error_json(e)["error"]}};
      }
    }
    runs.push_back({{"run", r}, {"noise_seed", spec.noise_seed}, {"cells", cells}});
  }

  json rows = json::array();
  for (std::size_t m = 0; m < config.methods.size(); ++m) {
    const Column& c = cols[m];
    json row = {{"method", config.methods[m]},
                {"n_ok", c.mse.size()},
                {"n_failed", c.failed},
                {"mse", summary_json(c.mse)},
                {"sparsity", summary_json(c.sparsity)}};
    json d = json::object();
    for (std::size_t k = 0; k < peaks.size(); ++k) d["d_" + std::to_string(peaks[k])] = summary_json(c.d[k]);
    row["d"] = d;
    if (config.timing) row["wall_time_s"] = summary_json(c.wall);
    rows.push_back(row);
  }

  json table = {{"n_runs", config.n_runs},
                {"base_seed", config.base_seed},
                {"tuned", config.tune},
                {"peak_indices", peaks},
                {"methods", rows},
                {"runs", runs}};
  ensure_dir(config.out_dir);
  write_json_file(config.out_dir / "compare.json", table);
  write_text_file(config.out_dir / "compare.csv", compare_csv(table));
  return table;
}

std::string compare_csv(const json& table) {
  std::ostringstream os;
  const auto& peaks = table.at("peak_indices");
  const bool timed = !table.at("methods").empty() && table.at("methods")[0].contains("wall_time_s");
  os << "method,n_ok,n_failed,mse_mean,mse_se";
  for (const auto& k : peaks) os << ",d_" << k.get<long>() << "_mean,d_" << k.get<long>() << "_se";
  os << ",sparsity_mean,sparsity_se";
  if (timed) os << ",wall_time_mean,wall_time_se";
  os << "\n";
  auto pair = [&](const json& s) {
    os << "," << format_double(s.at("mean").get<double>()) << "," << format_double(s.at("se").get<double>());
  };
  for (const auto& row : table.at("methods")) {
    os << row.at("method").get<std::string>() << "," << row.at("n_ok").get<long>() << ","
       << row.at("n_failed").get<long>();
    pair(row.at("mse"));
    for (const auto& k : peaks) pair(row.at("d").at("d_" + std::to_string(k.get<long>())));
    pair(row.at("sparsity"));
    if (timed) pair(row.at("wall_time_s"));
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------- errors

json error_json(const std::exception& e) {
  if (const auto* te = dynamic_cast<const Error*>(&e)) {
    const char* category = te->category() == ErrorCategory::Io       ? "io"
                           : te->category() == ErrorCategory::Config ? "config"
                                                                     : "numeric";
    return {{"error", {{"code", std::string(to_string(te->code()))}, {"category", category}, {"message", e.what()}}}};
  }
  if (dynamic_cast<const json::exception*>(&e) != nullptr || dynamic_cast<const CLI::Error*>(&e) != nullptr) {
    return {{"error", {{"code", "InvalidArgument"}, {"category", "config"}, {"message", e.what()}}}};
  }
  if (dynamic_cast<const fs::filesystem_error*>(&e) != nullptr) {
    return {{"error", {{"code", "IoFailure"}, {"category", "io"}, {"message", e.what()}}}};
  }
  return {{"error", {{"code", "Internal"}, {"category", "numeric"}, {"message", e.what()}}}};
}

int exit_code_for(const std::exception& e) {
  const std::string category = error_json(e)["error"]["category"];
  if (category == "config") return 2;
  if (category == "io") return 4;
  return 3;
}

// ---------------------------------------------------------------- entry point

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-way regularized reconstruction of spatio-temporal sources"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides o;
  std::string method, x, y, geometry, b_true, b_est, tuning, out_dir;
  double mu1 = 0, mu2 = 0, snr = 0, ridge = 0;
  std::uint64_t seed = 0;
  int runs = 0;
  std::vector<std::string> methods;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--no-timing", o.no_timing, "omit wall-clock fields");
  };
  auto data_paths = [&](CLI::App* sub) {
    sub->add_option("--x", x, "forward operator matrix file");
    sub->add_option("--y", y, "sensor data matrix file");
    sub->add_option("--geometry", geometry, "dipole geometry file");
  };

  auto* sim = app.add_subcommand("simulate", "generate X, B_true and Y for a scenario");
  common(sim);
  sim->add_option("--snr-db", snr, "signal-to-noise ratio in dB");
  sim->add_option("--seed", seed, "noise seed");
  sim->add_option("--x", x, "use this forward operator instead of a random one");
  sim->add_option("--geometry", geometry, "dipole geometry file");

  auto* rec = app.add_subcommand("reconstruct", "estimate sources from X and Y");
  common(rec);
  data_paths(rec);
  rec->add_option("--method", method, "mne, twr, towr, sowr, mne+sowr or mne+twr");
  rec->add_option("--mu1", mu1, "sparsity weight");
  rec->add_option("--mu2", mu2, "roughness weight");
  rec->add_option("--ridge-lambda", ridge, "ridge parameter of the raw estimate for mne variants");
  rec->add_option("--tuning", tuning, "take mu1/mu2 from a tuning report");
  rec->add_option("--b-est", b_est, "output path of the estimate");

  auto* tun = app.add_subcommand("tune", "choose mu1 by K-fold CV and mu2 by GCV");
  common(tun);
  data_paths(tun);
  tun->add_option("--method", method, "twr, towr, sowr, mne+sowr or mne+twr");

  auto* evl = app.add_subcommand("evaluate", "score an estimate against the truth");
  common(evl);
  evl->add_option("--b-true", b_true, "true source matrix file");
  evl->add_option("--b-est", b_est, "estimated source matrix file");
  evl->add_option("--geometry", geometry, "dipole geometry file");

  auto* cmp = app.add_subcommand("compare", "repeat simulate/tune/reconstruct/evaluate over noise seeds");
  common(cmp);
  cmp->add_option("--methods", methods, "methods to compare")->delimiter(',');
  cmp->add_option("--runs", runs, "number of noise seeds");
  cmp->add_option("--seed", seed, "first noise seed");
  cmp->add_option("--snr-db", snr, "signal-to-noise ratio in dB");
  cmp->add_option("--mu1", mu1, "sparsity weight when not tuning");
  cmp->add_option("--mu2", mu2, "roughness weight when not tuning");
  cmp->add_flag("--no-tune", o.no_tune, "use --mu1/--mu2 instead of tuning every run");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      out << app.help();
      return 0;
    } catch (const CLI::ParseError& e) {
      throw Error(ErrorCode::InvalidArgument, e.what());
    }
    CLI::App* sub = app.get_subcommands().front();
    auto given = [&](const char* name) { return sub->get_option_no_throw(name) != nullptr && sub->count(name) > 0; };

    if (given("--mu1")) o.mu1 = mu1;
    if (given("--mu2")) o.mu2 = mu2;
    if (given("--snr-db")) o.snr_db = snr;
    if (given("--ridge-lambda")) o.ridge_lambda = ridge;
    if (given("--method")) o.method = method;
    if (given("--seed")) o.seed = seed;
    if (given("--out")) o.out = out_dir;
    if (given("--runs")) o.runs = runs;
    if (given("--methods")) o.methods = methods;
    if (given("--x")) o.x = x;
    if (given("--y")) o.y = y;
    if (given("--geometry")) o.geometry = geometry;
    if (given("--b-true")) o.b_true = b_true;
    if (given("--b-est")) o.b_est = b_est;
    if (given("--tuning")) o.tuning = tuning;

    RunConfig config = config_path.empty() ? RunConfig{} : config_from_json(read_json_file(config_path));
    apply(config, o);

    json result;
    const std::string name = sub->get_name();
    if (name == "simulate") result = cmd_simulate(config);
    else if (name == "reconstruct") result = cmd_reconstruct(config);
    else if (name == "tune") result = cmd_tune(config);
    else if (name == "evaluate") result = cmd_evaluate(config);
    else result = cmd_compare(config);
    out << result.dump(2) << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << error_json(e).dump() << "\n";
    return exit_code_for(e);
  }
}

}  // namespace twr::cli
