#include "hsc/commands.hpp"

#include "hsc/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace hsc {

using nlohmann::json;

SolvedModel solve_model(const HomogeneousModel& model, const TimeGrid& grid, SolveMode mode,
                        const SolverOptions& options) {
  SolvedModel s{solve(model, Branch::plus, grid, mode, options),
                solve(model, Branch::minus, grid, mode, options),
                solve_upper_bound(model, Branch::plus, grid, mode),
                solve_upper_bound(model, Branch::minus, grid, mode),
                {},
                {},
                check_regime(model, default_regime_samples(model))};
  s.invariants_plus = check_invariants(model, s.plus, s.upper_plus);
  s.invariants_minus = check_invariants(model, s.minus, s.upper_minus);
  return s;
}

VerificationRow verify_point(double x0, double value, const CostEstimate& cost, double allowance) {
  VerificationRow r;
  r.x0 = x0;
  r.value = value;
  r.J_mean = cost.mean;
  r.J_stderr = cost.std_error;
  r.allowance = allowance;
  const double gap = cost.mean - value;
  if (cost.std_error > 0.0) r.z_score = gap / cost.std_error;
  else r.z_score = gap == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), gap);
  const double slack = 1e-10 * (1.0 + std::abs(value));
  r.passed = std::abs(gap) <= 3.0 * cost.std_error + allowance + slack;
  return r;
}

CompetitorRow compare_point(const std::string& label, double x0, double value, const CostEstimate& cost) {
  CompetitorRow r;
  r.label = label;
  r.x0 = x0;
  r.value = value;
  r.J_mean = cost.mean;
  r.J_stderr = cost.std_error;
  r.gap = cost.mean - value;
  r.suboptimal = cost.mean + 3.0 * cost.std_error >= value - 1e-10 * (1.0 + std::abs(value));
  return r;
}

namespace {

void ensure_writable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (ec || !out) throw ConfigError("output directory is not writable: " + dir.string());
  }
  std::filesystem::remove(probe, ec);
}

std::string hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

json regime_json(const RegimeDiagnostics& d) {
  return {{"passed", d.passed},
          {"points_checked", d.points_checked},
          {"violation_count", d.violation_count},
          {"worst_excess", d.worst_excess},
          {"messages", d.messages}};
}

json invariants_json(const BsdeSolution& sol, const SolutionInvariants& inv) {
  return {{"P0", sol.initial_value()},
          {"min_P", inv.min_P},
          {"terminal_exact", inv.terminal_exact},
          {"nonnegative", inv.nonnegative},
          {"uniformly_positive", inv.uniformly_positive},
          {"positivity_c", inv.positivity_c},
          {"below_upper_bound", inv.below_upper_bound},
          {"max_upper_excess", inv.max_upper_excess},
          {"max_fixed_point_iterations", sol.max_fixed_point_iterations},
          {"messages", inv.messages}};
}

json model_json(const ExperimentConfig& cfg) {
  const auto& lm = *cfg.model;
  const auto& m = lm.model;
  return {{"name", m.name()},
          {"hash", hex(lm.hash)},
          {"p", m.p()},
          {"T", m.horizon()},
          {"m", m.m()},
          {"n", m.n()},
          {"cone", m.cone().kind()},
          {"regime", to_string(m.regime())}};
}

std::string str(double x) { return format_double(x); }

/// Solve both branches, write the solution tables and report. Returns the
/// exit code of the solve stage.
int solve_stage(const ExperimentConfig& cfg, std::ostream& log, std::optional<SolvedModel>& out) {
  const HomogeneousModel& model = cfg.model->model;
  ensure_writable(cfg.outputs.directory);
  const TimeGrid grid(model.horizon(), cfg.grid.N);
  out = solve_model(model, grid, cfg.grid.mode, cfg.solver);
  const SolvedModel& s = *out;

  if (cfg.outputs.csv) {
    for (const auto* sol : {&s.plus, &s.minus}) {
      std::ostringstream csv;
      write_solution_csv(csv, *sol);
      write_file(cfg.outputs.directory / ("solution_" + std::string(to_string(sol->branch)) + ".csv"), csv.str());
    }
  }
  if (cfg.outputs.json) {
    const json meta = {{"model", model_json(cfg)},
                       {"grid", {{"N", grid.steps()}, {"T", grid.horizon()}, {"mode", to_string(cfg.grid.mode)}}},
                       {"regime_diagnostics", regime_json(s.regime)},
                       {"plus", invariants_json(s.plus, s.invariants_plus)},
                       {"minus", invariants_json(s.minus, s.invariants_minus)}};
    write_file(cfg.outputs.directory / "solution.json", meta.dump(2) + "\n");
  }

  log << "model " << model.name() << " (case " << to_string(model.regime()) << ", cone " << model.cone().kind()
      << "), " << to_string(cfg.grid.mode) << " N=" << grid.steps() << "\n";
  log << "  P_plus(0)  = " << str(s.plus.initial_value()) << "   min P = " << str(s.invariants_plus.min_P) << "\n";
  log << "  P_minus(0) = " << str(s.minus.initial_value()) << "   min P = " << str(s.invariants_minus.min_P) << "\n";
  if (model.regime() == Regime::case_iii)
    log << "  positivity constant c: plus " << str(s.invariants_plus.positivity_c) << ", minus "
        << str(s.invariants_minus.positivity_c) << "\n";
  for (const auto& msg : s.regime.messages) log << "  regime: " << msg << "\n";
  for (const auto& msg : s.invariants_plus.messages) log << "  plus: " << msg << "\n";
  for (const auto& msg : s.invariants_minus.messages) log << "  minus: " << msg << "\n";
  if (!s.ok()) {
    log << "invariant check FAILED\n";
    return exit_code::invariant_violation;
  }
  return exit_code::ok;
}

SimulationOptions simulation_options(const ExperimentConfig& cfg, bool keep) {
  SimulationOptions o;
  o.paths = cfg.simulation.paths;
  o.seed = cfg.simulation.seed;
  o.antithetic = cfg.simulation.antithetic;
  o.keep_paths = keep ? cfg.simulation.keep_paths : 0;
  return o;
}

std::vector<CompetitorRow> run_competitors(const ExperimentConfig& cfg, const SolvedModel& s,
                                           const FeedbackControl& optimum) {
  const HomogeneousModel& model = cfg.model->model;
  std::vector<CompetitorRow> rows;
  for (const auto& spec : cfg.competitors) {
    const FeedbackControl fb = make_competitor(model, optimum, spec);
    for (double x0 : cfg.simulation.x0) {
      const auto cost = evaluate_competitor(fb, model, x0, simulation_options(cfg, false));
      rows.push_back(compare_point(spec.label, x0, value_function(s.plus, s.minus, x0), cost));
    }
  }
  return rows;
}

// User labels may contain separators or quotes.
std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string quoted = "\"";
  for (char c : text) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
  return quoted + "\"";
}

void write_competitor_csv(const std::filesystem::path& path, const std::vector<CompetitorRow>& rows) {
  std::ostringstream csv;
  csv << "competitor,x0,value,J_mean,J_stderr,gap,suboptimal\n";
  for (const auto& r : rows)
    csv << csv_field(r.label) << ',' << str(r.x0) << ',' << str(r.value) << ',' << str(r.J_mean) << ',' << str(r.J_stderr)
        << ',' << str(r.gap) << ',' << (r.suboptimal ? "true" : "false") << '\n';
  write_file(path, csv.str());
}

json competitor_json(const std::vector<CompetitorRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"competitor", r.label},
                   {"x0", r.x0},
                   {"value", r.value},
                   {"J_mean", r.J_mean},
                   {"J_stderr", r.J_stderr},
                   {"gap", r.gap},
                   {"suboptimal", r.suboptimal}});
  return out;
}

void log_competitors(std::ostream& log, const std::vector<CompetitorRow>& rows) {
  for (const auto& r : rows)
    log << "  " << std::left << std::setw(24) << r.label << " x0=" << std::setw(6) << str(r.x0)
        << " J=" << str(r.J_mean) << " +- " << str(r.J_stderr) << "  gap=" << str(r.gap)
        << (r.suboptimal ? "" : "  BEATS THE VALUE") << "\n";
}

}  // namespace

int cmd_solve(const ExperimentConfig& cfg, std::ostream& log) {
  std::optional<SolvedModel> s;
  return solve_stage(cfg, log, s);
}

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
  std::optional<SolvedModel> s;
  if (const int code = solve_stage(cfg, log, s); code != exit_code::ok) return code;
  const HomogeneousModel& model = cfg.model->model;
  const FeedbackControl fb = build_feedback(model, s->plus, s->minus);
  json summary = json::array();
  for (std::size_t i = 0; i < cfg.simulation.x0.size(); ++i) {
    const double x0 = cfg.simulation.x0[i];
    const SimulationBatch batch = simulate_state(fb, model, x0, simulation_options(cfg, true));
    const CostEstimate cost = estimate_cost(batch, fb, model);
    const double value = value_function(s->plus, s->minus, x0);
    const VerificationRow row = verify_point(x0, value, cost, 0.0);
    if (cfg.outputs.csv) {
      std::ostringstream csv;
      write_batch_csv(csv, batch);
      write_file(cfg.outputs.directory / ("paths_x0_" + std::to_string(i) + ".csv"), csv.str());
    }
    summary.push_back({{"x0", x0},
                       {"paths", batch.paths},
                       {"seed", batch.seed},
                       {"J_mean", cost.mean},
                       {"J_stderr", cost.std_error},
                       {"value", value},
                       {"gap", cost.mean - value},
                       {"z_score", row.z_score},
                       {"min_log_abs_state", batch.min_log_abs},
                       {"max_log_abs_state", batch.max_log_abs}});
    log << "  x0=" << str(x0) << "  J=" << str(cost.mean) << " +- " << str(cost.std_error) << "  value=" << str(value)
        << "  z=" << str(row.z_score) << "\n";
  }
  if (cfg.outputs.json) write_file(cfg.outputs.directory / "simulate.json", summary.dump(2) + "\n");
  return exit_code::ok;
}

int cmd_verify(const ExperimentConfig& cfg, std::ostream& log) {
  std::optional<SolvedModel> s;
  if (const int code = solve_stage(cfg, log, s); code != exit_code::ok) return code;
  const HomogeneousModel& model = cfg.model->model;
  const FeedbackControl optimum = build_feedback(model, s->plus, s->minus);

  std::optional<FeedbackControl> shipped;
  if (cfg.feedback_file) {
    std::istringstream in(read_file(*cfg.feedback_file));
    try {
      shipped = read_feedback_csv(in, model);
    } catch (const ConstraintViolation& e) {
      log << "shipped feedback is not admissible: " << e.what() << "\n";
      return exit_code::verification_failure;
    }
    if (!(shipped->grid == optimum.grid) || shipped->mode != optimum.mode)
      throw ConfigError("feedback file does not match the configured grid");
    log << "verifying feedback from " << cfg.feedback_file->string() << "\n";
  }
  const FeedbackControl& fb = shipped ? *shipped : optimum;

  // The scheme bias scales with |x0|^p; one pre-pass per side.
  std::map<int, double> unit_allowance;
  std::vector<VerificationRow> rows;
  for (double x0 : cfg.simulation.x0) {
    double allowance = 0.0;
    if (x0 != 0.0) {
      const int side = x0 > 0.0 ? 1 : -1;
      if (!unit_allowance.contains(side))
        unit_allowance[side] = discretization_allowance(model, s->plus, s->minus, side, cfg.solver).allowance;
      allowance = unit_allowance[side] * std::pow(std::abs(x0), model.p());
    }
    const SimulationBatch batch = simulate_state(fb, model, x0, simulation_options(cfg, false));
    rows.push_back(verify_point(x0, value_function(s->plus, s->minus, x0), estimate_cost(batch, fb, model), allowance));
    const auto& r = rows.back();
    log << "  x0=" << std::left << std::setw(6) << str(x0) << " value=" << str(r.value) << "  J=" << str(r.J_mean)
        << " +- " << str(r.J_stderr) << "  z=" << str(r.z_score) << "  allowance=" << str(r.allowance)
        << (r.passed ? "  ok" : "  FAIL") << "\n";
  }
  const auto competitors = run_competitors(cfg, *s, optimum);
  log_competitors(log, competitors);

  const bool passed = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.passed; }) &&
                      std::all_of(competitors.begin(), competitors.end(), [](const auto& r) { return r.suboptimal; });
  if (cfg.outputs.csv) {
    std::ostringstream csv;
    csv << "x0,value,J_mean,J_stderr,z_score,allowance,passed\n";
    for (const auto& r : rows)
      csv << str(r.x0) << ',' << str(r.value) << ',' << str(r.J_mean) << ',' << str(r.J_stderr) << ','
          << str(r.z_score) << ',' << str(r.allowance) << ',' << (r.passed ? "true" : "false") << '\n';
    write_file(cfg.outputs.directory / "verify.csv", csv.str());
    if (!competitors.empty()) write_competitor_csv(cfg.outputs.directory / "verify_competitors.csv", competitors);
  }
  if (cfg.outputs.json) {
    json report = json::array();
    for (const auto& r : rows)
      report.push_back({{"x0", r.x0},
                        {"value", r.value},
                        {"J_mean", r.J_mean},
                        {"J_stderr", r.J_stderr},
                        {"z_score", r.z_score},
                        {"allowance", r.allowance},
                        {"passed", r.passed}});
    const json doc = {{"model", model_json(cfg)},
                      {"paths", cfg.simulation.paths},
                      {"seed", cfg.simulation.seed},
                      {"feedback", shipped ? cfg.feedback_file->string() : "solved"},
                      {"verification", report},
                      {"competitors", competitor_json(competitors)},
                      {"passed", passed}};
    write_file(cfg.outputs.directory / "verify.json", doc.dump(2) + "\n");
  }
  log << (passed ? "verification passed\n" : "verification FAILED\n");
  return passed ? exit_code::ok : exit_code::verification_failure;
}

int cmd_compare(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.competitors.empty()) throw ConfigError("compare: the competitors list is empty");
  std::optional<SolvedModel> s;
  if (const int code = solve_stage(cfg, log, s); code != exit_code::ok) return code;
  const FeedbackControl optimum = build_feedback(cfg.model->model, s->plus, s->minus);
  auto rows = run_competitors(cfg, *s, optimum);
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.gap < b.gap; });
  log_competitors(log, rows);
  if (cfg.outputs.csv) write_competitor_csv(cfg.outputs.directory / "compare.csv", rows);
  if (cfg.outputs.json) write_file(cfg.outputs.directory / "compare.json", competitor_json(rows).dump(2) + "\n");
  const bool ok = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.suboptimal; });
  return ok ? exit_code::ok : exit_code::verification_failure;
}

int cmd_check(const ExperimentConfig& cfg, std::ostream& log) {
  const HomogeneousModel& model = cfg.model->model;
  ensure_writable(cfg.outputs.directory);
  const RegimeDiagnostics regime = check_regime(model, default_regime_samples(model));
  const HomogeneityReport homogeneity = check_homogeneity(model, 256, cfg.simulation.seed);
  json entries = json::array();
  for (const auto& e : homogeneity.entries) {
    entries.push_back({{"coefficient", e.coefficient},
                       {"degree", e.degree},
                       {"passed", e.passed},
                       {"worst_relative_error", e.worst_relative_error},
                       {"worst_lambda", e.worst_lambda},
                       {"samples", e.samples}});
    log << "  homogeneity " << e.coefficient << " (degree " << str(e.degree) << "): "
        << (e.passed ? "pass" : "FAIL") << ", worst relative error " << str(e.worst_relative_error) << "\n";
  }
  log << "  regime " << to_string(model.regime()) << ": " << (regime.passed ? "pass" : "FAIL") << " on "
      << regime.points_checked << " points\n";
  for (const auto& msg : regime.messages) log << "  regime: " << msg << "\n";
  if (cfg.outputs.json) {
    const json doc = {{"model", model_json(cfg)}, {"regime_diagnostics", regime_json(regime)}, {"homogeneity", entries}};
    write_file(cfg.outputs.directory / "check.json", doc.dump(2) + "\n");
  }
  return regime.passed && homogeneity.all_passed() ? exit_code::ok : exit_code::invariant_violation;
}

int run_command(const std::string& name, const std::filesystem::path& config, const Overrides& overrides,
                std::ostream& log) {
  try {
    const ExperimentConfig cfg = load_experiment(config, overrides);
    if (name == "solve") return cmd_solve(cfg, log);
    if (name == "simulate") return cmd_simulate(cfg, log);
    if (name == "verify") return cmd_verify(cfg, log);
    if (name == "compare") return cmd_compare(cfg, log);
    if (name == "check") return cmd_check(cfg, log);
    log << "error: unknown command '" << name << "'\n";
    return exit_code::config_error;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return exit_code::config_error;
  } catch (const IllPosed& e) {
    log << "ill-posed: " << e.what() << "\n";
    return exit_code::solver_error;
  } catch (const Error& e) {
    log << "solver error: " << e.what() << "\n";
    return exit_code::solver_error;
  } catch (const std::filesystem::filesystem_error& e) {
    log << "config error: " << e.what() << "\n";
    return exit_code::config_error;
  }
}

}  // namespace hsc
