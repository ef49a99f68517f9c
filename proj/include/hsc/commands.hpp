#pragma once

#include "hsc/config.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hsc {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config_error = 2;
inline constexpr int solver_error = 3;
inline constexpr int invariant_violation = 4;
inline constexpr int verification_failure = 5;
}  // namespace exit_code

/// Both branch solutions with their comparison bounds and checks.
struct SolvedModel {
  BsdeSolution plus, minus;
  BsdeSolution upper_plus, upper_minus;
  SolutionInvariants invariants_plus, invariants_minus;
  RegimeDiagnostics regime;
  bool ok() const { return regime.passed && invariants_plus.ok() && invariants_minus.ok(); }
};

/// Regime check, both solves, comparison bounds, invariants. Solver errors
/// propagate as exceptions.
SolvedModel solve_model(const HomogeneousModel& model, const TimeGrid& grid, SolveMode mode,
                        const SolverOptions& options);

struct VerificationRow {
  double x0 = 0.0;
  double value = 0.0;
  double J_mean = 0.0;
  double J_stderr = 0.0;
  double z_score = 0.0;
  double allowance = 0.0;
  bool passed = false;
};

struct CompetitorRow {
  std::string label;
  double x0 = 0.0;
  double value = 0.0;
  double J_mean = 0.0;
  double J_stderr = 0.0;
  double gap = 0.0;  // J_mean - value
  bool suboptimal = false;  // J_mean + 3 stderr >= value
};

/// |J - value| <= 3 stderr + allowance (+ rounding slack).
VerificationRow verify_point(double x0, double value, const CostEstimate& cost, double allowance);

CompetitorRow compare_point(const std::string& label, double x0, double value, const CostEstimate& cost);

// Subcommands. Each returns an exit code and writes its tables to the
// configured output directory; `log` receives a human-readable summary.
int cmd_solve(const ExperimentConfig& cfg, std::ostream& log);
int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log);
int cmd_verify(const ExperimentConfig& cfg, std::ostream& log);
int cmd_compare(const ExperimentConfig& cfg, std::ostream& log);
int cmd_check(const ExperimentConfig& cfg, std::ostream& log);

/// Loads the config and dispatches; config errors map to exit 2.
int run_command(const std::string& name, const std::filesystem::path& config, const Overrides& overrides,
                std::ostream& log);

}  // namespace hsc
