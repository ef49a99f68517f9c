#pragma once

#include "hsc/bsde.hpp"

#include <cstdint>
#include <vector>

namespace hsc {

/// Feedback u(t, x) = v_plus(t) x^+ + v_minus(t) x^-, one control vector per
/// solver node (one per layer in deterministic mode, k + 1 per layer on the tree).
struct FeedbackControl {
  TimeGrid grid{1.0, 1};
  SolveMode mode = SolveMode::deterministic;
  std::vector<std::vector<Vec>> v_plus;
  std::vector<std::vector<Vec>> v_minus;

  /// Control at node (k, j) for state x.
  Vec control(int k, int j, double x) const;
};

/// Optimal feedback from the two branch solutions. Throws DomainError on a grid,
/// mode or branch mismatch and ConstraintViolation if an argmin leaves the cone.
FeedbackControl build_feedback(const HomogeneousModel& model, const BsdeSolution& sol_plus,
                               const BsdeSolution& sol_minus);

/// Feedback from arbitrary per-node vectors (competitors). Same checks.
FeedbackControl make_feedback(const HomogeneousModel& model, const TimeGrid& grid, SolveMode mode,
                              std::vector<std::vector<Vec>> v_plus, std::vector<std::vector<Vec>> v_minus);

struct SimulationOptions {
  std::int64_t paths = 100'000;
  std::uint64_t seed = 1;
  bool antithetic = false;
  /// Number of leading paths whose trajectories are kept for export.
  int keep_paths = 0;
};

/// Closed-loop simulation. Per-path costs are accumulated during the sweep;
/// trajectories are kept only for the first `keep_paths` paths.
struct SimulationBatch {
  TimeGrid grid{1.0, 1};
  SolveMode mode = SolveMode::deterministic;
  std::int64_t paths = 0;
  std::uint64_t seed = 0;
  bool antithetic = false;
  double x0 = 0.0;
  int sign = 0;  // sign of x0, kept by every path
  double degree = 2.0;

  std::vector<double> running_cost;   // per path
  std::vector<double> terminal_cost;  // per path

  // Kept trajectories: log|X| and cost accumulated up to each node.
  std::vector<std::vector<double>> log_abs_state;
  std::vector<std::vector<double>> running_cost_so_far;

  // Extremes of log|X| over all paths and nodes; finite means no path reached 0.
  double min_log_abs = 0.0;
  double max_log_abs = 0.0;

  double state(std::size_t path, int k) const;
};

SimulationBatch simulate_state(const FeedbackControl& feedback, const HomogeneousModel& model, double x0,
                               const SimulationOptions& options);

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean and standard error of running + terminal cost (pairwise sums).
/// With antithetic sampling the error is computed from pair averages.
CostEstimate estimate_cost(const SimulationBatch& batch, const FeedbackControl& feedback,
                           const HomogeneousModel& model);

/// P_plus(0) (x0^+)^p + P_minus(0) (x0^-)^p.
double value_function(const BsdeSolution& sol_plus, const BsdeSolution& sol_minus, double x0);

/// Simulate and cost a competitor feedback exactly as for the optimum.
CostEstimate evaluate_competitor(const FeedbackControl& competitor, const HomogeneousModel& model, double x0,
                                 const SimulationOptions& options);

/// Expectation of the discretised cost (left-endpoint running cost plus
/// terminal cost) under `feedback`, computed without sampling: lognormal
/// moments in deterministic mode, forward propagation on the tree.
double expected_discrete_cost(const FeedbackControl& feedback, const HomogeneousModel& model, double x0);

struct Allowance {
  double bias_fine = 0.0;    // expected discrete cost - value at N
  double bias_coarse = 0.0;  // same at N/2
  double allowance = 0.0;
};

/// Scheme bias bound from a two-grid pre-pass: 2 |bias(N/2) - bias(N)|, with
/// the biases at N and N/2 computed exactly. Solves the branch of sign(x0) on
/// the coarse grid. All three numbers scale with |x0|^p.
Allowance discretization_allowance(const HomogeneousModel& model, const BsdeSolution& sol_plus,
                                   const BsdeSolution& sol_minus, double x0, const SolverOptions& options = {});

/// Solve a branch in the given mode.
BsdeSolution solve(const HomogeneousModel& model, Branch branch, const TimeGrid& grid, SolveMode mode,
                   const SolverOptions& options = {});

}  // namespace hsc
