#pragma once

#include "hsc/driver.hpp"

#include <cstddef>
#include <vector>

namespace hsc {

/// Uniform grid t_k = k T / N, k = 0..N, with t_N = T exactly.
class TimeGrid {
 public:
  TimeGrid(double T, int N);
  int steps() const { return N_; }
  double horizon() const { return T_; }
  double dt() const { return T_ / N_; }
  double t(int k) const { return k == N_ ? T_ : T_ * static_cast<double>(k) / N_; }
  bool operator==(const TimeGrid& o) const { return N_ == o.N_ && T_ == o.T_; }

 private:
  double T_;
  int N_;
};

enum class SolveMode { deterministic, tree };

const char* to_string(SolveMode m);

struct NodeValue {
  double P = 0.0;
  Vec Lambda;  // n; zero in deterministic mode
  Vec v_hat;   // m; driver argmin at this node
};

/// Solution of one of the two BSDEs on a grid. layers[k] holds one node in
/// deterministic mode and k + 1 nodes (indexed by up-move count) on the tree.
struct BsdeSolution {
  TimeGrid grid{1.0, 1};
  SolveMode mode = SolveMode::deterministic;
  Branch branch = Branch::plus;
  double degree = 2.0;
  std::vector<std::vector<NodeValue>> layers;

  // Tree diagnostics.
  int max_fixed_point_iterations = 0;
  double max_fixed_point_residual = 0.0;

  double initial_value() const { return layers.front().front().P; }
  const NodeValue& node(int k, int j = 0) const {
    return layers[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
  }
  double min_P() const;
};

struct SolverOptions {
  DriverOptions driver;
  int fixed_point_max_iterations = 100;
  /// Tree nodes iterate until the residual reaches rounding level, or falls
  /// below this and stops improving.
  double fixed_point_tolerance = 1e-12;
  std::size_t max_tree_nodes = 5'000'000;
};

/// Deterministic coefficients: Lambda = 0 and dP/dt = -G*(t, P, 0) backward
/// from P(T) = g(+-1), classical RK4. v_hat[k] is the argmin at (t_k, P_k)
/// using the data of cell [t_k, t_k+1). Throws IllPosed on an unbounded-below
/// driver and SchemeDivergence when P leaves the finite range.
BsdeSolution solve_deterministic(const HomogeneousModel& model, Branch branch, const TimeGrid& grid,
                                 const SolverOptions& options = {});

/// Recombining binomial tree with increments +-sqrt(dt), n = 1:
///   P_k = E[P_k+1 | node] + G*(t_k, P_k, Lambda_k) dt,
///   Lambda_k = E[P_k+1 xi | node] / sqrt(dt),
/// the implicit dependence on P_k resolved by fixed-point iteration.
BsdeSolution solve_tree(const HomogeneousModel& model, Branch branch, const TimeGrid& grid,
                        const SolverOptions& options = {});

/// Linear comparison equation: driver frozen at v = 0. Same layout as the
/// main solve; v_hat is zero everywhere.
BsdeSolution solve_upper_bound(const HomogeneousModel& model, Branch branch, const TimeGrid& grid,
                               SolveMode mode = SolveMode::deterministic);

/// Scalar LQ data for the classical Riccati equation (p = 2).
struct LqParams {
  double A = 0.0;
  Vec B;  // m
  Vec C;  // n
  double Q = 0.0;
  Mat R;  // rows x m
  double G = 1.0;
  double T = 1.0;
};

/// Independent integration of dP/dt = -(Q^2 + (2A + |C|^2) P - B'(R'R)^-1 B P^2),
/// P(T) = G, with an adaptive embedded Runge-Kutta (Dormand-Prince) stepper.
/// Returns P at every grid node.
std::vector<double> riccati_oracle(const LqParams& lq, const TimeGrid& grid);

struct SolutionInvariants {
  bool terminal_exact = true;
  bool nonnegative = true;        // cases I/II
  bool uniformly_positive = true; // case III
  double positivity_c = 0.0;      // smallest c with P >= eta e^{-cT}
  bool below_upper_bound = true;
  double max_upper_excess = 0.0;  // max(P - P_bar)
  double min_P = 0.0;
  std::vector<std::string> messages;
  bool ok() const { return terminal_exact && nonnegative && uniformly_positive && below_upper_bound; }
};

SolutionInvariants check_invariants(const HomogeneousModel& model, const BsdeSolution& solution,
                                    const BsdeSolution& upper, double tol = 1e-8);

}  // namespace hsc
