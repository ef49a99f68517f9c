#include "hsc/bsde.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace hsc {

TimeGrid::TimeGrid(double T, int N) : T_(T), N_(N) {
  if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("time grid: horizon must be finite and > 0");
  if (N < 1) throw DomainError("time grid: step count must be >= 1");
}

const char* to_string(SolveMode m) { return m == SolveMode::deterministic ? "deterministic" : "tree"; }

double BsdeSolution::min_P() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& layer : layers)
    for (const auto& nv : layer) lo = std::min(lo, nv.P);
  return lo;
}

namespace {

void require_horizon(const HomogeneousModel& model, const TimeGrid& grid) {
  if (grid.horizon() != model.horizon()) throw DomainError("solver: grid horizon differs from model horizon");
}

std::string describe(double t, double P) {
  std::ostringstream os;
  os.precision(10);
  os << "t = " << t << ", P = " << P;
  return os.str();
}

/// Driver infimum that turns an unbounded-below driver into IllPosed.
DriverMinimum infimum_or_throw(const HomogeneousModel& model, Branch branch, const Instant& at, double P,
                               const Vec& Lambda, const DriverOptions& options, const Vec* warm) {
  if (!std::isfinite(P)) throw SchemeDivergence("solver: P is not finite at " + describe(at.t, P));
  const DriverPoint point{at, P, Lambda};
  std::span<const Vec> starts;
  if (warm != nullptr) starts = std::span<const Vec>(warm, 1);
  auto r = driver_infimum(model, branch, point, options, starts);
  if (r.status == MinimizeStatus::divergent_to_minus_infinity)
    throw IllPosed("driver infimum is -infinity (ill-posed problem) at " + describe(at.t, P), at.t, P);
  if (!std::isfinite(r.value)) throw SchemeDivergence("solver: driver value is not finite at " + describe(at.t, P));
  return r;
}

}  // namespace

BsdeSolution solve_deterministic(const HomogeneousModel& model, Branch branch, const TimeGrid& grid,
                                 const SolverOptions& options) {
  require_horizon(model, grid);
  const int N = grid.steps();
  const double h = grid.dt();
  const Vec zero_lambda = Vec::Zero(model.n());

  BsdeSolution sol;
  sol.grid = grid;
  sol.mode = SolveMode::deterministic;
  sol.branch = branch;
  sol.degree = model.p();
  sol.layers.assign(static_cast<std::size_t>(N + 1), std::vector<NodeValue>(1));

  double P = model.terminal(branch);
  const double last_mid = grid.t(N - 1) + 0.5 * h;
  auto last = infimum_or_throw(model, branch, Instant{grid.t(N), last_mid, N, 0}, P, zero_lambda, options.driver,
                               nullptr);
  sol.layers[static_cast<std::size_t>(N)][0] = NodeValue{P, zero_lambda, last.argmin};
  double last_cell_t = last_mid;

  for (int k = N - 1; k >= 0; --k) {
    const double t1 = grid.t(k + 1), t0 = grid.t(k);
    const double mid = t0 + 0.5 * h;
    const Instant a1{t1, mid, k, 0}, am{mid, mid, k, 0}, a0{t0, mid, k, 0};

    // Reuse the node evaluation at t_k+1 when it used the same data cell.
    const DriverMinimum s1 = model.cell_index(last_cell_t) == model.cell_index(mid)
                                 ? last
                                 : infimum_or_throw(model, branch, a1, P, zero_lambda, options.driver, &last.argmin);
    const DriverMinimum s2 =
        infimum_or_throw(model, branch, am, P + 0.5 * h * s1.value, zero_lambda, options.driver, &s1.argmin);
    const DriverMinimum s3 =
        infimum_or_throw(model, branch, am, P + 0.5 * h * s2.value, zero_lambda, options.driver, &s2.argmin);
    const DriverMinimum s4 =
        infimum_or_throw(model, branch, a0, P + h * s3.value, zero_lambda, options.driver, &s3.argmin);
    P += h / 6.0 * (s1.value + 2.0 * s2.value + 2.0 * s3.value + s4.value);
    if (!std::isfinite(P)) throw SchemeDivergence("solver: P blew up at " + describe(t0, P));

    last = infimum_or_throw(model, branch, a0, P, zero_lambda, options.driver, &s4.argmin);
    last_cell_t = mid;
    sol.layers[static_cast<std::size_t>(k)][0] = NodeValue{P, zero_lambda, last.argmin};
  }
  return sol;
}

BsdeSolution solve_tree(const HomogeneousModel& model, Branch branch, const TimeGrid& grid,
                        const SolverOptions& options) {
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  require_horizon(model, grid);
  if (model.n() != 1) throw DomainError("tree solver: only a single driving Brownian motion (n = 1) is supported");
  const int N = grid.steps();
  const std::size_t nodes = static_cast<std::size_t>(N + 1) * static_cast<std::size_t>(N + 2) / 2;
  if (nodes > options.max_tree_nodes)
    throw DomainError("tree solver: " + std::to_string(nodes) + " nodes exceed the memory cap of " +
                      std::to_string(options.max_tree_nodes));

  const double h = grid.dt();
  const double sq = std::sqrt(h);
  BsdeSolution sol;
  sol.grid = grid;
  sol.mode = SolveMode::tree;
  sol.branch = branch;
  sol.degree = model.p();
  sol.layers.resize(static_cast<std::size_t>(N + 1));

  auto& terminal_layer = sol.layers[static_cast<std::size_t>(N)];
  terminal_layer.resize(static_cast<std::size_t>(N + 1));
  const double last_mid = grid.t(N - 1) + 0.5 * h;
  for (int j = 0; j <= N; ++j) {
    const double g = model.terminal(branch, j, N);
    const Vec lam = Vec::Zero(1);
    const auto r = infimum_or_throw(model, branch, Instant{grid.t(N), last_mid, N, j}, g, lam, options.driver, nullptr);
    terminal_layer[static_cast<std::size_t>(j)] = NodeValue{g, lam, r.argmin};
  }

  DriverOptions refine = options.driver;
  refine.minimizer.multistart_count = 1;

  for (int k = N - 1; k >= 0; --k) {
    const auto& next = sol.layers[static_cast<std::size_t>(k + 1)];
    auto& layer = sol.layers[static_cast<std::size_t>(k)];
    layer.resize(static_cast<std::size_t>(k + 1));
    const double t0 = grid.t(k);
    for (int j = 0; j <= k; ++j) {
      const double up = next[static_cast<std::size_t>(j + 1)].P;
      const double dn = next[static_cast<std::size_t>(j)].P;
      const double expected = 0.5 * (up + dn);
      const Vec lambda = Vec::Constant(1, (up - dn) / (2.0 * sq));
      const Instant at{t0, t0 + 0.5 * h, k, j};

      // Fixed point of phi(P) = expected + G*(P, lambda) h. Secant steps when
      // the observed slope of phi is below one; plain iteration otherwise so
      // that a non-contracting map shows up as residual growth.
      double P = expected;
      double prev_P = 0.0, prev_phi = 0.0;
      Vec warm = next[static_cast<std::size_t>(j)].v_hat;
      std::vector<double> residuals;
      int it = 0;
      for (it = 1; it <= options.fixed_point_max_iterations; ++it) {
        const auto r =
            infimum_or_throw(model, branch, at, P, lambda, it == 1 ? options.driver : refine, &warm);
        const double phi = expected + r.value * h;
        const double res = std::abs(phi - P);
        warm = r.argmin;
        residuals.push_back(res);
        if (res <= 4.0 * kEps * std::abs(phi)) {
          P = phi;
          break;
        }
        // Below tolerance and no longer improving: rounding level reached.
        if (res <= options.fixed_point_tolerance && it > 1 && res > 0.5 * residuals[residuals.size() - 2]) {
          P = phi;
          break;
        }
        if (it > 10 && res > residuals[static_cast<std::size_t>(it - 11)]) {
          throw SchemeDivergence("tree solver: fixed point does not contract at " + describe(t0, P));
        }
        double step = phi;
        if (it > 1 && P != prev_P) {
          const double slope = (phi - prev_phi) / (P - prev_P);
          if (std::abs(slope) < 1.0) step = P + (phi - P) / (1.0 - slope);
        }
        prev_P = P;
        prev_phi = phi;
        P = std::isfinite(step) ? step : phi;
      }
      if (!std::isfinite(P)) throw SchemeDivergence("tree solver: P blew up at " + describe(t0, P));
      sol.max_fixed_point_iterations = std::max(sol.max_fixed_point_iterations, std::min(it, options.fixed_point_max_iterations));
      sol.max_fixed_point_residual = std::max(sol.max_fixed_point_residual, residuals.back());
      layer[static_cast<std::size_t>(j)] = NodeValue{P, lambda, warm};
    }
  }
  return sol;
}

BsdeSolution solve_upper_bound(const HomogeneousModel& model, Branch branch, const TimeGrid& grid, SolveMode mode) {
  require_horizon(model, grid);
  const int N = grid.steps();
  const double h = grid.dt();
  const Vec v0 = Vec::Zero(model.m());

  BsdeSolution sol;
  sol.grid = grid;
  sol.mode = mode;
  sol.branch = branch;
  sol.degree = model.p();
  sol.layers.resize(static_cast<std::size_t>(N + 1));

  auto linear = [&](const Instant& at, double P, const Vec& lambda) {
    return driver_value_unchecked(model, branch, v0, DriverPoint{at, P, lambda});
  };

  if (mode == SolveMode::deterministic) {
    const Vec lam = Vec::Zero(model.n());
    double P = model.terminal(branch);
    sol.layers[static_cast<std::size_t>(N)] = {NodeValue{P, lam, v0}};
    for (int k = N - 1; k >= 0; --k) {
      const double t1 = grid.t(k + 1), t0 = grid.t(k), mid = t0 + 0.5 * h;
      const Instant a1{t1, mid, k, 0}, am{mid, mid, k, 0}, a0{t0, mid, k, 0};
      const double k1 = linear(a1, P, lam);
      const double k2 = linear(am, P + 0.5 * h * k1, lam);
      const double k3 = linear(am, P + 0.5 * h * k2, lam);
      const double k4 = linear(a0, P + h * k3, lam);
      P += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!std::isfinite(P)) throw SchemeDivergence("upper bound: P blew up at " + describe(t0, P));
      sol.layers[static_cast<std::size_t>(k)] = {NodeValue{P, lam, v0}};
    }
    return sol;
  }

  if (model.n() != 1) throw DomainError("tree solver: only a single driving Brownian motion (n = 1) is supported");
  const double sq = std::sqrt(h);
  auto& terminal_layer = sol.layers[static_cast<std::size_t>(N)];
  for (int j = 0; j <= N; ++j) terminal_layer.push_back(NodeValue{model.terminal(branch, j, N), Vec::Zero(1), v0});
  for (int k = N - 1; k >= 0; --k) {
    const auto& next = sol.layers[static_cast<std::size_t>(k + 1)];
    auto& layer = sol.layers[static_cast<std::size_t>(k)];
    const double t0 = grid.t(k);
    for (int j = 0; j <= k; ++j) {
      const double up = next[static_cast<std::size_t>(j + 1)].P;
      const double dn = next[static_cast<std::size_t>(j)].P;
      const Vec lambda = Vec::Constant(1, (up - dn) / (2.0 * sq));
      const Instant at{t0, t0 + 0.5 * h, k, j};
      // The frozen-control driver is affine in P: solve the implicit step exactly.
      const double intercept = linear(at, 0.0, lambda);
      const double slope = linear(at, 1.0, lambda) - intercept;
      const double P = (0.5 * (up + dn) + intercept * h) / (1.0 - slope * h);
      layer.push_back(NodeValue{P, lambda, v0});
    }
  }
  return sol;
}

std::vector<double> riccati_oracle(const LqParams& lq, const TimeGrid& grid) {
  using namespace boost::numeric::odeint;
  using State = std::array<double, 1>;
  if (lq.R.cols() != lq.B.size()) throw DimensionMismatch("riccati oracle: R must have m columns");
  const Mat M = lq.R.transpose() * lq.R;
  Eigen::LDLT<Mat> ldlt(M);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
    throw DomainError("riccati oracle: R'R is singular");
  const double k = lq.B.dot(ldlt.solve(lq.B));
  const double lin = 2.0 * lq.A + lq.C.squaredNorm();
  const double q2 = lq.Q * lq.Q;

  // Time to maturity s = T - t.
  auto rhs = [=](const State& y, State& dyds, double) { dyds[0] = q2 + lin * y[0] - k * y[0] * y[0]; };

  const int N = grid.steps();
  std::vector<double> to_maturity(static_cast<std::size_t>(N + 1));
  for (int j = 0; j <= N; ++j) to_maturity[static_cast<std::size_t>(j)] = grid.horizon() - grid.t(N - j);

  std::vector<double> out(static_cast<std::size_t>(N + 1));
  State y{lq.G};
  auto stepper = make_controlled(1e-14, 1e-14, runge_kutta_dopri5<State>());
  integrate_times(stepper, rhs, y, to_maturity.begin(), to_maturity.end(), grid.dt() * 0.1,
                  [&](const State& s, double tau) {
                    const auto idx = static_cast<std::size_t>(
                        std::lower_bound(to_maturity.begin(), to_maturity.end(), tau) - to_maturity.begin());
                    out[static_cast<std::size_t>(N) - idx] = s[0];
                  });
  out[static_cast<std::size_t>(N)] = lq.G;
  return out;
}

SolutionInvariants check_invariants(const HomogeneousModel& model, const BsdeSolution& solution,
                                    const BsdeSolution& upper, double tol) {
  SolutionInvariants inv;
  const int N = solution.grid.steps();
  const auto& last = solution.layers[static_cast<std::size_t>(N)];
  for (std::size_t j = 0; j < last.size(); ++j) {
    const double g = solution.mode == SolveMode::tree ? model.terminal(solution.branch, static_cast<int>(j), N)
                                                      : model.terminal(solution.branch);
    if (last[j].P != g) {
      inv.terminal_exact = false;
      inv.messages.push_back("terminal value differs from g");
      break;
    }
  }

  inv.min_P = solution.min_P();
  if (model.regime() == Regime::case_iii) {
    const double eta = model.regime_params().eta;
    inv.uniformly_positive = inv.min_P > 0.0;
    if (!inv.uniformly_positive) {
      inv.positivity_c = std::numeric_limits<double>::infinity();
      inv.messages.push_back("P is not uniformly positive (min P = " + std::to_string(inv.min_P) + ")");
    } else if (eta > 0.0) {
      inv.positivity_c = std::max(0.0, -std::log(inv.min_P / eta) / model.horizon());
    }
  } else if (inv.min_P < -tol) {
    inv.nonnegative = false;
    inv.messages.push_back("P is negative (min P = " + std::to_string(inv.min_P) + ")");
  }

  if (!(upper.grid == solution.grid) || upper.layers.size() != solution.layers.size())
    throw DomainError("invariants: upper bound computed on a different grid");
  inv.max_upper_excess = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < solution.layers.size(); ++k) {
    if (upper.layers[k].size() != solution.layers[k].size())
      throw DomainError("invariants: upper bound computed in a different mode");
    for (std::size_t j = 0; j < solution.layers[k].size(); ++j)
      inv.max_upper_excess = std::max(inv.max_upper_excess, solution.layers[k][j].P - upper.layers[k][j].P);
  }
  if (inv.max_upper_excess > tol) {
    inv.below_upper_bound = false;
    inv.messages.push_back("P exceeds the comparison bound by " + std::to_string(inv.max_upper_excess));
  }
  return inv;
}

}  // namespace hsc
