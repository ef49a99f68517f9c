#include "hsc/control.hpp"

#include "hsc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace hsc {

namespace {

std::size_t layer_size(SolveMode mode, int k) { return mode == SolveMode::tree ? static_cast<std::size_t>(k + 1) : 1; }

void check_layout(const HomogeneousModel& model, const TimeGrid& grid, SolveMode mode,
                  const std::vector<std::vector<Vec>>& v, const char* which) {
  if (v.size() != static_cast<std::size_t>(grid.steps() + 1))
    throw DomainError(std::string("feedback: ") + which + " has the wrong number of layers");
  for (int k = 0; k <= grid.steps(); ++k) {
    const auto& layer = v[static_cast<std::size_t>(k)];
    if (layer.size() != layer_size(mode, k))
      throw DomainError(std::string("feedback: ") + which + " layer has the wrong node count");
    for (const Vec& u : layer) {
      if (u.size() != model.m()) throw DimensionMismatch(std::string("feedback: ") + which + " has wrong dimension");
      if (!u.allFinite() || !model.cone().contains(u, membership_tolerance(u)))
        throw ConstraintViolation(std::string("feedback: ") + which + " leaves the control cone");
    }
  }
}

double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

/// Per-node coefficients of the closed-loop log|X| on one side of zero, flat
/// in node order (layer k starts at k in deterministic mode, k(k+1)/2 on the tree).
struct SideDynamics {
  SolveMode mode = SolveMode::deterministic;
  int N = 0;
  int n = 1;
  double p = 2.0;
  std::vector<double> drift;     // log-drift times dt
  std::vector<double> shock;     // signed volatility times sqrt(dt), n per node
  std::vector<double> cost;      // f(+-1, v) dt
  std::vector<double> terminal;  // g per terminal node

  std::size_t node(int k, int j) const {
    return mode == SolveMode::tree ? static_cast<std::size_t>(k) * static_cast<std::size_t>(k + 1) / 2 +
                                         static_cast<std::size_t>(j)
                                   : static_cast<std::size_t>(k);
  }
};

SideDynamics side_dynamics(const HomogeneousModel& model, const TimeGrid& grid, SolveMode mode, Branch side,
                           const std::vector<std::vector<Vec>>& controls) {
  if (grid.horizon() != model.horizon()) throw DomainError("simulation: grid horizon differs from model horizon");
  SideDynamics d;
  d.mode = mode;
  d.N = grid.steps();
  d.n = model.n();
  d.p = model.p();
  const double h = grid.dt();
  const double root_h = std::sqrt(h);
  const double s = branch_sign(side);
  for (int k = 0; k < d.N; ++k) {
    const auto& layer = controls[static_cast<std::size_t>(k)];
    for (std::size_t j = 0; j < layer.size(); ++j) {
      const Instant at{grid.t(k), grid.t(k) + 0.5 * h, k, static_cast<int>(j)};
      const double b = model.drift(side, at, layer[j]);
      const Vec sigma = model.volatility(side, at, layer[j]);
      // For x < 0 the process |X| has drift -b(-1, v) and volatility -sigma(-1, v).
      d.drift.push_back((s * b - 0.5 * sigma.squaredNorm()) * h);
      for (int i = 0; i < d.n; ++i) d.shock.push_back(s * root_h * sigma(i));
      d.cost.push_back(model.running_cost(side, at, layer[j]) * h);
    }
  }
  const std::size_t leaves = layer_size(mode, d.N);
  for (std::size_t j = 0; j < leaves; ++j)
    d.terminal.push_back(mode == SolveMode::tree ? model.terminal(side, static_cast<int>(j), d.N)
                                                 : model.terminal(side));
  return d;
}

double expected_cost(const SideDynamics& d, double x0) {
  const double base = std::pow(std::abs(x0), d.p);
  const auto n = static_cast<std::size_t>(d.n);
  if (d.mode == SolveMode::deterministic) {
    double moment = base, total = 0.0;
    for (int k = 0; k < d.N; ++k) {
      const std::size_t at = d.node(k, 0);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) var += d.shock[at * n + i] * d.shock[at * n + i];
      total += moment * d.cost[at];
      moment *= std::exp(d.p * d.drift[at] + 0.5 * d.p * d.p * var);
    }
    return total + moment * d.terminal[0];
  }
  std::vector<double> weight{base}, next;
  double total = 0.0;
  for (int k = 0; k < d.N; ++k) {
    next.assign(static_cast<std::size_t>(k + 2), 0.0);
    for (int j = 0; j <= k; ++j) {
      const std::size_t at = d.node(k, j);
      const auto jj = static_cast<std::size_t>(j);
      total += weight[jj] * d.cost[at];
      next[jj + 1] += 0.5 * weight[jj] * std::exp(d.p * (d.drift[at] + d.shock[at]));
      next[jj] += 0.5 * weight[jj] * std::exp(d.p * (d.drift[at] - d.shock[at]));
    }
    weight.swap(next);
  }
  for (std::size_t j = 0; j < weight.size(); ++j) total += weight[j] * d.terminal[j];
  return total;
}

}  // namespace

Vec FeedbackControl::control(int k, int j, double x) const {
  const auto kk = static_cast<std::size_t>(k), jj = static_cast<std::size_t>(j);
  if (x > 0.0) return v_plus[kk][jj] * x;
  if (x < 0.0) return v_minus[kk][jj] * (-x);
  return Vec::Zero(v_plus[kk][jj].size());
}

FeedbackControl make_feedback(const HomogeneousModel& model, const TimeGrid& grid, SolveMode mode,
                              std::vector<std::vector<Vec>> v_plus, std::vector<std::vector<Vec>> v_minus) {
  check_layout(model, grid, mode, v_plus, "v_plus");
  check_layout(model, grid, mode, v_minus, "v_minus");
  FeedbackControl fb;
  fb.grid = grid;
  fb.mode = mode;
  fb.v_plus = std::move(v_plus);
  fb.v_minus = std::move(v_minus);
  return fb;
}

FeedbackControl build_feedback(const HomogeneousModel& model, const BsdeSolution& sol_plus,
                               const BsdeSolution& sol_minus) {
  if (!(sol_plus.grid == sol_minus.grid)) throw DomainError("feedback: solutions live on different grids");
  if (sol_plus.mode != sol_minus.mode) throw DomainError("feedback: solutions use different modes");
  if (sol_plus.branch != Branch::plus || sol_minus.branch != Branch::minus)
    throw DomainError("feedback: expected a plus and a minus solution");
  auto argmins = [](const BsdeSolution& sol) {
    std::vector<std::vector<Vec>> out(sol.layers.size());
    for (std::size_t k = 0; k < sol.layers.size(); ++k)
      for (const auto& nv : sol.layers[k]) out[k].push_back(nv.v_hat);
    return out;
  };
  return make_feedback(model, sol_plus.grid, sol_plus.mode, argmins(sol_plus), argmins(sol_minus));
}

double SimulationBatch::state(std::size_t path, int k) const {
  if (sign == 0) return 0.0;
  return sign * std::exp(log_abs_state[path][static_cast<std::size_t>(k)]);
}

SimulationBatch simulate_state(const FeedbackControl& feedback, const HomogeneousModel& model, double x0,
                               const SimulationOptions& options) {
  if (options.paths < 1) throw DomainError("simulation: paths must be >= 1");
  if (options.antithetic && options.paths % 2 != 0) throw DomainError("simulation: antithetic sampling needs an even path count");
  if (!std::isfinite(x0)) throw DomainError("simulation: x0 must be finite");
  if (feedback.grid.horizon() != model.horizon()) throw DomainError("simulation: feedback grid does not match the model");

  SimulationBatch batch;
  batch.grid = feedback.grid;
  batch.mode = feedback.mode;
  batch.paths = options.paths;
  batch.seed = options.seed;
  batch.antithetic = options.antithetic;
  batch.x0 = x0;
  batch.sign = x0 > 0.0 ? 1 : (x0 < 0.0 ? -1 : 0);
  batch.degree = model.p();
  const auto paths = static_cast<std::size_t>(options.paths);
  batch.running_cost.assign(paths, 0.0);
  batch.terminal_cost.assign(paths, 0.0);
  const auto keep = std::min<std::size_t>(paths, static_cast<std::size_t>(std::max(0, options.keep_paths)));
  const int N = feedback.grid.steps();

  if (batch.sign == 0) {
    const double neg_inf = -std::numeric_limits<double>::infinity();
    batch.log_abs_state.assign(keep, std::vector<double>(static_cast<std::size_t>(N + 1), neg_inf));
    batch.running_cost_so_far.assign(keep, std::vector<double>(static_cast<std::size_t>(N + 1), 0.0));
    batch.min_log_abs = batch.max_log_abs = neg_inf;
    return batch;
  }

  const Branch side = batch.sign > 0 ? Branch::plus : Branch::minus;
  const SideDynamics d =
      side_dynamics(model, feedback.grid, feedback.mode, side, side == Branch::plus ? feedback.v_plus : feedback.v_minus);
  const NormalStream normals(options.seed);
  const auto n = static_cast<std::size_t>(model.n());
  const double p = model.p();
  const double log0 = std::log(std::abs(x0));
  const bool tree = d.mode == SolveMode::tree;
  std::vector<double> noise(tree ? 0 : static_cast<std::size_t>(N) * n);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;

  for (std::size_t path = 0; path < paths; ++path) {
    const bool mirrored = options.antithetic && (path % 2 == 1);
    const std::uint64_t stream = options.antithetic ? path / 2 : path;
    const bool kept = path < keep;
    std::vector<double> log_path, cost_path;
    if (kept) {
      log_path.reserve(static_cast<std::size_t>(N + 1));
      cost_path.reserve(static_cast<std::size_t>(N + 1));
    }
    if (!tree) normals.fill(stream, noise.data(), noise.size());
    const double flip = mirrored ? -1.0 : 1.0;
    double L = log0, running = 0.0;
    int j = 0;
    std::array<std::uint32_t, 4> coins{};
    for (int k = 0; k < N; ++k) {
      const std::size_t at = d.node(k, j);
      lo = std::min(lo, L);
      hi = std::max(hi, L);
      if (kept) {
        log_path.push_back(L);
        cost_path.push_back(running);
      }
      running += std::exp(p * L) * d.cost[at];
      double shock = 0.0;
      if (!tree) {
        const double* z = noise.data() + static_cast<std::size_t>(k) * n;
        const double* s = d.shock.data() + at * n;
        for (std::size_t i = 0; i < n; ++i) shock += s[i] * z[i];
      } else {
        if (k % 128 == 0) coins = normals.bits(stream, static_cast<std::uint64_t>(k / 128));
        const int bit = k % 128;
        const bool up = (((coins[static_cast<std::size_t>(bit / 32)] >> (bit % 32)) & 1u) != 0) != mirrored;
        shock = up ? d.shock[at] : -d.shock[at];
        if (up) ++j;
      }
      L += d.drift[at] + (tree ? shock : flip * shock);
    }
    lo = std::min(lo, L);
    hi = std::max(hi, L);
    if (kept) {
      log_path.push_back(L);
      cost_path.push_back(running);
      batch.log_abs_state.push_back(std::move(log_path));
      batch.running_cost_so_far.push_back(std::move(cost_path));
    }
    batch.running_cost[path] = running;
    batch.terminal_cost[path] = std::exp(p * L) * d.terminal[static_cast<std::size_t>(tree ? j : 0)];
  }
  batch.min_log_abs = lo;
  batch.max_log_abs = hi;
  return batch;
}

CostEstimate estimate_cost(const SimulationBatch& batch, const FeedbackControl& feedback,
                           const HomogeneousModel& model) {
  if (!(batch.grid == feedback.grid) || batch.mode != feedback.mode)
    throw DomainError("estimate: batch was simulated on a different grid");
  if (batch.degree != model.p() || batch.grid.horizon() != model.horizon())
    throw DomainError("estimate: batch was simulated for a different model");
  const auto paths = static_cast<std::size_t>(batch.paths);
  if (batch.running_cost.size() != paths || batch.terminal_cost.size() != paths)
    throw DomainError("estimate: batch is incomplete");

  std::vector<double> samples;
  if (batch.antithetic) {
    samples.resize(paths / 2);
    for (std::size_t i = 0; i < samples.size(); ++i)
      samples[i] = 0.5 * (batch.running_cost[2 * i] + batch.terminal_cost[2 * i] + batch.running_cost[2 * i + 1] +
                          batch.terminal_cost[2 * i + 1]);
  } else {
    samples.resize(paths);
    for (std::size_t i = 0; i < paths; ++i) samples[i] = batch.running_cost[i] + batch.terminal_cost[i];
  }
  const double count = static_cast<double>(samples.size());
  CostEstimate est;
  est.mean = pairwise_sum(samples) / count;
  if (samples.size() < 2) {
    est.std_error = std::numeric_limits<double>::infinity();
    return est;
  }
  for (double& s : samples) s = (s - est.mean) * (s - est.mean);
  est.std_error = std::sqrt(pairwise_sum(samples) / (count - 1.0) / count);
  return est;
}

double value_function(const BsdeSolution& sol_plus, const BsdeSolution& sol_minus, double x0) {
  if (x0 > 0.0) return sol_plus.initial_value() * std::pow(x0, sol_plus.degree);
  if (x0 < 0.0) return sol_minus.initial_value() * std::pow(-x0, sol_minus.degree);
  return 0.0;
}

CostEstimate evaluate_competitor(const FeedbackControl& competitor, const HomogeneousModel& model, double x0,
                                 const SimulationOptions& options) {
  check_layout(model, competitor.grid, competitor.mode, competitor.v_plus, "v_plus");
  check_layout(model, competitor.grid, competitor.mode, competitor.v_minus, "v_minus");
  SimulationOptions opts = options;
  opts.keep_paths = 0;
  return estimate_cost(simulate_state(competitor, model, x0, opts), competitor, model);
}

double expected_discrete_cost(const FeedbackControl& feedback, const HomogeneousModel& model, double x0) {
  if (x0 == 0.0) return 0.0;
  const Branch side = x0 > 0.0 ? Branch::plus : Branch::minus;
  return expected_cost(side_dynamics(model, feedback.grid, feedback.mode, side,
                                     side == Branch::plus ? feedback.v_plus : feedback.v_minus),
                       x0);
}

BsdeSolution solve(const HomogeneousModel& model, Branch branch, const TimeGrid& grid, SolveMode mode,
                   const SolverOptions& options) {
  return mode == SolveMode::tree ? solve_tree(model, branch, grid, options)
                                 : solve_deterministic(model, branch, grid, options);
}

Allowance discretization_allowance(const HomogeneousModel& model, const BsdeSolution& sol_plus,
                                   const BsdeSolution& sol_minus, double x0, const SolverOptions& options) {
  Allowance out;
  if (x0 == 0.0) return out;
  const Branch side = x0 > 0.0 ? Branch::plus : Branch::minus;
  const BsdeSolution& fine = side == Branch::plus ? sol_plus : sol_minus;
  const double scale = std::pow(std::abs(x0), model.p());

  auto bias = [&](const BsdeSolution& sol) {
    std::vector<std::vector<Vec>> v(sol.layers.size());
    for (std::size_t k = 0; k < sol.layers.size(); ++k)
      for (const auto& nv : sol.layers[k]) v[k].push_back(nv.v_hat);
    check_layout(model, sol.grid, sol.mode, v, "argmins");
    return expected_cost(side_dynamics(model, sol.grid, sol.mode, side, v), x0) - sol.initial_value() * scale;
  };

  out.bias_fine = bias(fine);
  const int coarse_steps = std::max(1, fine.grid.steps() / 2);
  const TimeGrid coarse_grid(model.horizon(), coarse_steps);
  out.bias_coarse = bias(solve(model, side, coarse_grid, fine.mode, options));
  out.allowance = 2.0 * std::abs(out.bias_coarse - out.bias_fine);
  return out;
}

}  // namespace hsc
