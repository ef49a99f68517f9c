#include "hsc/minimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace hsc {

void MinimizerConfig::validate() const {
  if (multistart_count < 1) throw DomainError("minimizer: multistart_count must be >= 1");
  if (max_iterations < 1) throw DomainError("minimizer: max_iterations must be >= 1");
  if (!(gradient_step_tolerance > 0.0) || !(value_tolerance > 0.0) || !(finite_difference_h > 0.0))
    throw DomainError("minimizer: tolerances must be strictly positive");
  if (!(radial_search_max > 0.0) || !std::isfinite(radial_search_max))
    throw DomainError("minimizer: radial_search_max must be finite and positive");
}

const char* to_string(MinimizeStatus s) {
  switch (s) {
    case MinimizeStatus::converged: return "converged";
    case MinimizeStatus::iteration_cap: return "iteration_cap";
    case MinimizeStatus::divergent_to_minus_infinity: return "divergent_to_minus_infinity";
  }
  return "?";
}

namespace {

struct Counted {
  const Objective& fn;
  long calls = 0;
  double operator()(const Vec& v) {
    ++calls;
    return fn(v);
  }
};

struct LocalRun {
  Vec x;
  double fx;
  bool converged;
  bool escaped;
};

Vec central_gradient(Counted& f, const Vec& x, double h) {
  Vec g(x.size());
  Vec y = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double hi = h * std::max(1.0, std::abs(x(i)));
    y(i) = x(i) + hi;
    const double fp = f(y);
    y(i) = x(i) - hi;
    const double fm = f(y);
    y(i) = x(i);
    g(i) = (fp - fm) / (2.0 * hi);
  }
  return g;
}

LocalRun descend(const Cone& cone, Counted& f, Vec x0, const MinimizerConfig& cfg) {
  Vec x = cone.project(x0);
  double fx = f(x);
  if (!std::isfinite(fx)) return {x, fx, false, false};

  double step = 1.0;
  Vec prev_x, prev_g;
  int flat_iterations = 0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const Vec g = central_gradient(f, x, cfg.finite_difference_h);
    if (!g.allFinite()) return {x, fx, false, false};

    if (it > 0) {
      const Vec dx = x - prev_x;
      const Vec dg = g - prev_g;
      const double sy = dx.dot(dg);
      if (sy > 0.0) step = std::clamp(dx.squaredNorm() / sy, 1e-12, 1e12);
    }

    Vec y;
    double fy = fx;
    bool accepted = false;
    for (int bt = 0; bt < 80; ++bt) {
      y = cone.project(x - step * g);
      const Vec d = y - x;
      if (d.norm() == 0.0) return {x, fx, true, false};
      fy = f(y);
      if (std::isfinite(fy) && fy <= fx + 1e-4 * g.dot(d)) {
        accepted = true;
        break;
      }
      if (fy == -std::numeric_limits<double>::infinity()) return {y, fy, false, true};
      step *= 0.5;
    }
    // No decrease is resolvable at this precision: numerically stationary.
    if (!accepted) return {x, fx, true, false};

    const double dnorm = (y - x).norm();
    const double decrease = fx - fy;
    prev_x = x;
    prev_g = g;
    x = y;
    fx = fy;

    if (x.norm() > cfg.radial_search_max) return {x, fx, false, true};
    if (dnorm <= cfg.gradient_step_tolerance * (1.0 + x.norm())) return {x, fx, true, false};
    if (decrease <= 1e-3 * cfg.value_tolerance * (1.0 + std::abs(fx))) {
      if (++flat_iterations >= 3) return {x, fx, true, false};
    } else {
      flat_iterations = 0;
    }
  }
  return {x, fx, false, false};
}

/// Newton refinement at an interior stationary point. Value differences near
/// the optimum sit at rounding level on flat objectives, so steps are judged
/// by the gradient norm; the value may not rise beyond rounding.
void polish(const Cone& cone, Counted& f, LocalRun& run, const MinimizerConfig& cfg) {
  const Eigen::Index m = run.x.size();
  const double h = cfg.finite_difference_h;
  Vec g = central_gradient(f, run.x, h);
  for (int it = 0; it < 8 && g.allFinite() && g.norm() > 0.0; ++it) {
    Mat H(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double hj = 1e2 * h * std::max(1.0, std::abs(run.x(j)));
      Vec y = run.x;
      y(j) += hj;
      const Vec gp = central_gradient(f, y, h);
      y(j) = run.x(j) - hj;
      const Vec gm = central_gradient(f, y, h);
      H.col(j) = (gp - gm) / (2.0 * hj);
    }
    const Mat Hs = 0.5 * (H + H.transpose());
    Eigen::LLT<Mat> llt(Hs);
    if (!Hs.allFinite() || llt.info() != Eigen::Success) return;
    const Vec y = run.x - llt.solve(g);
    if (!y.allFinite() || (cone.project(y) - y).norm() > 0.0) return;
    const double fy = f(y);
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(run.fx));
    if (!std::isfinite(fy) || fy > run.fx + slack) return;
    const Vec gy = central_gradient(f, y, h);
    if (!gy.allFinite() || gy.norm() >= g.norm()) return;
    run.x = y;
    run.fx = fy;
    g = gy;
  }
}

/// Objective keeps decreasing along `dir` up to radial_search_max.
bool radial_divergence(Counted& f, const Vec& dir, const MinimizerConfig& cfg) {
  const double n = dir.norm();
  if (n == 0.0) return false;
  const Vec d = dir / n;
  std::vector<double> radii;
  for (double r = 1.0; r < cfg.radial_search_max; r *= 10.0) radii.push_back(r);
  radii.push_back(cfg.radial_search_max);
  if (radii.size() < 3) return false;

  std::vector<double> vals;
  for (double r : radii) {
    const double v = f(r * d);
    if (v == -std::numeric_limits<double>::infinity()) return true;
    if (!std::isfinite(v)) return false;
    vals.push_back(v);
  }
  const std::size_t k = vals.size();
  const double slope = (vals[k - 1] - vals[k - 2]) / (radii[k - 1] - radii[k - 2]);
  return slope < -cfg.value_tolerance && vals[k - 1] < vals[k - 2] && vals[k - 2] < vals[k - 3];
}

bool lexicographically_less(const Vec& a, const Vec& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return false;
}

}  // namespace

MinimizeResult minimize(const Cone& cone, const Objective& objective, const MinimizerConfig& config,
                        std::span<const Vec> warm_starts) {
  config.validate();
  const int m = cone.dim();
  Counted f{objective};

  const Vec zero = Vec::Zero(m);
  const double f0 = f(zero);
  if (!std::isfinite(f0)) throw DomainError("minimize: objective is not finite at the origin");

  std::vector<Vec> starts;
  starts.push_back(zero);
  for (const Vec& w : warm_starts) {
    if (w.size() != m) throw DimensionMismatch("minimize: warm start dimension mismatch");
    if (w.allFinite()) starts.push_back(w);
  }
  const auto dirs = cone.spanning_directions();
  for (const Vec& d : dirs) {
    if (static_cast<int>(starts.size()) >= config.multistart_count + static_cast<int>(warm_starts.size())) break;
    starts.push_back(d.normalized());
  }
  std::mt19937_64 rng(config.seed);
  while (static_cast<int>(starts.size()) < config.multistart_count) starts.push_back(cone.sample(rng));

  std::vector<LocalRun> runs;
  runs.reserve(starts.size());
  for (const Vec& s : starts) {
    runs.push_back(descend(cone, f, s, config));
    if (runs.back().converged && runs.back().x.norm() > 0.0) polish(cone, f, runs.back(), config);
  }

  // Radial probe for an unbounded-below objective.
  std::vector<Vec> probe = dirs;
  for (const auto& r : runs)
    if (r.escaped || r.x.norm() > 0.0) probe.push_back(r.x);
  for (const Vec& d : probe) {
    if (radial_divergence(f, d, config)) {
      MinimizeResult out;
      out.argmin = cone.project(d.normalized() * config.radial_search_max);
      out.value = -std::numeric_limits<double>::infinity();
      out.status = MinimizeStatus::divergent_to_minus_infinity;
      out.evaluations = f.calls;
      return out;
    }
  }

  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : runs)
    if (std::isfinite(r.fx) && !r.escaped) best = std::min(best, r.fx);

  const LocalRun* chosen = nullptr;
  const double window = config.value_tolerance * std::max(1.0, std::abs(best));
  for (const auto& r : runs) {
    if (!std::isfinite(r.fx) || r.escaped || r.fx > best + window || r.fx > f0) continue;
    if (chosen == nullptr) {
      chosen = &r;
      continue;
    }
    const double nr = r.x.norm(), nc = chosen->x.norm();
    if (nr < nc || (nr == nc && lexicographically_less(r.x, chosen->x))) chosen = &r;
  }

  MinimizeResult out;
  if (chosen == nullptr) {
    out.argmin = zero;
    out.value = f0;
    out.status = MinimizeStatus::iteration_cap;
  } else {
    out.argmin = chosen->x;
    out.value = chosen->fx;
    out.status = chosen->converged ? MinimizeStatus::converged : MinimizeStatus::iteration_cap;
  }
  out.evaluations = f.calls;
  return out;
}

}  // namespace hsc
