#include "hsc/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace hsc {

const char* to_string(Regime r) {
  switch (r) {
    case Regime::case_i: return "I";
    case Regime::case_ii: return "II";
    case Regime::case_iii: return "III";
  }
  return "?";
}

Regime regime_from_string(const std::string& s) {
  if (s == "I" || s == "i" || s == "1" || s == "case_i") return Regime::case_i;
  if (s == "II" || s == "ii" || s == "2" || s == "case_ii") return Regime::case_ii;
  if (s == "III" || s == "iii" || s == "3" || s == "case_iii") return Regime::case_iii;
  throw ConfigError("unknown regime '" + s + "' (expected I, II or III)");
}

HomogeneousModel::HomogeneousModel(std::string name, double p, double T, int n, Cone cone,
                                   BoundaryCoefficients coeffs, Regime regime, RegimeParams regime_params)
    : name_(std::move(name)),
      p_(p),
      T_(T),
      n_(n),
      cone_(std::move(cone)),
      coeffs_(std::move(coeffs)),
      regime_(regime),
      regime_params_(std::move(regime_params)) {
  if (!(p_ > 1.0) || !std::isfinite(p_)) throw DomainError("model: degree p must be finite and > 1");
  if (!(T_ > 0.0) || !std::isfinite(T_)) throw DomainError("model: horizon T must be finite and > 0");
  if (n_ < 1) throw DomainError("model: Brownian dimension n must be >= 1");
  if (!coeffs_.b_plus || !coeffs_.b_minus || !coeffs_.sigma_plus || !coeffs_.sigma_minus || !coeffs_.f_plus ||
      !coeffs_.f_minus || !coeffs_.f_zero)
    throw DomainError("model: every boundary coefficient callback must be set");
  if (!std::isfinite(coeffs_.g_plus) || !std::isfinite(coeffs_.g_minus))
    throw DomainError("model: terminal costs must be finite");
}

HomogeneousModel HomogeneousModel::from_family(std::string name, Cone cone, PowerFamily family, double g_plus,
                                               double g_minus, Regime regime, RegimeParams regime_params) {
  if (cone.dim() != family.m()) throw DimensionMismatch("model: cone dimension differs from family control dimension");
  auto fam = std::make_shared<const PowerFamily>(std::move(family));
  BoundaryCoefficients c;
  c.b_plus = [fam](const Instant& at, const Vec& v) { return fam->drift(Branch::plus, fam->cell(at.cell_t), v); };
  c.b_minus = [fam](const Instant& at, const Vec& v) { return fam->drift(Branch::minus, fam->cell(at.cell_t), v); };
  c.sigma_plus = [fam](const Instant& at, const Vec& v) {
    return fam->volatility(Branch::plus, fam->cell(at.cell_t), v);
  };
  c.sigma_minus = [fam](const Instant& at, const Vec& v) {
    return fam->volatility(Branch::minus, fam->cell(at.cell_t), v);
  };
  c.f_plus = [fam](const Instant& at, const Vec& v) { return fam->running_cost(fam->cell(at.cell_t), v); };
  c.f_minus = c.f_plus;
  c.f_zero = [fam](const Instant& at, const Vec& v) { return fam->running_cost_at_origin(fam->cell(at.cell_t), v); };
  c.g_plus = g_plus;
  c.g_minus = g_minus;
  HomogeneousModel model(std::move(name), fam->p(), fam->horizon(), fam->n(), std::move(cone), std::move(c), regime,
                         std::move(regime_params));
  model.family_ = std::move(fam);
  return model;
}

double HomogeneousModel::drift(Branch side, const Instant& at, const Vec& v) const {
  return side == Branch::plus ? coeffs_.b_plus(at, v) : coeffs_.b_minus(at, v);
}

Vec HomogeneousModel::volatility(Branch side, const Instant& at, const Vec& v) const {
  Vec s = side == Branch::plus ? coeffs_.sigma_plus(at, v) : coeffs_.sigma_minus(at, v);
  if (s.size() != n_) throw DimensionMismatch("model: volatility callback returned wrong dimension");
  return s;
}

double HomogeneousModel::running_cost(Branch side, const Instant& at, const Vec& v) const {
  return side == Branch::plus ? coeffs_.f_plus(at, v) : coeffs_.f_minus(at, v);
}

double HomogeneousModel::running_cost_at_origin(const Instant& at, const Vec& v) const { return coeffs_.f_zero(at, v); }

double HomogeneousModel::terminal(Branch side, int state, int layers) const {
  if (scenario_terminal_) return scenario_terminal_(side, state, layers);
  return terminal(side);
}

HomogeneousModel HomogeneousModel::with_terminal(double g_plus, double g_minus) const {
  HomogeneousModel out = *this;
  out.coeffs_.g_plus = g_plus;
  out.coeffs_.g_minus = g_minus;
  return out;
}

HomogeneousModel HomogeneousModel::with_scenario_terminal(ScenarioTerminal fn) const {
  HomogeneousModel out = *this;
  out.scenario_terminal_ = std::move(fn);
  return out;
}

HomogeneousModel HomogeneousModel::with_regime(Regime regime, RegimeParams params) const {
  HomogeneousModel out = *this;
  out.regime_ = regime;
  out.regime_params_ = std::move(params);
  return out;
}

Vec extend(const HomogeneousModel& model, Coefficient which, double t, double x, const Vec& u) {
  if (!(t >= 0.0 && t <= model.horizon())) throw DomainError("extend: t outside [0, T]");
  if (u.size() != model.m()) throw DimensionMismatch("extend: control dimension mismatch");
  if (!model.cone().contains(u, membership_tolerance(u))) throw ConstraintViolation("extend: control outside the cone");

  const Instant at = Instant::at(t);
  if (x == 0.0) {
    switch (which) {
      case Coefficient::drift: return Vec::Zero(1);
      case Coefficient::volatility: return Vec::Zero(model.n());
      case Coefficient::cost: return Vec::Constant(1, model.running_cost_at_origin(at, u));
    }
  }
  const Branch side = x > 0.0 ? Branch::plus : Branch::minus;
  const double ax = std::abs(x);
  const Vec v = u / ax;
  switch (which) {
    case Coefficient::drift: return Vec::Constant(1, ax * model.drift(side, at, v));
    case Coefficient::volatility: return ax * model.volatility(side, at, v);
    case Coefficient::cost: return Vec::Constant(1, std::pow(ax, model.p()) * model.running_cost(side, at, v));
  }
  return {};
}

FullCoefficients full_coefficients(const HomogeneousModel& model) {
  FullCoefficients out;
  const double p = model.p();
  const double gp = model.terminal(Branch::plus), gm = model.terminal(Branch::minus);
  out.terminal = [p, gp, gm](double x) {
    return x > 0 ? gp * std::pow(x, p) : (x < 0 ? gm * std::pow(-x, p) : 0.0);
  };
  if (model.family() != nullptr) {
    // Hold the model so the family outlives the callbacks.
    auto keep = std::make_shared<HomogeneousModel>(model);
    out.drift = [keep](double t, double x, const Vec& u) { return keep->family()->drift_full(t, x, u); };
    out.volatility = [keep](double t, double x, const Vec& u) { return keep->family()->volatility_full(t, x, u); };
    out.cost = [keep](double t, double x, const Vec& u) { return keep->family()->cost_full(t, x, u); };
    return out;
  }
  auto keep = std::make_shared<HomogeneousModel>(model);
  out.drift = [keep](double t, double x, const Vec& u) { return extend(*keep, Coefficient::drift, t, x, u)(0); };
  out.volatility = [keep](double t, double x, const Vec& u) {
    return extend(*keep, Coefficient::volatility, t, x, u);
  };
  out.cost = [keep](double t, double x, const Vec& u) { return extend(*keep, Coefficient::cost, t, x, u)(0); };
  return out;
}

bool HomogeneityReport::all_passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

namespace {

/// Relative error, with values far below the argument scale (|lx| + |lu|)^q
/// compared against that scale so that cancellation near zero is not flagged.
double relative_gap(const Vec& lhs, const Vec& rhs, double scale) {
  const double diff = (lhs - rhs).norm();
  if (diff == 0.0) return 0.0;
  return diff / std::max({lhs.norm(), rhs.norm(), 1e-6 * scale, 1e-300});
}

}  // namespace

HomogeneityReport check_homogeneity(const FullCoefficients& coeffs, const Cone& cone, double p, double T,
                                    int sample_count, std::uint64_t seed, double tol) {
  if (sample_count < 1) throw DomainError("check_homogeneity: sample_count must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;

  HomogeneityEntry eb{"drift", 1.0}, es{"volatility", 1.0}, ef{"cost", p}, eg{"terminal", p};
  auto record = [&](HomogeneityEntry& e, const Vec& lhs, const Vec& rhs, double lambda, double scale) {
    ++e.samples;
    const double err = relative_gap(lhs, rhs, std::pow(scale, e.degree));
    if (err > e.worst_relative_error) {
      e.worst_relative_error = err;
      e.worst_lambda = lambda;
    }
    if (!(err <= tol)) e.passed = false;
  };

  const double fixed_lambdas[] = {2.0, 0.5, 4.0, 0.25, 1.5};
  for (int s = 0; s < sample_count; ++s) {
    const double lambda = s < 5 ? fixed_lambdas[s] : std::exp(normal(rng));
    const double t = T * unit(rng);
    double x = 2.0 * normal(rng);
    if (s % 8 == 7) x = 0.0;
    const Vec u = cone.sample(rng, std::exp(normal(rng)));

    const Vec lu = lambda * u;
    const double lx = lambda * x;
    const double scale = std::abs(lx) + lu.norm();
    if (coeffs.drift)
      record(eb, Vec::Constant(1, coeffs.drift(t, lx, lu)), Vec::Constant(1, lambda * coeffs.drift(t, x, u)), lambda,
             scale);
    if (coeffs.volatility)
      record(es, coeffs.volatility(t, lx, lu), lambda * coeffs.volatility(t, x, u), lambda, scale);
    if (coeffs.cost)
      record(ef, Vec::Constant(1, coeffs.cost(t, lx, lu)),
             Vec::Constant(1, std::pow(lambda, p) * coeffs.cost(t, x, u)), lambda, scale);
    if (coeffs.terminal)
      record(eg, Vec::Constant(1, coeffs.terminal(lx)), Vec::Constant(1, std::pow(lambda, p) * coeffs.terminal(x)),
             lambda, std::abs(lx));
  }

  HomogeneityReport report;
  for (auto* e : {&eb, &es, &ef, &eg})
    if (e->samples > 0) report.entries.push_back(*e);
  return report;
}

HomogeneityReport check_homogeneity(const HomogeneousModel& model, int sample_count, std::uint64_t seed,
                                    double tol) {
  return check_homogeneity(full_coefficients(model), model.cone(), model.p(), model.horizon(), sample_count, seed,
                           tol);
}

std::vector<RegimeSample> default_regime_samples(const HomogeneousModel& model, int random_count,
                                                 std::uint64_t seed) {
  const double T = model.horizon();
  std::vector<double> times{0.0, T};
  const int cells = model.family() ? static_cast<int>(model.family()->cells().size()) : 4;
  for (int k = 0; k < cells; ++k) times.push_back((k + 0.5) * T / cells);

  std::vector<Vec> controls{Vec::Zero(model.m())};
  for (const Vec& d : model.cone().spanning_directions())
    for (double s : {0.1, 1.0, 10.0, 100.0}) controls.push_back(s * d.normalized());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (int i = 0; i < random_count; ++i) controls.push_back(model.cone().sample(rng, std::exp(1.5 * normal(rng))));

  std::vector<RegimeSample> out;
  for (double t : times)
    for (const Vec& v : controls) out.push_back({Instant::at(t), v});
  return out;
}

RegimeDiagnostics check_regime(const HomogeneousModel& model, const std::vector<RegimeSample>& samples) {
  RegimeDiagnostics d;
  const auto& rp = model.regime_params();
  constexpr std::size_t kMaxMessages = 12;
  auto fail = [&](const std::string& msg, double excess) {
    d.passed = false;
    ++d.violation_count;
    d.worst_excess = std::max(d.worst_excess, excess);
    if (d.messages.size() < kMaxMessages) d.messages.push_back(msg);
  };
  auto fmt = [](double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
  };

  // Structural conditions first.
  if (!(model.p() > 1.0)) fail("degree p = " + fmt(model.p()) + " must exceed 1", 1.0 - model.p());
  for (Branch side : {Branch::plus, Branch::minus}) {
    const double g = model.terminal(side);
    if (g < 0.0) fail(std::string("terminal cost g(") + (side == Branch::plus ? "+1" : "-1") + ") is negative", -g);
  }
  switch (model.regime()) {
    case Regime::case_i:
      if (!(rp.delta > 0.0) || !(rp.L > 0.0)) fail("case I requires delta > 0 and L > 0", 0.0);
      break;
    case Regime::case_ii:
      if (!(rp.L >= 0.0)) fail("case II requires L >= 0", -rp.L);
      if (rp.eps_table.empty()) fail("case II requires a non-empty (epsilon, L_epsilon) table", 0.0);
      break;
    case Regime::case_iii:
      if (!(rp.delta > 0.0) || !(rp.L > 0.0)) fail("case III requires delta > 0 and L > 0", 0.0);
      if (!(rp.eta > 0.0)) fail("case III requires eta > 0", -rp.eta);
      if (!(model.p() > 1.0 + 2.0 * rp.delta))
        fail("case III requires p > 1 + 2 delta (p = " + fmt(model.p()) + ", delta = " + fmt(rp.delta) + ")",
             1.0 + 2.0 * rp.delta - model.p());
      for (Branch side : {Branch::plus, Branch::minus}) {
        const double g = model.terminal(side);
        if (!(g >= rp.eta))
          fail(std::string("eta-positivity violated: g(") + (side == Branch::plus ? "+1" : "-1") + ") = " + fmt(g) +
                   " < eta = " + fmt(rp.eta),
               rp.eta - g);
      }
      break;
  }

  const double slack = 1e-10;
  for (const auto& s : samples) {
    ++d.points_checked;
    const std::string where = " at t=" + fmt(s.at.t) + ", |v|=" + fmt(s.v.norm());
    const double f0 = model.running_cost_at_origin(s.at, s.v);
    if (!(f0 >= 0.0)) fail("f(0,v) negative" + where, -f0);
    for (Branch side : {Branch::plus, Branch::minus}) {
      const std::string tag = side == Branch::plus ? "(+1,v)" : "(-1,v)";
      const double b = model.drift(side, s.at, s.v);
      const double sig = model.volatility(side, s.at, s.v).norm();
      const double f = model.running_cost(side, s.at, s.v);
      if (!(f >= 0.0)) fail("f" + tag + " negative" + where, -f);
      switch (model.regime()) {
        case Regime::case_i: {
          const double lhs = std::max(b * b, sig * sig);
          const double rhs = rp.delta * f + rp.L;
          if (lhs > rhs + slack * (1.0 + std::abs(rhs)))
            fail("max{|b|^2,|sigma|^2}" + tag + " = " + fmt(lhs) + " > delta f + L = " + fmt(rhs) + where, lhs - rhs);
          else
            d.worst_excess = std::max(d.worst_excess, lhs - rhs);
          break;
        }
        case Regime::case_ii: {
          if (sig > rp.L + slack * (1.0 + rp.L))
            fail("|sigma" + tag + "| = " + fmt(sig) + " > L = " + fmt(rp.L) + where, sig - rp.L);
          else
            d.worst_excess = std::max(d.worst_excess, sig - rp.L);
          for (const auto& [eps, Leps] : rp.eps_table) {
            const double rhs = eps * f + Leps;
            if (std::abs(b) > rhs + slack * (1.0 + std::abs(rhs)))
              fail("|b" + tag + "| = " + fmt(std::abs(b)) + " > " + fmt(eps) + " f + " + fmt(Leps) + where,
                   std::abs(b) - rhs);
            else
              d.worst_excess = std::max(d.worst_excess, std::abs(b) - rhs);
          }
          break;
        }
        case Regime::case_iii: {
          const double rhs = rp.delta * sig * sig + rp.L;
          if (std::abs(b) > rhs + slack * (1.0 + std::abs(rhs)))
            fail("|b" + tag + "| = " + fmt(std::abs(b)) + " > delta |sigma|^2 + L = " + fmt(rhs) + where,
                 std::abs(b) - rhs);
          else
            d.worst_excess = std::max(d.worst_excess, std::abs(b) - rhs);
          break;
        }
      }
    }
  }
  return d;
}

}  // namespace hsc
