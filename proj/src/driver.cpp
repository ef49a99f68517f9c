#include "hsc/driver.hpp"

#include <cmath>

namespace hsc {

namespace {

void check_point(const HomogeneousModel& model, const DriverPoint& point) {
  if (point.Lambda.size() != model.n()) throw DimensionMismatch("driver: Lambda dimension differs from n");
  if (!std::isfinite(point.P) || !point.Lambda.allFinite()) throw DomainError("driver: P and Lambda must be finite");
}

}  // namespace

double driver_value_unchecked(const HomogeneousModel& model, Branch branch, const Vec& v, const DriverPoint& point) {
  const double p = model.p();
  const double f = model.running_cost(branch, point.at, v);
  const double b = model.drift(branch, point.at, v);
  const Vec s = model.volatility(branch, point.at, v);
  const double sign = branch_sign(branch);
  return f + 0.5 * p * (p - 1.0) * point.P * s.squaredNorm() + sign * p * (point.P * b + point.Lambda.dot(s));
}

double driver_value(const HomogeneousModel& model, Branch branch, const Vec& v, const DriverPoint& point) {
  if (v.size() != model.m()) throw DimensionMismatch("driver: control dimension mismatch");
  if (!model.cone().contains(v, membership_tolerance(v))) throw ConstraintViolation("driver: control outside the cone");
  check_point(model, point);
  return driver_value_unchecked(model, branch, v, point);
}

ClosedFormMinimum unconstrained_infimum(const UnconstrainedParams& params, double p, double P, const Vec& Lambda) {
  if (!(p > 1.0)) throw DomainError("closed form: p must exceed 1");
  const Eigen::Index m = params.B.size();
  if (params.R.cols() != m) throw DimensionMismatch("closed form: R must have m columns");
  if (params.C.size() != Lambda.size()) throw DimensionMismatch("closed form: C and Lambda dimensions differ");

  const Mat M = params.R.transpose() * params.R;
  Eigen::LDLT<Mat> ldlt(M);
  const Vec d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || d.minCoeff() <= 1e-14 * std::max(1.0, d.maxCoeff()))
    throw DomainError("closed form: R'R is singular");

  ClosedFormMinimum out;
  out.value = std::pow(std::abs(params.Q), p) + 0.5 * p * (p - 1.0) * P * params.C.squaredNorm() + p * P * params.A +
              p * Lambda.dot(params.C);
  out.argmin = Vec::Zero(m);

  const bool active = P != 0.0 && !params.B.isZero(0.0);
  if (active) {
    const Vec MinvB = ldlt.solve(params.B);
    const double k = params.B.dot(MinvB);
    out.value += (1.0 - p) * std::pow(k, p / (2.0 * (p - 1.0))) * std::pow(std::abs(P), p / (p - 1.0));
    // At p = 2 both correction exponents vanish; use exact ones.
    const double p_factor = p == 2.0 ? 1.0 : std::pow(std::abs(P), -(p - 2.0) / (p - 1.0));
    const double k_factor = p == 2.0 ? 1.0 : std::pow(k, -(p - 2.0) / (2.0 * (p - 1.0)));
    out.argmin = -P * p_factor * k_factor * MinvB;
  }
  return out;
}

UnconstrainedParams unconstrained_params(const HomogeneousModel& model, Branch branch, const Instant& at) {
  const PowerFamily* fam = model.family();
  if (fam == nullptr) throw DomainError("closed form: model is not a parametric family");
  if (!model.cone().is_full_space()) throw DomainError("closed form: requires an unconstrained control set");
  const int idx = fam->cell_index(at.cell_t);
  if (!fam->unconstrained_closed_form_applies(idx))
    throw DomainError("closed form: cell is not of unconstrained power-LQ shape");
  const PowerCell& c = fam->cells()[static_cast<std::size_t>(idx)];
  UnconstrainedParams out;
  out.Q = c.q;
  out.R = c.r;
  if (branch == Branch::plus) {
    out.A = c.a_pos;
    out.B = c.b_pos;
    out.C = c.c_pos;
  } else {
    // -p P b(-1,v) - p Lambda' s(-1,v) with b(-1,v) = -a_neg + b'v and s(-1,v) = -c_neg.
    out.A = c.a_neg;
    out.B = -c.b_pos;
    out.C = c.c_neg;
  }
  return out;
}

ClosedFormMinimum unconstrained_infimum(const HomogeneousModel& model, Branch branch, const DriverPoint& point) {
  check_point(model, point);
  return unconstrained_infimum(unconstrained_params(model, branch, point.at), model.p(), point.P, point.Lambda);
}

DriverMinimum driver_infimum(const HomogeneousModel& model, Branch branch, const DriverPoint& point,
                             const DriverOptions& options, std::span<const Vec> warm_starts) {
  check_point(model, point);
  DriverMinimum out;
  if (options.allow_closed_form && model.cone().is_full_space() && model.family() != nullptr &&
      model.family()->unconstrained_closed_form_applies(model.family()->cell_index(point.at.cell_t))) {
    const auto cf = unconstrained_infimum(model, branch, point);
    out.value = cf.value;
    out.argmin = cf.argmin;
    out.closed_form = true;
    return out;
  }

  const auto objective = [&](const Vec& v) { return driver_value_unchecked(model, branch, v, point); };
  const auto r = minimize(model.cone(), objective, options.minimizer, warm_starts);
  out.value = r.value;
  out.argmin = r.argmin;
  out.status = r.status;
  return out;
}

MinimizerBound check_minimizer_bounds(const HomogeneousModel& model, Branch branch, const DriverPoint& point,
                                      const Vec& argmin) {
  MinimizerBound out;
  out.regime = model.regime();
  const double b = std::abs(model.drift(branch, point.at, argmin));
  const double s = model.volatility(branch, point.at, argmin).norm();
  switch (model.regime()) {
    case Regime::case_i: out.measure = std::max(b, s); break;
    case Regime::case_ii: out.measure = model.running_cost(branch, point.at, argmin); break;
    case Regime::case_iii: out.measure = s; break;
  }
  out.c = out.measure / (1.0 + point.Lambda.norm());
  return out;
}

}  // namespace hsc
