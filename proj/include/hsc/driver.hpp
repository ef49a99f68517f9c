#pragma once

#include "hsc/minimize.hpp"
#include "hsc/model.hpp"

#include <span>

namespace hsc {

/// Arguments of the driver besides the control: time, P and Lambda.
struct DriverPoint {
  Instant at;
  double P = 0.0;
  Vec Lambda;  // n
};

/// Driver value at control v:
///   plus:  f(1,v) + p(p-1)/2 P |s(1,v)|^2 + p P b(1,v) + p Lambda' s(1,v)
///   minus: f(-1,v) + p(p-1)/2 P |s(-1,v)|^2 - p P b(-1,v) - p Lambda' s(-1,v)
/// Throws ConstraintViolation when v is outside the cone.
double driver_value(const HomogeneousModel& model, Branch branch, const Vec& v, const DriverPoint& point);

/// Same as driver_value without the membership check (minimizer stencils).
double driver_value_unchecked(const HomogeneousModel& model, Branch branch, const Vec& v, const DriverPoint& point);

struct DriverOptions {
  MinimizerConfig minimizer;
  /// Use the closed-form infimum when the model qualifies.
  bool allow_closed_form = true;
};

struct DriverMinimum {
  double value = 0.0;
  Vec argmin;
  MinimizeStatus status = MinimizeStatus::converged;
  bool closed_form = false;
};

/// Infimum of the driver over the cone with its argmin. A divergent status
/// (infimum = -infinity) is returned, not thrown; solvers turn it into IllPosed.
DriverMinimum driver_infimum(const HomogeneousModel& model, Branch branch, const DriverPoint& point,
                             const DriverOptions& options = {}, std::span<const Vec> warm_starts = {});

/// Unconstrained power-LQ data: b = A x + B'u, sigma = C x, f = |Q x|^p + |R u|^p.
struct UnconstrainedParams {
  double A = 0.0;
  Vec B;  // m
  Vec C;  // n
  double Q = 0.0;
  Mat R;  // rows x m, R'R invertible
};

struct ClosedFormMinimum {
  double value = 0.0;
  Vec argmin;
};

/// Closed-form infimum over R^m of the x = +1 driver for UnconstrainedParams:
///   (1-p) (B'(R'R)^-1 B)^(p/(2(p-1))) |P|^(p/(p-1)) + |Q|^p
///     + p(p-1)/2 P |C|^2 + p P A + p Lambda'C
/// with argmin -P|P|^(-(p-2)/(p-1)) (B'(R'R)^-1 B)^(-(p-2)/(2(p-1))) (R'R)^-1 B,
/// set to 0 when P B = 0. Throws DomainError when R'R is singular.
ClosedFormMinimum unconstrained_infimum(const UnconstrainedParams& params, double p, double P, const Vec& Lambda);

/// Parameters of the closed form for one branch of a family model at `at`.
/// Throws DomainError when the cone is not the full space or the cell does not
/// have the unconstrained power-LQ shape.
UnconstrainedParams unconstrained_params(const HomogeneousModel& model, Branch branch, const Instant& at);

/// Closed form for a model; throws DomainError when it does not apply.
ClosedFormMinimum unconstrained_infimum(const HomogeneousModel& model, Branch branch, const DriverPoint& point);

/// A-priori size of the minimizer, normalised by 1 + |Lambda|:
///   case I:   max(|b|, |sigma|) at (+-1, argmin)
///   case II:  f at (+-1, argmin)
///   case III: |sigma| at (+-1, argmin)
/// `c` is the smallest constant for which bound <= c (1 + |Lambda|) holds.
struct MinimizerBound {
  Regime regime = Regime::case_i;
  double measure = 0.0;
  double c = 0.0;
};

MinimizerBound check_minimizer_bounds(const HomogeneousModel& model, Branch branch, const DriverPoint& point,
                                      const Vec& argmin);

}  // namespace hsc
