#pragma once

#include "hsc/types.hpp"

#include <vector>

namespace hsc {

/// Coefficients of one time cell of the built-in parametric family:
///
///   b(x,u)     = a_pos x+ - a_neg x- + b_pos' u+ - b_neg' u-
///   sigma(x,u) = c_pos x+ - c_neg x- + d_pos u+ - d_neg u-        (n-vector)
///   f(x,u)     = |q x|^p + |R u|^p + |q_mix x|^(p/3) |R_mix u|^(2p/3)
///
/// With equal pos/neg parts and p = 2 this is the homogeneous LQ problem.
struct PowerCell {
  double a_pos = 0.0;
  double a_neg = 0.0;
  Vec b_pos;  // m
  Vec b_neg;  // m
  Vec c_pos;  // n
  Vec c_neg;  // n
  Mat d_pos;  // n x m
  Mat d_neg;  // n x m
  double q = 0.0;
  Mat r;      // rows x m
  double q_mix = 0.0;
  Mat r_mix;  // rows x m

  /// Zero-initialised cell of the right shape.
  static PowerCell zeros(int m, int n);
};

/// Piecewise-constant-in-time parametric family on a uniform partition of [0, T].
class PowerFamily {
 public:
  PowerFamily(double p, double T, int m, int n, std::vector<PowerCell> cells);

  double p() const { return p_; }
  double horizon() const { return T_; }
  int m() const { return m_; }
  int n() const { return n_; }
  const std::vector<PowerCell>& cells() const { return cells_; }
  int cell_index(double cell_t) const;
  const PowerCell& cell(double cell_t) const { return cells_[static_cast<std::size_t>(cell_index(cell_t))]; }

  // Restrictions to x = +1 (Branch::plus) and x = -1 (Branch::minus).
  double drift(Branch side, const PowerCell& c, const Vec& v) const;
  Vec volatility(Branch side, const PowerCell& c, const Vec& v) const;
  double running_cost(const PowerCell& c, const Vec& v) const;  // same at x = +1 and x = -1
  double running_cost_at_origin(const PowerCell& c, const Vec& v) const;

  // Full-form evaluation, used for independent homogeneity checks.
  double drift_full(double t, double x, const Vec& u) const;
  Vec volatility_full(double t, double x, const Vec& u) const;
  double cost_full(double t, double x, const Vec& u) const;

  /// Drift linear in u, volatility control-free, no mixed term, R'R invertible.
  bool unconstrained_closed_form_applies(int cell) const {
    return closed_form_[static_cast<std::size_t>(cell)];
  }

 private:
  double p_, T_;
  int m_, n_;
  std::vector<PowerCell> cells_;
  std::vector<bool> closed_form_;
};

}  // namespace hsc
