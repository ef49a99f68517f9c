#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hsc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Which BSDE / half-line of the state space: x = +1 (P1) or x = -1 (P2).
enum class Branch { plus, minus };

inline const char* to_string(Branch b) { return b == Branch::plus ? "plus" : "minus"; }
inline double branch_sign(Branch b) { return b == Branch::plus ? 1.0 : -1.0; }

/// Where a coefficient is evaluated.
///
/// `t` is the physical time. `cell_t` selects the piecewise-constant data cell
/// (solvers pin it to the interior of the current step so that stage
/// evaluations at step endpoints do not straddle a cell boundary). On the
/// binomial tree, `layer` is the time index and `state` the number of up
/// moves; in deterministic mode `state` is always 0.
struct Instant {
  double t = 0.0;
  double cell_t = 0.0;
  int layer = 0;
  int state = 0;

  static Instant at(double t) { return Instant{t, t, 0, 0}; }
};

// Error hierarchy. Everything thrown by the library derives from hsc::Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct ConstraintViolation : Error {
  using Error::Error;
};
/// The driver infimum is -infinity somewhere along the solve.
struct IllPosed : Error {
  IllPosed(const std::string& what, double t, double P) : Error(what), t(t), P(P) {}
  double t;
  double P;
};
/// Tree fixed point failed to contract, or the solution blew up.
struct SchemeDivergence : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace hsc
