#pragma once

#include "hsc/cone.hpp"
#include "hsc/power_family.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hsc {

/// A homogeneous coefficient is determined by its restrictions to x = +1,
/// x = -1 and x = 0; these callbacks are those restrictions.
struct BoundaryCoefficients {
  using Scalar = std::function<double(const Instant&, const Vec&)>;
  using Vector = std::function<Vec(const Instant&, const Vec&)>;

  Scalar b_plus, b_minus;          // drift at x = +1 / -1, per unit time
  Vector sigma_plus, sigma_minus;  // volatility at x = +1 / -1, per sqrt(time)
  Scalar f_plus, f_minus;          // running cost at x = +1 / -1
  Scalar f_zero;                   // running cost at x = 0
  double g_plus = 0.0;             // terminal cost at x = +1
  double g_minus = 0.0;            // terminal cost at x = -1
};

enum class Regime { case_i, case_ii, case_iii };

const char* to_string(Regime r);
Regime regime_from_string(const std::string& s);

struct RegimeParams {
  double delta = 0.0;
  double L = 0.0;
  double eta = 0.0;
  /// (epsilon, L_epsilon) pairs for the drift bound of case II.
  std::vector<std::pair<double, double>> eps_table;
};

/// Terminal value per tree leaf; overrides g_plus/g_minus in tree mode.
using ScenarioTerminal = std::function<double(Branch, int state, int layers)>;

/// Scalar-state control system whose drift/volatility are 1-homogeneous and
/// whose costs are p-homogeneous in (x, u), with controls in a closed cone.
/// Immutable after construction.
class HomogeneousModel {
 public:
  HomogeneousModel(std::string name, double p, double T, int n, Cone cone, BoundaryCoefficients coeffs,
                   Regime regime, RegimeParams regime_params);

  /// Model backed by the parametric family; enables closed-form fast paths.
  static HomogeneousModel from_family(std::string name, Cone cone, PowerFamily family, double g_plus,
                                      double g_minus, Regime regime, RegimeParams regime_params);

  const std::string& name() const { return name_; }
  double p() const { return p_; }
  double horizon() const { return T_; }
  int m() const { return cone_.dim(); }
  int n() const { return n_; }
  const Cone& cone() const { return cone_; }
  const BoundaryCoefficients& coefficients() const { return coeffs_; }
  Regime regime() const { return regime_; }
  const RegimeParams& regime_params() const { return regime_params_; }
  const PowerFamily* family() const { return family_.get(); }

  double drift(Branch side, const Instant& at, const Vec& v) const;
  Vec volatility(Branch side, const Instant& at, const Vec& v) const;
  double running_cost(Branch side, const Instant& at, const Vec& v) const;
  double running_cost_at_origin(const Instant& at, const Vec& v) const;
  double terminal(Branch side) const { return side == Branch::plus ? coeffs_.g_plus : coeffs_.g_minus; }
  /// Terminal value at tree leaf `state` of a tree with `layers` steps.
  double terminal(Branch side, int state, int layers) const;
  bool has_scenario_terminal() const { return static_cast<bool>(scenario_terminal_); }

  /// Index of the piecewise-constant data cell (0 for callback models).
  int cell_index(double cell_t) const { return family_ ? family_->cell_index(cell_t) : 0; }

  HomogeneousModel with_terminal(double g_plus, double g_minus) const;
  HomogeneousModel with_scenario_terminal(ScenarioTerminal fn) const;
  HomogeneousModel with_regime(Regime regime, RegimeParams params) const;

 private:
  std::string name_;
  double p_;
  double T_;
  int n_;
  Cone cone_;
  BoundaryCoefficients coeffs_;
  Regime regime_;
  RegimeParams regime_params_;
  std::shared_ptr<const PowerFamily> family_;
  ScenarioTerminal scenario_terminal_;
};

/// Membership tolerance used for control values throughout the library.
inline double membership_tolerance(const Vec& v) { return 1e-9 * (1.0 + v.norm()); }

enum class Coefficient { drift, volatility, cost };

/// Full coefficient phi(t, x, u) rebuilt from the boundary restrictions:
/// |x|^q phi(sign x, u/|x|) for x != 0 (q = 1 for drift/volatility, q = p for
/// cost); at x = 0 the drift and volatility are 0 and the cost is f(0, u).
/// Scalar coefficients are returned as 1-vectors.
Vec extend(const HomogeneousModel& model, Coefficient which, double t, double x, const Vec& u);

/// Full-form coefficient callbacks in (t, x, u), e.g. user-supplied formulas.
struct FullCoefficients {
  std::function<double(double, double, const Vec&)> drift;
  std::function<Vec(double, double, const Vec&)> volatility;
  std::function<double(double, double, const Vec&)> cost;
  std::function<double(double)> terminal;  // optional
};

/// Full coefficients of a model: the family's direct formulas when present,
/// otherwise `extend`.
FullCoefficients full_coefficients(const HomogeneousModel& model);

struct HomogeneityEntry {
  std::string coefficient;
  double degree = 0.0;
  bool passed = true;
  double worst_relative_error = 0.0;
  double worst_lambda = 1.0;
  int samples = 0;
};

struct HomogeneityReport {
  std::vector<HomogeneityEntry> entries;
  bool all_passed() const;
};

/// Samples (t, x, u in cone, lambda > 0) and checks phi(lx, lu) = l^q phi(x, u)
/// to relative tolerance `tol` (values below 1e-6 (|lx| + |lu|)^q are compared against
/// that scale instead). The first lambda drawn is always 2.
HomogeneityReport check_homogeneity(const FullCoefficients& coeffs, const Cone& cone, double p, double T,
                                    int sample_count, std::uint64_t seed, double tol = 1e-10);
HomogeneityReport check_homogeneity(const HomogeneousModel& model, int sample_count, std::uint64_t seed,
                                    double tol = 1e-10);

struct RegimeSample {
  Instant at;
  Vec v;
};

struct RegimeDiagnostics {
  bool passed = true;
  int points_checked = 0;
  int violation_count = 0;
  /// Largest (lhs - rhs) over all sampled inequalities; <= 0 when all hold.
  double worst_excess = -std::numeric_limits<double>::infinity();
  std::vector<std::string> messages;  // first few violations, structural ones first
};

/// Sample grid: cell midpoints and endpoints in time; the origin, scaled
/// spanning directions and random cone samples in control.
std::vector<RegimeSample> default_regime_samples(const HomogeneousModel& model, int random_count = 32,
                                                 std::uint64_t seed = 7);

/// Evaluates the declared regime's inequalities at every sample with the
/// declared constants. A sampled necessary check, not a proof.
RegimeDiagnostics check_regime(const HomogeneousModel& model, const std::vector<RegimeSample>& samples);

}  // namespace hsc
