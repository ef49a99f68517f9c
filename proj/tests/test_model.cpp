#include "hsc/model.hpp"

#include "support/battery.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace hsc {
namespace {

using testing::scalar_cell;

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

HomogeneousModel quadratic_cost_model() {
  // f(x,u) = |x|^2 + |u|^2, b = x + u, sigma = 0.5 x.
  return HomogeneousModel::from_family("quadratic", Cone::full_space(1),
                                       PowerFamily(2.0, 1.0, 1, 1, {scalar_cell(1.0, 1.0, 0.5, 1.0, 1.0)}), 1.0, 1.0,
                                       Regime::case_i, {2.0, 2.0, 0.0, {}});
}

double scalar(const Vec& v) { return v(0); }

TEST(Extend, CostVanishesAtTheOrigin) {
  const auto model = quadratic_cost_model();
  EXPECT_EQ(scalar(extend(model, Coefficient::cost, 0.3, 0.0, vec({0.0}))), 0.0);
}

TEST(Extend, DriftIsOneHomogeneous) {
  const auto model = quadratic_cost_model();
  const Vec v0 = vec({0.7});
  EXPECT_DOUBLE_EQ(scalar(extend(model, Coefficient::drift, 0.5, 2.0, 2.0 * v0)),
                   2.0 * model.drift(Branch::plus, Instant::at(0.5), v0));
}

TEST(Extend, PowerCostAtNegativeState) {
  // |x|^2 + |u|^2 at x = -3, u = 4.
  EXPECT_NEAR(scalar(extend(quadratic_cost_model(), Coefficient::cost, 0.0, -3.0, vec({4.0}))), 25.0, 1e-12);
}

TEST(Extend, OriginValues) {
  const auto model = testing::load_fixture_model("mixed_power");
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const Vec u = model.cone().sample(rng, 2.0);
    EXPECT_EQ(extend(model, Coefficient::drift, 0.1, 0.0, u).norm(), 0.0);
    EXPECT_EQ(extend(model, Coefficient::volatility, 0.1, 0.0, u).norm(), 0.0);
    const double f0 = scalar(extend(model, Coefficient::cost, 0.1, 0.0, u));
    EXPECT_EQ(f0, model.running_cost_at_origin(Instant::at(0.1), u));
    EXPECT_GE(f0, 0.0);
  }
}

TEST(Extend, ExactHomogeneityOnDyadicScalings) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  for (const char* name : {"lq_vector", "orthant_vol", "generated_asym", "mixed_power", "case3_orthant"}) {
    const auto model = testing::load_fixture_model(name);
    for (int i = 0; i < 50; ++i) {
      const double x = nd(rng);
      const Vec u = model.cone().sample(rng);
      const double t = 0.9 * model.horizon();
      for (double lambda : {0.25, 0.5, 2.0, 8.0}) {
        const struct {
          Coefficient which;
          double q;
        } cases[] = {{Coefficient::drift, 1.0}, {Coefficient::volatility, 1.0}, {Coefficient::cost, model.p()}};
        for (const auto& c : cases) {
          const Vec lhs = extend(model, c.which, t, lambda * x, lambda * u);
          const Vec rhs = std::pow(lambda, c.q) * extend(model, c.which, t, x, u);
          EXPECT_LE((lhs - rhs).norm(), 1e-12 * (1.0 + rhs.norm())) << name;
        }
      }
    }
  }
}

TEST(Extend, AgreesWithTheFamilyFullForm) {
  const auto model = testing::load_fixture_model("case3_orthant");
  const PowerFamily& fam = *model.family();
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int i = 0; i < 100; ++i) {
    const double x = 2 * nd(rng), t = 0.5;
    const Vec u = model.cone().sample(rng);
    EXPECT_NEAR(scalar(extend(model, Coefficient::drift, t, x, u)), fam.drift_full(t, x, u), 1e-12 * (1 + std::abs(x)));
    EXPECT_LE((extend(model, Coefficient::volatility, t, x, u) - fam.volatility_full(t, x, u)).norm(),
              1e-12 * (1 + std::abs(x)));
    const double f = fam.cost_full(t, x, u);
    EXPECT_NEAR(scalar(extend(model, Coefficient::cost, t, x, u)), f, 1e-12 * (1 + f));
  }
}

TEST(Extend, RejectsOutOfConeControlAndTimeOutsideHorizon) {
  const auto model = testing::load_fixture_model("orthant_vol");
  EXPECT_THROW(extend(model, Coefficient::drift, 0.5, 1.0, vec({-1.0, 0.0})), ConstraintViolation);
  EXPECT_THROW(extend(model, Coefficient::drift, -0.1, 1.0, vec({1.0, 0.0})), DomainError);
  EXPECT_THROW(extend(model, Coefficient::drift, model.horizon() + 1e-9, 1.0, vec({1.0, 0.0})), DomainError);
}

FullCoefficients lq_full() {
  FullCoefficients c;
  c.drift = [](double, double x, const Vec& u) { return 0.3 * x + 2.0 * u(0) - u(1); };
  c.volatility = [](double, double x, const Vec& u) { return vec({0.2 * x, 0.5 * u(0)}); };
  c.cost = [](double, double x, const Vec& u) { return x * x + u.squaredNorm(); };
  c.terminal = [](double x) { return 3.0 * x * x; };
  return c;
}

TEST(Homogeneity, LinearQuadraticCoefficientsPass) {
  const auto report = check_homogeneity(lq_full(), Cone::full_space(2), 2.0, 1.0, 256, 7);
  EXPECT_TRUE(report.all_passed());
  EXPECT_EQ(report.entries.size(), 4u);
}

TEST(Homogeneity, ConstantOffsetFailsAtLambdaTwo) {
  FullCoefficients c = lq_full();
  c.cost = [](double, double x, const Vec&) { return x * x + 1.0; };
  const auto report = check_homogeneity(c, Cone::full_space(2), 2.0, 1.0, 1, 7);
  EXPECT_FALSE(report.all_passed());
  for (const auto& e : report.entries) {
    if (e.coefficient != "cost") continue;
    EXPECT_FALSE(e.passed);
    EXPECT_EQ(e.worst_lambda, 2.0);
  }
}

TEST(Homogeneity, RadialPowerCostPasses) {
  for (double p : {1.5, 2.0, 3.0}) {
    FullCoefficients c = lq_full();
    c.cost = [p](double, double x, const Vec& u) { return std::pow(x * x + u.squaredNorm(), p / 2); };
    c.terminal = nullptr;
    EXPECT_TRUE(check_homogeneity(c, Cone::orthant(2), p, 1.0, 256, 3).all_passed()) << p;
  }
}

TEST(Homogeneity, EveryBatteryModelPasses) {
  for (const auto& entry : testing::regression_battery()) {
    const auto report = check_homogeneity(entry.model, 256, 11);
    for (const auto& e : report.entries)
      EXPECT_TRUE(e.passed) << entry.name << ' ' << e.coefficient << " worst " << e.worst_relative_error
                            << " at lambda " << e.worst_lambda;
  }
}

// Worked example families, with constants derived by hand from their
// coefficient bounds.

HomogeneousModel piecewise_linear_power(double p, Regime regime, RegimeParams rp) {
  PowerCell c = PowerCell::zeros(2, 2);
  c.a_pos = 0.3;
  c.a_neg = -0.2;
  c.b_pos = vec({1.0, 0.5});
  c.b_neg = vec({0.5, 1.0});
  c.c_pos = vec({0.2, 0.1});
  c.c_neg = vec({0.1, 0.3});
  c.d_pos = Mat::Identity(2, 2) * 0.4;
  c.d_neg = Mat::Identity(2, 2) * 0.3;
  c.q = 1.0;
  c.r = Mat::Identity(2, 2);
  return HomogeneousModel::from_family("piecewise_linear", Cone::full_space(2),
                                       PowerFamily(p, 1.0, 2, 2, {c}), 1.0, 1.0, regime, std::move(rp));
}

TEST(Regime, CaseOnePiecewiseLinearPowerFamily) {
  // |b|^2 <= 2 a^2 + 2 (|b_pos|^2 + |b_neg|^2) |v|^2 = 0.18 + 5 |v|^2, |sigma|^2 is smaller,
  // and |v|^2 <= 1 + |v|^p for p >= 2.
  for (double p : {2.0, 3.0}) {
    const auto model = piecewise_linear_power(p, Regime::case_i, {5.0, 0.2, 0.0, {}});
    const auto d = check_regime(model, default_regime_samples(model));
    EXPECT_TRUE(d.passed) << p << ": " << (d.messages.empty() ? "" : d.messages.front());
    EXPECT_GT(d.points_checked, 100);
  }
}

TEST(Regime, CaseOneFailsWithTooSmallConstants) {
  const auto model = piecewise_linear_power(2.0, Regime::case_i, {0.1, 0.01, 0.0, {}});
  const auto d = check_regime(model, default_regime_samples(model));
  EXPECT_FALSE(d.passed);
  EXPECT_GT(d.worst_excess, 0.0);
}

HomogeneousModel fractional_cost_model(double p, double alpha, Regime regime, RegimeParams rp, bool trig) {
  // f(x,u) = (|x|^p + |u|^p) |u|^alpha / |x|^alpha for x != 0, zero at x = 0.
  BoundaryCoefficients c;
  if (trig) {
    c.b_plus = [](const Instant&, const Vec& v) { return 0.4 * std::sin(v.norm()); };
    c.b_minus = [](const Instant&, const Vec& v) { return -0.4 * std::sin(v.norm()); };
    c.sigma_plus = [](const Instant&, const Vec& v) { return Vec::Constant(1, 0.3 * std::cos(v.norm())); };
    c.sigma_minus = [](const Instant&, const Vec& v) { return Vec::Constant(1, -0.3 * std::cos(v.norm())); };
  } else {
    c.b_plus = [](const Instant&, const Vec& v) { return 0.3 + v(0); };
    c.b_minus = [](const Instant&, const Vec& v) { return 0.2 - v(0); };
    c.sigma_plus = [](const Instant&, const Vec& v) { return Vec::Constant(1, 0.2 + 0.5 * v(0)); };
    c.sigma_minus = [](const Instant&, const Vec& v) { return Vec::Constant(1, -0.1 + 0.5 * v(0)); };
  }
  c.f_plus = [p, alpha](const Instant&, const Vec& v) {
    return (1.0 + std::pow(v.norm(), p)) * std::pow(v.norm(), alpha);
  };
  c.f_minus = c.f_plus;
  c.f_zero = [](const Instant&, const Vec&) { return 0.0; };
  c.g_plus = c.g_minus = 1.0;
  return HomogeneousModel("fractional", p, 1.0, 1, Cone::full_space(1), std::move(c), regime, std::move(rp));
}

TEST(Regime, CaseOneFractionalCost) {
  // |b|^2 <= 2 (0.09 + |v|^2) and |v|^2 <= |v|^alpha (1 + |v|^p) + 1.
  const auto model = fractional_cost_model(2.0, 1.5, Regime::case_i, {2.0, 2.2, 0.0, {}}, false);
  const auto d = check_regime(model, default_regime_samples(model));
  EXPECT_TRUE(d.passed) << (d.messages.empty() ? "" : d.messages.front());
}

TEST(Regime, CaseTwoLinearDriftControlFreeVolatility) {
  // |sigma| = |C|; |A + B v| <= eps |v|^2 + |A| + B^2 / (4 eps).
  const double A = 0.3, B = 1.0, C = 0.2;
  RegimeParams rp;
  rp.L = C;
  for (double eps : {0.1, 1.0, 10.0}) rp.eps_table.emplace_back(eps, A + B * B / (4 * eps));
  auto model = testing::scalar_power_lq(A, B, C, 1.0, 1.0, 1.0).with_regime(Regime::case_ii, rp);
  const auto d = check_regime(model, default_regime_samples(model));
  EXPECT_TRUE(d.passed) << (d.messages.empty() ? "" : d.messages.front());
}

TEST(Regime, CaseTwoTrigonometricCoefficients) {
  RegimeParams rp;
  rp.L = 0.3;
  rp.eps_table = {{0.01, 0.4}, {1.0, 0.4}};
  const auto model = fractional_cost_model(1.5, 2.0, Regime::case_ii, rp, true);
  const auto d = check_regime(model, default_regime_samples(model));
  EXPECT_TRUE(d.passed) << (d.messages.empty() ? "" : d.messages.front());
}

HomogeneousModel case_three_example(double g_plus) {
  PowerCell c = PowerCell::zeros(1, 1);
  c.a_pos = 0.1;
  c.a_neg = 0.05;
  c.b_pos = c.b_neg = vec({0.5});
  c.c_pos = vec({0.2});
  c.c_neg = vec({0.1});
  c.d_pos = c.d_neg = Mat::Constant(1, 1, 1.0);
  c.q = 1.0;
  c.r = Mat::Constant(1, 1, 1.0);
  c.q_mix = 0.5;
  c.r_mix = Mat::Constant(1, 1, 1.0);
  // |b| <= 0.1 + 0.5 |v| <= 0.25 (|v| - 0.2)^2 + 0.45, p = 2 > 1 + 2 delta.
  return HomogeneousModel::from_family("case3", Cone::full_space(1), PowerFamily(2.0, 1.0, 1, 1, {c}), g_plus, 2.0,
                                       Regime::case_iii, {0.25, 0.5, 1.0, {}});
}

TEST(Regime, CaseThreeExamplePasses) {
  const auto model = case_three_example(1.0);
  const auto d = check_regime(model, default_regime_samples(model));
  EXPECT_TRUE(d.passed) << (d.messages.empty() ? "" : d.messages.front());
}

TEST(Regime, CaseThreeWithZeroTerminalCostFailsEtaPositivity) {
  const auto d = check_regime(case_three_example(0.0), {});
  ASSERT_FALSE(d.passed);
  EXPECT_NE(d.messages.front().find("eta"), std::string::npos) << d.messages.front();
}

TEST(Regime, CaseThreeRequiresDegreeAboveOnePlusTwoDelta) {
  auto model = case_three_example(1.0).with_regime(Regime::case_iii, {0.6, 0.5, 1.0, {}});
  const auto d = check_regime(model, {});
  EXPECT_FALSE(d.passed);
}

TEST(Regime, EveryBatteryModelPassesItsDeclaredRegime) {
  for (const auto& entry : testing::regression_battery()) {
    const auto d = check_regime(entry.model, default_regime_samples(entry.model));
    EXPECT_TRUE(d.passed) << entry.name << ": " << (d.messages.empty() ? "" : d.messages.front());
  }
}

TEST(Model, RejectsInvalidConstruction) {
  EXPECT_THROW(testing::scalar_power_lq(0, 1, 0, 1, 1, 1, 1.0), DomainError);
  EXPECT_THROW(testing::scalar_power_lq(0, 1, 0, 1, 1, 1, 2.0, 0.0), DomainError);
  BoundaryCoefficients missing;
  EXPECT_THROW(HomogeneousModel("x", 2.0, 1.0, 1, Cone::full_space(1), missing, Regime::case_i, {}), DomainError);
}

}  // namespace
}  // namespace hsc
