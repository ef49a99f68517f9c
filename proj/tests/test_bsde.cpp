#include "hsc/bsde.hpp"
#include "hsc/io.hpp"

#include "support/battery.hpp"
#include "support/enumeration.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <random>

namespace hsc {
namespace {

using testing::Enumeration;
using testing::scalar_power_lq;

double sup_diff(const BsdeSolution& sol, const std::vector<double>& ref) {
  double worst = 0.0;
  for (int k = 0; k <= sol.grid.steps(); ++k) worst = std::max(worst, std::abs(sol.node(k).P - ref[k]));
  return worst;
}

TEST(TimeGrid, EndsExactlyAtTheHorizon) {
  const TimeGrid g(0.7, 3);
  EXPECT_EQ(g.t(0), 0.0);
  EXPECT_EQ(g.t(3), 0.7);
  EXPECT_LT(g.t(2), g.t(3));
  EXPECT_THROW(TimeGrid(0.0, 3), DomainError);
  EXPECT_THROW(TimeGrid(1.0, 0), DomainError);
}

TEST(Deterministic, ZeroDriverKeepsTerminalValue) {
  const auto model = testing::zero_model(1.0, 2.5);
  const TimeGrid grid(1.0, 50);
  for (Branch b : {Branch::plus, Branch::minus}) {
    const auto sol = solve_deterministic(model, b, grid);
    for (const auto& layer : sol.layers) {
      EXPECT_EQ(layer.front().P, model.terminal(b));
      EXPECT_EQ(layer.front().Lambda.norm(), 0.0);
    }
  }
}

TEST(Deterministic, PureDriftIsExponential) {
  for (double p : {2.0, 3.0}) {
    // b = A x, no control influence, no running cost at the optimum.
    const double A = 0.35, g = 1.7;
    const auto model = scalar_power_lq(A, 0.0, 0.0, 0.0, 1.0, g, p);
    const TimeGrid grid(1.0, 1000);
    for (Branch b : {Branch::plus, Branch::minus}) {
      const auto sol = solve_deterministic(model, b, grid);
      for (int k = 0; k <= 1000; ++k)
        ASSERT_NEAR(sol.node(k).P, g * std::exp(p * A * (1.0 - grid.t(k))), 1e-8) << "p=" << p << " k=" << k;
    }
  }
}

TEST(Deterministic, TerminalConditionIsExact) {
  const auto model = testing::load_fixture_model("generated_asym");
  const TimeGrid grid(model.horizon(), 40);
  EXPECT_EQ(solve_deterministic(model, Branch::plus, grid).node(40).P, model.terminal(Branch::plus));
  EXPECT_EQ(solve_deterministic(model, Branch::minus, grid).node(40).P, model.terminal(Branch::minus));
}

TEST(Riccati, ControlFreeConstantCost) {
  LqParams lq;
  lq.B = Vec::Zero(1);
  lq.C = Vec::Zero(1);
  lq.Q = 0.8;
  lq.R = Mat::Constant(1, 1, 2.0);
  lq.G = 1.3;
  const TimeGrid grid(1.0, 10);
  const auto P = riccati_oracle(lq, grid);
  for (int k = 0; k <= 10; ++k) EXPECT_NEAR(P[k], lq.G + lq.Q * lq.Q * (1.0 - grid.t(k)), 1e-11);
}

TEST(Riccati, LinearCaseClosedForm) {
  LqParams lq;
  lq.A = 0.2;
  lq.B = Vec::Zero(2);
  lq.C = Vec::Constant(1, 0.5);
  lq.Q = 0.6;
  lq.R = Mat::Identity(2, 2);
  lq.G = 0.9;
  lq.T = 2.0;
  const TimeGrid grid(2.0, 16);
  const auto P = riccati_oracle(lq, grid);
  const double r = 2 * lq.A + 0.25;
  for (int k = 0; k <= 16; ++k) {
    const double e = std::exp(r * (lq.T - grid.t(k)));
    EXPECT_NEAR(P[k], lq.G * e + lq.Q * lq.Q * (e - 1) / r, 1e-11);
  }
}

TEST(Riccati, FrozenReferenceTable) {
  std::ifstream in(testing::fixture_dir() / "riccati_reference.csv");
  ASSERT_TRUE(in);
  std::string line;
  std::getline(in, line);
  std::vector<double> t, ref;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    t.push_back(parse_double(line.substr(0, comma)));
    ref.push_back(parse_double(line.substr(comma + 1)));
  }
  ASSERT_EQ(ref.size(), 21u);

  LqParams lq;
  lq.A = 0.1;
  lq.B = Vec::Constant(1, 1.0);
  lq.C = Vec::Constant(1, 0.2);
  lq.Q = 1.0;
  lq.R = Mat::Constant(1, 1, 1.0);
  const TimeGrid grid(1.0, 20);
  const auto oracle = riccati_oracle(lq, grid);
  const auto model = testing::load_fixture_model("lq_scalar");
  const auto rk4 = solve_deterministic(model, Branch::plus, TimeGrid(1.0, 2000));
  for (std::size_t k = 0; k < ref.size(); ++k) {
    EXPECT_EQ(grid.t(static_cast<int>(k)), t[k]);
    EXPECT_NEAR(oracle[k], ref[k], 1e-12);
    EXPECT_NEAR(rk4.node(static_cast<int>(100 * k)).P, ref[k], 1e-10);
  }
}

TEST(Riccati, RecoveredByTheSolverOnRandomInstances) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const TimeGrid grid(1.0, 2000);
  for (int i = 0; i < 4; ++i) {
    LqParams lq;
    lq.A = u(rng);
    lq.B = Vec::Constant(1, 2 * u(rng));
    lq.C = Vec::Constant(1, u(rng));
    lq.Q = u(rng);
    lq.R = Mat::Constant(1, 1, 0.5 + std::abs(u(rng)));
    lq.G = 0.5 + std::abs(u(rng));
    const auto model = scalar_power_lq(lq.A, lq.B(0), lq.C(0), lq.Q, lq.R(0, 0), lq.G);
    const auto ref = riccati_oracle(lq, grid);
    for (Branch b : {Branch::plus, Branch::minus})
      EXPECT_LE(sup_diff(solve_deterministic(model, b, grid), ref), 1e-6) << "instance " << i;
  }
}

TEST(Riccati, RejectsSingularWeights) {
  LqParams lq;
  lq.B = Vec::Constant(2, 1.0);
  lq.C = Vec::Zero(1);
  lq.R = Mat::Zero(1, 2);
  EXPECT_THROW(riccati_oracle(lq, TimeGrid(1.0, 4)), DomainError);
}

TEST(UpperBound, ZeroAtZeroControlKeepsTerminalValue) {
  // f(.,0) = b(.,0) = sigma(.,0) = 0.
  const auto model = scalar_power_lq(0.0, 1.0, 0.0, 0.0, 1.0, 1.4);
  for (SolveMode mode : {SolveMode::deterministic, SolveMode::tree}) {
    const auto ub = solve_upper_bound(model, Branch::plus, TimeGrid(1.0, 30), mode);
    for (const auto& layer : ub.layers)
      for (const auto& node : layer) EXPECT_EQ(node.P, 1.4);
  }
}

TEST(UpperBound, ScalarLinearClosedForm) {
  // f(1,0) = q, b(1,0) = a, sigma(1,0) = 0, p = 2.
  const double a = 0.3, q = 0.49, g = 1.2;
  const auto model = scalar_power_lq(a, 1.0, 0.0, std::sqrt(q), 1.0, g);
  const TimeGrid grid(1.0, 400);
  const auto ub = solve_upper_bound(model, Branch::plus, grid);
  for (int k = 0; k <= 400; ++k) {
    const double e = std::exp(2 * a * (1.0 - grid.t(k)));
    EXPECT_NEAR(ub.node(k).P, g * e + q * (e - 1) / (2 * a), 1e-10);
  }
}

TEST(UpperBound, DominatesTheSolution) {
  for (const char* name : {"lq_scalar", "orthant_vol", "power_p3", "case3_meanvar"}) {
    const auto model = testing::load_fixture_model(name);
    const TimeGrid grid(model.horizon(), 100);
    for (Branch b : {Branch::plus, Branch::minus}) {
      const auto sol = solve_deterministic(model, b, grid);
      const auto ub = solve_upper_bound(model, b, grid);
      for (int k = 0; k <= 100; ++k) EXPECT_LE(sol.node(k).P, ub.node(k).P + 1e-8) << name;
    }
  }
}

TEST(Deterministic, TerminalMonotonicity) {
  for (const char* name : {"lq_scalar", "mixed_power", "ray_p25"}) {
    const auto model = testing::load_fixture_model(name);
    const auto higher = model.with_terminal(model.terminal(Branch::plus) + 0.5, model.terminal(Branch::minus) + 0.5);
    const TimeGrid grid(model.horizon(), 100);
    for (Branch b : {Branch::plus, Branch::minus}) {
      const auto lo = solve_deterministic(model, b, grid);
      const auto hi = solve_deterministic(higher, b, grid);
      for (int k = 0; k <= 100; ++k) EXPECT_GE(hi.node(k).P, lo.node(k).P - 1e-9) << name;
    }
  }
}

TEST(Deterministic, ConvergesAtLeastQuadratically) {
  const auto model = testing::load_fixture_model("lq_scalar");
  double P[3];
  const int Ns[] = {5, 10, 20};
  for (int i = 0; i < 3; ++i) P[i] = solve_deterministic(model, Branch::plus, TimeGrid(1.0, Ns[i])).initial_value();
  const double order = std::log2(std::abs(P[0] - P[1]) / std::abs(P[1] - P[2]));
  EXPECT_GE(order, 2.0);
}

TEST(Deterministic, IllPosedDriverNamesTimeAndValue) {
  BoundaryCoefficients c;
  c.b_plus = c.b_minus = [](const Instant&, const Vec& v) { return v(0); };
  c.sigma_plus = c.sigma_minus = [](const Instant&, const Vec&) { return Vec::Zero(1); };
  c.f_plus = c.f_minus = c.f_zero = [](const Instant&, const Vec&) { return 0.0; };
  c.g_plus = c.g_minus = 1.0;
  const HomogeneousModel model("unbounded", 2.0, 1.0, 1, Cone::full_space(1), c, Regime::case_i, {1, 1, 0, {}});
  try {
    solve_deterministic(model, Branch::plus, TimeGrid(1.0, 10));
    FAIL() << "expected IllPosed";
  } catch (const IllPosed& e) {
    EXPECT_EQ(e.t, 1.0);
    EXPECT_EQ(e.P, 1.0);
    EXPECT_NE(std::string(e.what()).find("-infinity"), std::string::npos);
  }
}

TEST(Deterministic, RejectsGridWithDifferentHorizon) {
  EXPECT_THROW(solve_deterministic(testing::load_fixture_model("lq_scalar"), Branch::plus, TimeGrid(2.0, 10)),
               DomainError);
}

// Tree mode.

TEST(Tree, ConstantTerminalAndZeroDriver) {
  const auto model = testing::zero_model(1.0, 3.0);
  const auto sol = solve_tree(model, Branch::plus, TimeGrid(1.0, 40));
  for (const auto& layer : sol.layers)
    for (const auto& node : layer) {
      EXPECT_EQ(node.P, 1.0);
      EXPECT_EQ(node.Lambda(0), 0.0);
    }
}

TEST(Tree, DeterministicCoefficientsGiveZeroLambdaAndMatchTheOde) {
  for (const char* name : {"lq_scalar", "tree_orthant", "power_p3"}) {
    const auto model = testing::load_fixture_model(name);
    const TimeGrid grid(model.horizon(), 200);
    for (Branch b : {Branch::plus, Branch::minus}) {
      const auto tree = solve_tree(model, b, grid);
      const auto ode = solve_deterministic(model, b, grid);
      for (const auto& layer : tree.layers)
        for (const auto& node : layer) ASSERT_EQ(node.Lambda(0), 0.0) << name;
      const double g = model.terminal(b);
      EXPECT_LE(std::abs(tree.initial_value() - ode.initial_value()), 5 * grid.dt() * (1 + std::abs(g))) << name;
    }
  }
}

void expect_matches_enumeration(const BsdeSolution& sol, const Enumeration& e, double tol) {
  for (int k = 0; k <= e.N; ++k)
    for (int j = 0; j <= k; ++j) {
      EXPECT_NEAR(sol.node(k, j).P, e.P(k, j), tol) << "node " << k << "," << j;
      if (k < e.N) {
        EXPECT_NEAR(sol.node(k, j).Lambda(0), e.Lambda(k, j), tol * (1 + 1 / std::sqrt(e.dt)));
      }
    }
}

ScenarioTerminal scenario(double slope, double curvature) {
  return [=](Branch side, int j, int N) {
    const double w = static_cast<double>(2 * j - N) / N;
    return (side == Branch::plus ? 1.0 : 1.5) + slope * w + curvature * w * w;
  };
}

TEST(Tree, ScenarioTerminalWithZeroDriverMatchesEnumeration) {
  const auto model = testing::zero_model(1.0, 1.5).with_scenario_terminal(scenario(0.5, 0.0));
  for (int N : {1, 4, 12}) {
    const TimeGrid grid(1.0, N);
    const auto sol = solve_tree(model, Branch::plus, grid);
    EXPECT_NEAR(sol.initial_value(), 1.0, 1e-14);  // odd perturbation averages out
    const Enumeration e{N, grid.dt(), 0, 0, 0, [&](int j) { return model.terminal(Branch::plus, j, N); }};
    expect_matches_enumeration(sol, e, 1e-12);
  }
}

TEST(Tree, LinearDriverMatchesEnumeration) {
  // B = 0: the infimum is attained at v = 0 and the driver is affine in (P, Lambda).
  const double p = 2.0, A = 0.3, C = 0.4, Q = 0.7;
  const auto model = scalar_power_lq(A, 0.0, C, Q, 1.0, 1.0, p).with_scenario_terminal(scenario(0.5, 0.8));
  for (int N : {3, 12}) {
    const TimeGrid grid(1.0, N);
    for (Branch b : {Branch::plus, Branch::minus}) {
      const auto sol = solve_tree(model, b, grid);
      const Enumeration e{N, grid.dt(), 0.5 * p * (p - 1) * C * C + p * A, p * C, std::pow(Q, p),
                          [&](int j) { return model.terminal(b, j, N); }};
      expect_matches_enumeration(sol, e, 1e-12);
    }
  }
}

TEST(Tree, UpperBoundMatchesEnumeration) {
  const double A = -0.2, C = 0.3, Q = 0.5;
  const auto model = scalar_power_lq(A, 1.0, C, Q, 1.0, 1.0).with_scenario_terminal(scenario(-0.4, 0.3));
  const int N = 10;
  const TimeGrid grid(1.0, N);
  const auto ub = solve_upper_bound(model, Branch::plus, grid, SolveMode::tree);
  const Enumeration e{N, grid.dt(), 0.5 * 2 * C * C + 2 * A, 2 * C, Q * Q,
                      [&](int j) { return model.terminal(Branch::plus, j, N); }};
  expect_matches_enumeration(ub, e, 1e-12);
}

TEST(Tree, ScenarioSolutionStaysBelowUpperBound) {
  const auto model = testing::load_fixture_model("tree_scenario");
  const TimeGrid grid(model.horizon(), 60);
  for (Branch b : {Branch::plus, Branch::minus}) {
    const auto sol = solve_tree(model, b, grid);
    const auto ub = solve_upper_bound(model, b, grid, SolveMode::tree);
    const auto inv = check_invariants(model, sol, ub);
    EXPECT_TRUE(inv.ok()) << (inv.messages.empty() ? "" : inv.messages.front());
    EXPECT_LE(sol.max_fixed_point_residual, 1e-12);
  }
}

TEST(Tree, NonContractingFixedPointIsReported) {
  // Slope p A dt = 50 per step: the fixed-point map expands.
  const auto model = scalar_power_lq(50.0, 0.0, 0.0, 1.0, 1.0, 1.0);
  EXPECT_THROW(solve_tree(model, Branch::plus, TimeGrid(1.0, 2)), SchemeDivergence);
}

TEST(Tree, RespectsNodeCapAndSingleNoise) {
  SolverOptions opts;
  opts.max_tree_nodes = 100;
  EXPECT_THROW(solve_tree(testing::load_fixture_model("lq_scalar"), Branch::plus, TimeGrid(1.0, 20), opts),
               DomainError);
  EXPECT_THROW(solve_tree(testing::load_fixture_model("lq_vector"), Branch::plus, TimeGrid(1.0, 4)), DomainError);
}

// Invariant checker.

TEST(Invariants, CaseThreeReportsPositivityConstant) {
  const auto model = testing::load_fixture_model("case3_meanvar");
  const TimeGrid grid(model.horizon(), 200);
  const auto sol = solve_deterministic(model, Branch::plus, grid);
  const auto inv = check_invariants(model, sol, solve_upper_bound(model, Branch::plus, grid));
  EXPECT_TRUE(inv.ok());
  const double eta = model.regime_params().eta;
  EXPECT_GE(inv.positivity_c, 0.0);
  EXPECT_GE(inv.min_P, eta * std::exp(-inv.positivity_c * model.horizon()) - 1e-12);
}

TEST(Invariants, FlagsViolations) {
  const auto model = testing::load_fixture_model("lq_scalar");
  const TimeGrid grid(1.0, 20);
  auto sol = solve_deterministic(model, Branch::plus, grid);
  const auto ub = solve_upper_bound(model, Branch::plus, grid);
  auto above = sol;
  above.layers[3][0].P = ub.node(3).P + 1e-3;
  EXPECT_FALSE(check_invariants(model, above, ub).below_upper_bound);
  auto negative = sol;
  negative.layers[5][0].P = -1e-3;
  EXPECT_FALSE(check_invariants(model, negative, ub).nonnegative);
  auto off = sol;
  off.layers.back()[0].P += 1e-15;
  EXPECT_FALSE(check_invariants(model, off, ub).terminal_exact);
  EXPECT_THROW(check_invariants(model, sol, solve_upper_bound(model, Branch::plus, TimeGrid(1.0, 10))), DomainError);
}

}  // namespace
}  // namespace hsc
