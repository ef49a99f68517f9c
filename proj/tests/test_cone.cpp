#include "hsc/cone.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace hsc {
namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// Exhaustive active-set oracle: the NNLS optimum is the unconstrained least
// squares solution on some column subset with nonnegative coefficients.
Vec brute_force_projection(const Mat& D, const Vec& v) {
  const auto k = D.cols();
  Vec best = Vec::Zero(D.rows());
  double best_res = v.norm();
  for (long mask = 1; mask < (1L << k); ++mask) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < k; ++j)
      if (mask & (1L << j)) cols.push_back(j);
    Mat sub(D.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = D.col(cols[c]);
    const Vec lambda = sub.completeOrthogonalDecomposition().solve(v);
    if ((lambda.array() < -1e-12).any()) continue;
    const Vec w = sub * lambda;
    if ((w - v).norm() < best_res - 1e-14) {
      best_res = (w - v).norm();
      best = w;
    }
  }
  return best;
}

std::vector<Cone> sample_cones() {
  Mat gen(2, 2);
  gen << 1, 1, 0, 1;
  Mat gen3(3, 4);
  gen3 << 1, 0, 0, 1, 0, 1, 0, 1, 0, 0, 1, -1;
  return {Cone::full_space(3), Cone::orthant(3), Cone::ray(vec({1, -2, 0.5})), Cone::generated(gen),
          Cone::generated(gen3)};
}

TEST(Cone, OrthantContainsBoundaryPoint) { EXPECT_TRUE(Cone::orthant(2).contains(vec({1, 0}), 0.0)); }

TEST(Cone, OrthantRejectsPointStrictlyOutside) { EXPECT_FALSE(Cone::orthant(2).contains(vec({1, -1e-3}), 1e-6)); }

TEST(Cone, GeneratedContainsHandSolvedCombination) {
  Mat D(2, 2);
  D << 1, 1, 1, -1;  // generators (1,1) and (1,-1)
  EXPECT_TRUE(Cone::generated(D).contains(vec({2, 0}), 1e-9));  // = (1,1) + (1,-1)
  EXPECT_FALSE(Cone::generated(D).contains(vec({-1, 0}), 1e-9));
}

TEST(Cone, OriginIsAlwaysAMemberAndScalingPreservesMembership) {
  std::mt19937_64 rng(11);
  for (const Cone& cone : sample_cones()) {
    EXPECT_TRUE(cone.contains(Vec::Zero(cone.dim()), 0.0)) << cone.kind();
    for (int i = 0; i < 50; ++i) {
      const Vec v = cone.sample(rng);
      ASSERT_TRUE(cone.contains(v, 1e-9 * (1 + v.norm()))) << cone.kind();
      EXPECT_TRUE(cone.contains(2.0 * v, 1e-9 * (1 + 2 * v.norm()))) << cone.kind();
      EXPECT_TRUE(cone.contains(0.37 * v, 1e-9 * (1 + v.norm()))) << cone.kind();
    }
  }
}

TEST(Cone, OrthantProjectionIsComponentwiseClamp) {
  const Vec v = vec({-1.5, 2.0, 0.0, -1e-9});
  EXPECT_EQ(Cone::orthant(4).project(v), v.cwiseMax(0.0));
}

TEST(Cone, RayProjectionFormula) {
  const Vec d = vec({1, 2});
  const Cone ray = Cone::ray(d);
  for (const Vec& v : {vec({3, 1}), vec({-3, -1}), vec({-2, 1})}) {
    const Vec expected = std::max(d.dot(v), 0.0) / d.squaredNorm() * d;
    EXPECT_LT((ray.project(v) - expected).norm(), 1e-14);
  }
}

TEST(Cone, GeneratedProjectionMatchesBruteForce) {
  Mat D(2, 2);
  D << 1, 1, 0, 1;  // generators (1,0) and (1,1)
  const Vec v = vec({-1, 2});
  const Vec p = Cone::generated(D).project(v);
  EXPECT_LT((p - brute_force_projection(D, v)).norm(), 1e-12);
  EXPECT_NEAR(p(0), 0.5, 1e-12);
  EXPECT_NEAR(p(1), 0.5, 1e-12);
}

TEST(Cone, GeneratedProjectionMatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 1 + trial % 4;
    const int k = 1 + (trial / 4) % 5;
    Mat D(m, k);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j) D(i, j) = nd(rng);
    Vec v(m);
    for (int i = 0; i < m; ++i) v(i) = 3 * nd(rng);
    const Vec p = Cone::generated(D).project(v);
    EXPECT_LT((p - brute_force_projection(D, v)).norm(), 1e-9) << "trial " << trial;
  }
}

TEST(Cone, ProjectionIsIdempotentNonexpansiveAndObtuse) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (const Cone& cone : sample_cones()) {
    const int m = cone.dim();
    for (int i = 0; i < 100; ++i) {
      Vec u(m), v(m);
      for (int r = 0; r < m; ++r) {
        u(r) = 2 * nd(rng);
        v(r) = 2 * nd(rng);
      }
      const Vec pu = cone.project(u), pv = cone.project(v);
      EXPECT_LT((cone.project(pu) - pu).norm(), 1e-12 * (1 + pu.norm())) << cone.kind();
      EXPECT_LE((pu - pv).norm(), (u - v).norm() + 1e-12) << cone.kind();
      // Variational inequality: <u - Pu, w - Pu> <= 0 for cone elements w.
      for (const Vec& w : cone.spanning_directions()) EXPECT_LE((u - pu).dot(w - pu), 1e-10) << cone.kind();
      EXPECT_LE((u - pu).dot(-pu), 1e-10) << cone.kind();
    }
  }
}

TEST(Cone, ProjectionReturnsMembersUnchanged) {
  std::mt19937_64 rng(9);
  for (const Cone& cone : sample_cones())
    for (int i = 0; i < 20; ++i) {
      const Vec v = cone.sample(rng);
      EXPECT_LT((cone.project(v) - v).norm(), 1e-12 * (1 + v.norm())) << cone.kind();
    }
}

TEST(Cone, SymmetryFlag) {
  Mat pm(1, 2);
  pm << 1, -1;
  EXPECT_TRUE(Cone::full_space(2).is_symmetric());
  EXPECT_FALSE(Cone::orthant(2).is_symmetric());
  EXPECT_FALSE(Cone::ray(vec({1})).is_symmetric());
  EXPECT_TRUE(Cone::generated(pm).is_symmetric());
}

TEST(Cone, RejectsDegenerateSpecifications) {
  EXPECT_THROW(Cone::full_space(0), DomainError);
  EXPECT_THROW(Cone::orthant(0), DomainError);
  EXPECT_THROW(Cone::ray(vec({0, 0})), DomainError);
  EXPECT_THROW(Cone::ray(Vec()), DomainError);
  Mat with_zero(2, 2);
  with_zero << 1, 0, 0, 0;
  EXPECT_THROW(Cone::generated(with_zero), DomainError);
}

TEST(Cone, DimensionMismatchIsAnError) {
  EXPECT_THROW(Cone::orthant(2).contains(vec({1, 2, 3})), DimensionMismatch);
  EXPECT_THROW(Cone::orthant(2).project(vec({1})), DimensionMismatch);
}

TEST(Nnls, SolvesSmallProblemExactly) {
  Mat A(3, 2);
  A << 1, 0, 0, 1, 1, 1;
  const Vec b = vec({1, 2, 3});
  const Vec x = nnls(A, b);
  EXPECT_LT((x - vec({1, 2})).norm(), 1e-12);
  EXPECT_TRUE((nnls(A, -b).array() == 0.0).all());
}

}  // namespace
}  // namespace hsc
