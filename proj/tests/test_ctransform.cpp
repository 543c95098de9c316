#include <gtest/gtest.h>

#include <cmath>

#include "snot/ctransform.hpp"
#include "snot/error.hpp"
#include "snot/rng.hpp"

using namespace snot;

namespace {

Matrix gaussian(Index n, Index d, Rng& rng) {
  std::normal_distribution<double> g;
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k) x(i, k) = g(rng);
  return x;
}

GridPotential random_potential(Index n, Index d, Rng& rng) {
  GridPotential p;
  p.support = gaussian(n, d, rng);
  p.values = gaussian(n, 1, rng).col(0);
  return p;
}

Matrix col(std::initializer_list<double> v) {
  Matrix x(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double a : v) x(i++, 0) = a;
  return x;
}

}  // namespace

TEST(CTransform, ZeroPotentialMidpoint) {
  GridPotential p{col({0.0, 1.0}), Vector::Zero(2), Cost{}};
  const auto r = c_transform(p, col({0.5}));
  EXPECT_DOUBLE_EQ(r.values[0], 0.125);
  EXPECT_EQ(r.argmin[0], 0);  // tie goes to the smallest index
}

TEST(CTransform, PicksHigherPotential) {
  GridPotential p{col({0.0, 1.0}), Vector::Zero(2), Cost{}};
  p.values[1] = 1.0;
  const auto r = c_transform(p, col({0.5}));
  EXPECT_DOUBLE_EQ(r.values[0], -0.875);
  EXPECT_EQ(r.argmin[0], 1);
}

TEST(CTransform, MatchesEnumeration) {
  Rng rng = make_rng(1);
  const GridPotential p = random_potential(50, 3, rng);
  const Matrix x = gaussian(20, 3, rng);
  const auto r = c_transform(p, x);
  for (Index i = 0; i < 20; ++i) {
    double best = INFINITY;
    Index arg = -1;
    for (Index j = 0; j < 50; ++j) {
      const double v = 0.5 * (x.row(i) - p.support.row(j)).squaredNorm() - p.values[j];
      if (v < best) {
        best = v;
        arg = j;
      }
    }
    EXPECT_EQ(r.values[i], best);
    EXPECT_EQ(r.argmin[i], arg);
  }
}

TEST(CTransform, EmptySupportThrows) {
  GridPotential p{Matrix(0, 1), Vector(0), Cost{}};
  EXPECT_THROW(c_transform(p, col({0.0})), ShapeError);
}

TEST(CcTransform, AboveOriginalAndSameTransform) {
  Rng rng = make_rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const GridPotential p = random_potential(30, 2, rng);
    const Matrix grid = gaussian(200, 2, rng);
    const Vector vcc = cc_transform(p, grid, p.support);
    for (Index j = 0; j < 30; ++j) EXPECT_GE(vcc[j], p.values[j] - 1e-12);
    const GridPotential q = cc_potential(p, grid);
    // (V^cc)^c = V^c holds on the x grid the double transform was built from.
    const Vector a = c_transform(p, grid).values;
    const Vector b = c_transform(q, grid).values;
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CcTransform, IdempotentOnCConcave) {
  Rng rng = make_rng(3);
  const GridPotential p = random_potential(25, 2, rng);
  const Matrix grid = gaussian(100, 2, rng);
  const GridPotential q = cc_potential(p, grid);
  const Vector qcc = cc_transform(q, grid, q.support);
  EXPECT_LT((qcc - q.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CTransform, OneLipschitzInSupNorm) {
  Rng rng = make_rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    GridPotential f = random_potential(20, 2, rng);
    GridPotential g = f;
    g.values = gaussian(20, 1, rng).col(0);
    const Matrix x = gaussian(40, 2, rng);
    const double lhs = (c_transform(f, x).values - c_transform(g, x).values).cwiseAbs().maxCoeff();
    EXPECT_LE(lhs, (f.values - g.values).cwiseAbs().maxCoeff() + 1e-12);
  }
}

TEST(CTransform, DualFeasibility) {
  Rng rng = make_rng(5);
  const GridPotential p = random_potential(15, 2, rng);
  const Matrix x = gaussian(30, 2, rng);
  const Vector vc = c_transform(p, x).values;
  for (Index i = 0; i < 30; ++i)
    for (Index j = 0; j < 15; ++j) EXPECT_LE(vc[i] + p.values[j], p.cost(x.row(i), p.support.row(j)) + 1e-12);
}

TEST(Semidual, WeakAndStrongDuality) {
  Rng rng = make_rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    const EmpiricalMeasure mu = EmpiricalMeasure::uniform(gaussian(12, 2, rng));
    const EmpiricalMeasure nu = EmpiricalMeasure::uniform(gaussian(9, 2, rng));
    const DualSolution s = solve_exact_with_duals(mu, nu, Cost{});
    GridPotential p{nu.points, gaussian(9, 1, rng).col(0), Cost{}};
    EXPECT_LE(semidual_value(p, mu, nu.weights), s.plan.cost_value + 1e-9);
    p.values = s.v;
    EXPECT_NEAR(semidual_value(p, mu, nu.weights), s.plan.cost_value, 1e-8);
  }
}

TEST(Semidual, TrivialZero) {
  GridPotential p{col({0.0}), Vector::Zero(1), Cost{}};
  EXPECT_EQ(semidual_value(p, EmpiricalMeasure::uniform(col({0.0})), Vector::Ones(1)), 0.0);
  EXPECT_THROW(semidual_value(p, EmpiricalMeasure::uniform(col({0.0})), Vector::Ones(2)), ShapeError);
}

TEST(RecoveryResidual, ZeroAtArgminAndPositiveElsewhere) {
  Rng rng = make_rng(7);
  const GridPotential p = random_potential(20, 2, rng);
  const Matrix x = gaussian(30, 2, rng);
  const Vector w = Vector::Constant(30, 1.0 / 30);
  const auto r = c_transform(p, x);
  Matrix best(30, 2), worst(30, 2);
  for (Index i = 0; i < 30; ++i) {
    best.row(i) = p.support.row(r.argmin[i]);
    Index arg = 0;
    double hi = -INFINITY;
    for (Index j = 0; j < 20; ++j) {
      const double v = p.cost(x.row(i), p.support.row(j)) - p.values[j];
      if (v > hi) {
        hi = v;
        arg = j;
      }
    }
    worst.row(i) = p.support.row(arg);
  }
  EXPECT_NEAR(recovery_residual(p, best, x, w), 0.0, 1e-12);
  EXPECT_GT(recovery_residual(p, worst, x, w), 0.0);
  EXPECT_GE(recovery_residual(p, gaussian(30, 2, rng), x, w), -1e-9);
}

TEST(GridPotential, NormalizeAnchorsNearestOrigin) {
  GridPotential p{col({3.0, -0.2, 0.5}), Vector(3), Cost{}};
  p.values << 1.0, 2.0, 3.0;
  EXPECT_EQ(p.anchor(), 1);
  p.normalize();
  EXPECT_EQ(p.values[1], 0.0);
  EXPECT_DOUBLE_EQ(p.values[0], -1.0);
}
