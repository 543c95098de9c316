#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "snot/error.hpp"
#include "snot/nn.hpp"
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

MlpParams identity_net(Index d, double shift = 10.0) {
  MlpParams p = MlpParams::zeros(d, d, d);
  p.W1.setIdentity();
  p.b1.setConstant(shift);
  p.W2.setIdentity();
  p.b2 = -p.W2 * p.b1;
  return p;
}

// Straight loop evaluation, independent of the library's matrix expressions.
double naive_output(const MlpParams& p, const Matrix& x, Index row, Index out) {
  double y = p.b2[out];
  for (Index j = 0; j < p.hidden_dim(); ++j) {
    double a = p.b1[j];
    for (Index k = 0; k < p.input_dim(); ++k) a += p.W1(j, k) * x(row, k);
    if (a > 0.0) y += p.W2(out, j) * a;
  }
  return y;
}

double inner(const MlpParams& p, const Matrix& x, const Matrix& g) { return (forward(p, x).array() * g.array()).sum(); }

}  // namespace

TEST(Forward, ZeroParamsGiveZero) {
  Rng rng = make_rng(1);
  EXPECT_TRUE(forward(MlpParams::zeros(3, 5, 2), gaussian(4, 3, rng)).isZero(0.0));
}

TEST(Forward, IdentityConstruction) {
  Rng rng = make_rng(2);
  const Matrix x = gaussian(10, 3, rng);
  EXPECT_LT((forward(identity_net(3), x) - x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, MatchesNaiveLoops) {
  Rng rng = make_rng(3);
  const MlpParams p = MlpParams::init(4, 7, 3, rng);
  const Matrix x = gaussian(6, 4, rng);
  const Matrix y = forward(p, x);
  for (Index i = 0; i < 6; ++i)
    for (Index o = 0; o < 3; ++o) EXPECT_NEAR(y(i, o), naive_output(p, x, i, o), 1e-12);
}

TEST(Forward, ShapeMismatchThrows) {
  Rng rng = make_rng(4);
  EXPECT_THROW(forward(MlpParams::zeros(3, 2, 1), gaussian(2, 4, rng)), ShapeError);
}

TEST(Init, BoundsFollowFanIn) {
  Rng rng = make_rng(5);
  const MlpParams p = MlpParams::init(16, 64, 4, rng);
  EXPECT_LE(p.W1.cwiseAbs().maxCoeff(), 0.25);
  EXPECT_LE(p.W2.cwiseAbs().maxCoeff(), 0.125);
}

TEST(Backward, ZeroUpstreamGivesZero) {
  Rng rng = make_rng(6);
  const MlpParams p = MlpParams::init(3, 5, 2, rng);
  ForwardCache cache;
  forward(p, gaussian(4, 3, rng), &cache);
  const MlpParams g = backward(p, cache, Matrix::Zero(4, 2));
  for (Index k = 0; k < g.parameter_count(); ++k) EXPECT_EQ(g.at(k), 0.0);
}

TEST(Backward, FiniteDifferences) {
  Rng rng = make_rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    MlpParams p = MlpParams::init(3, 6, 2, rng);
    const Matrix x = gaussian(5, 3, rng);
    const Matrix g = gaussian(5, 2, rng);
    ForwardCache cache;
    forward(p, x, &cache);
    Matrix dx;
    const MlpParams grad = backward(p, cache, g, &dx);
    const double h = 1e-5;
    for (Index k = 0; k < p.parameter_count(); ++k) {
      const double keep = p.at(k);
      p.at(k) = keep + h;
      const double up = inner(p, x, g);
      p.at(k) = keep - h;
      const double down = inner(p, x, g);
      p.at(k) = keep;
      const double fd = (up - down) / (2 * h);
      EXPECT_LE(std::abs(fd - grad.at(k)), 1e-6 * std::max(1.0, std::abs(fd)));
    }
    Matrix xp = x;
    for (Index i = 0; i < x.rows(); ++i)
      for (Index c = 0; c < x.cols(); ++c) {
        xp(i, c) = x(i, c) + h;
        const double up = inner(p, xp, g);
        xp(i, c) = x(i, c) - h;
        const double down = inner(p, xp, g);
        xp(i, c) = x(i, c);
        EXPECT_NEAR((up - down) / (2 * h), dx(i, c), 1e-6);
      }
  }
}

TEST(Backward, SingleUnitChainRule) {
  MlpParams p = MlpParams::zeros(1, 1, 1);
  p.W1(0, 0) = 2.0;
  p.b1[0] = 0.5;
  p.W2(0, 0) = -3.0;
  p.b2[0] = 1.0;
  Matrix x(1, 1);
  x(0, 0) = 0.75;  // pre-activation 2.0 is active
  ForwardCache cache;
  forward(p, x, &cache);
  Matrix g(1, 1);
  g(0, 0) = 1.0;
  Matrix dx;
  const MlpParams grad = backward(p, cache, g, &dx);
  EXPECT_DOUBLE_EQ(grad.W2(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(grad.b2[0], 1.0);
  EXPECT_DOUBLE_EQ(grad.W1(0, 0), -3.0 * 0.75);
  EXPECT_DOUBLE_EQ(grad.b1[0], -3.0);
  EXPECT_DOUBLE_EQ(dx(0, 0), -6.0);
}

TEST(Backward, StaleCacheThrows) {
  Rng rng = make_rng(8);
  MlpParams p = MlpParams::init(2, 3, 1, rng);
  ForwardCache cache;
  forward(p, gaussian(2, 2, rng), &cache);
  AdamState st = AdamState::for_params(p, 1e-3);
  MlpParams g = p.zero_like();
  g.b2[0] = 1.0;
  adam_step(p, g, st);
  EXPECT_THROW(backward(p, cache, Matrix::Ones(2, 1)), ShapeError);
  const MlpParams other = p;
  EXPECT_THROW(backward(other, cache, Matrix::Ones(2, 1)), ShapeError);
}

TEST(Jacobian, InactiveAndLinearRegimes) {
  Rng rng = make_rng(9);
  MlpParams p = MlpParams::init(3, 4, 2, rng);
  p.b1.setConstant(-100.0);
  EXPECT_TRUE(jacobian_map(p, Vector::Zero(3)).isZero(0.0));
  p.b1.setConstant(100.0);
  EXPECT_LT((jacobian_map(p, Vector::Zero(3)) - p.W2 * p.W1).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Jacobian, FiniteDifferencesAndDirectional) {
  Rng rng = make_rng(10);
  for (int rep = 0; rep < 20; ++rep) {
    const MlpParams p = MlpParams::init(3, 8, 2, rng);
    const Vector x = gaussian(1, 3, rng).row(0).transpose();
    const Vector pre = p.W1 * x + p.b1;
    if (pre.cwiseAbs().minCoeff() < 1e-3) continue;  // too close to a kink
    const Matrix j = jacobian_map(p, x);
    const double h = 1e-6;
    for (Index c = 0; c < 3; ++c) {
      Matrix xp = x.transpose(), xm = x.transpose();
      xp(0, c) += h;
      xm(0, c) -= h;
      const Matrix col = (forward(p, xp) - forward(p, xm)) / (2 * h);
      for (Index o = 0; o < 2; ++o) EXPECT_NEAR(col(0, o), j(o, c), 1e-5);
    }
    const Vector v = gaussian(1, 3, rng).row(0).transpose();
    const Matrix moved = (x + h * v).transpose();
    const Matrix dir = (forward(p, moved) - forward(p, Matrix(x.transpose()))) / h;
    EXPECT_LT((dir.transpose() - j * v).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(R1, GradientMatchesFiniteDifferences) {
  Rng rng = make_rng(11);
  MlpParams p = MlpParams::init(2, 5, 1, rng);
  const Matrix y = gaussian(6, 2, rng);
  MlpParams grad;
  const double r = r1_penalty(p, y, &grad);
  double direct = 0.0;
  for (Index i = 0; i < 6; ++i) direct += jacobian_map(p, y.row(i).transpose()).squaredNorm();
  EXPECT_NEAR(r, direct / 6, 1e-12);
  const double h = 1e-6;
  for (Index k = 0; k < p.parameter_count(); ++k) {
    const double keep = p.at(k);
    p.at(k) = keep + h;
    const double up = r1_penalty(p, y);
    p.at(k) = keep - h;
    const double down = r1_penalty(p, y);
    p.at(k) = keep;
    EXPECT_NEAR((up - down) / (2 * h), grad.at(k), 1e-6);
  }
}

TEST(Adam, ZeroGradientKeepsParameters) {
  Rng rng = make_rng(12);
  MlpParams p = MlpParams::init(2, 3, 1, rng);
  const MlpParams before = p;
  AdamState st = AdamState::for_params(p, 1e-3);
  adam_step(p, p.zero_like(), st);
  EXPECT_EQ(st.t, 1);
  for (Index k = 0; k < p.parameter_count(); ++k) EXPECT_EQ(p.at(k), before.at(k));
}

TEST(Adam, FirstStepByHand) {
  MlpParams p = MlpParams::zeros(1, 1, 1);
  MlpParams g = p.zero_like();
  g.b2[0] = 1.0;
  AdamState st = AdamState::for_params(p, 1e-4, 0.0, 0.9, 1e-8);
  adam_step(p, g, st);
  EXPECT_DOUBLE_EQ(p.b2[0], -1e-4 / (1.0 + 1e-8));
}

TEST(Adam, ConstantGradientBoundedMonotoneSteps) {
  MlpParams p = MlpParams::zeros(1, 1, 1);
  MlpParams g = p.zero_like();
  g.b2[0] = 0.3;
  AdamState st = AdamState::for_params(p, 1e-3);
  double prev = 0.0;
  for (int i = 0; i < 100; ++i) {
    adam_step(p, g, st);
    EXPECT_LT(p.b2[0], prev);
    EXPECT_LE(prev - p.b2[0], 1e-3 * (1.0 + 1e-6));
    prev = p.b2[0];
  }
}

TEST(Adam, NonFiniteGradientFaults) {
  MlpParams p = MlpParams::zeros(1, 1, 1);
  MlpParams g = p.zero_like();
  g.W1(0, 0) = NAN;
  AdamState st = AdamState::for_params(p, 1e-3);
  EXPECT_THROW(adam_step(p, g, st), TrainingFault);
}

TEST(Checkpoint, RoundTripIsExact) {
  Rng rng = make_rng(13);
  const MlpParams p = MlpParams::init(3, 4, 2, rng);
  std::stringstream ss;
  save_checkpoint(ss, p);
  const MlpParams q = load_checkpoint(ss);
  for (Index k = 0; k < p.parameter_count(); ++k) EXPECT_EQ(p.at(k), q.at(k));
  std::stringstream bad("not a checkpoint");
  EXPECT_THROW(load_checkpoint(bad), ConfigError);
}

TEST(Determinism, SameSeedSameParameters) {
  Rng a = make_rng(14), b = make_rng(14);
  const MlpParams p = MlpParams::init(3, 4, 2, a), q = MlpParams::init(3, 4, 2, b);
  for (Index k = 0; k < p.parameter_count(); ++k) EXPECT_EQ(p.at(k), q.at(k));
}
