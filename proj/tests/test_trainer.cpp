#include <gtest/gtest.h>

#include <cmath>

#include "snot/error.hpp"
#include "snot/rng.hpp"
#include "snot/trainer.hpp"

using namespace snot;

namespace {

Matrix gaussian(Index n, Index d, Rng& rng) {
  std::normal_distribution<double> g;
  Matrix x(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k) x(i, k) = g(rng);
  return x;
}

MlpParams identity_net(Index d) {
  MlpParams p = MlpParams::zeros(d, d, d);
  p.W1.setIdentity();
  p.b1.setConstant(100.0);
  p.W2.setIdentity();
  p.b2 = -p.b1;
  return p;
}

DatasetSpec dataset(DatasetKind kind, int d, Side side = Side::Source) {
  DatasetSpec s;
  s.kind = kind;
  s.ambient_dim = d;
  s.manifold_dim = d;
  s.side = side;
  return s;
}

TrainConfig small_config(int d) {
  TrainConfig c;
  c.d = d;
  c.hidden_width = 16;
  c.batch_size = 32;
  c.iterations = 60;
  c.k_t = 3;
  c.lr = 1e-3;
  c.log_every = 10;
  c.eval_size = 32;
  return c;
}

// Full objective including the penalty, in the sign convention of the requested side.
double objective(const MlpParams& v, const MlpParams& t, const Matrix& x, const Matrix& y, double tau, double lambda,
                 LossSide side) {
  const double l = loss_minimax(v, t, x, y, tau, 0.0, LossSide::Map).loss;
  return side == LossSide::Map ? l : lambda * r1_penalty(v, y) - l;
}

}  // namespace

TEST(Loss, ZeroPotentialIdentityMap) {
  Rng rng = make_rng(1);
  const auto r = loss_minimax(MlpParams::zeros(2, 3, 1), identity_net(2), gaussian(5, 2, rng), gaussian(7, 2, rng),
                              1.0, 0.0, LossSide::Map);
  EXPECT_NEAR(r.loss, 0.0, 1e-12);
}

TEST(Loss, ConstantMapSingleton) {
  MlpParams t = MlpParams::zeros(2, 3, 2);
  t.b2 << 1.0, -2.0;
  Matrix x(1, 2);
  x << 0.5, 0.5;
  const auto r = loss_minimax(MlpParams::zeros(2, 3, 1), t, x, x, 3.0, 0.0, LossSide::Map);
  EXPECT_NEAR(r.loss, 1.5 * (0.25 + 6.25), 1e-12);
}

TEST(Loss, GradientsMatchFiniteDifferences) {
  Rng rng = make_rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    MlpParams v = MlpParams::init(2, 4, 1, rng);
    MlpParams t = MlpParams::init(2, 4, 2, rng);
    const Matrix x = gaussian(6, 2, rng), y = gaussian(5, 2, rng);
    const double tau = 0.5 + rep * 0.1, lambda = rep % 2 ? 0.3 : 0.0;
    for (const LossSide side : {LossSide::Map, LossSide::Potential}) {
      const auto r = loss_minimax(v, t, x, y, tau, lambda, side);
      MlpParams& p = side == LossSide::Map ? t : v;
      const double h = 1e-6;
      for (Index k = 0; k < p.parameter_count(); ++k) {
        const double keep = p.at(k);
        p.at(k) = keep + h;
        const double up = objective(v, t, x, y, tau, lambda, side);
        p.at(k) = keep - h;
        const double down = objective(v, t, x, y, tau, lambda, side);
        p.at(k) = keep;
        const double fd = (up - down) / (2 * h);
        EXPECT_LE(std::abs(fd - r.grad.at(k)), 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(RecoveredMap, MatchesForward) {
  Rng rng = make_rng(3);
  const Matrix x = gaussian(9, 3, rng);
  EXPECT_LT((recovered_map_eval(identity_net(3), x) - x).cwiseAbs().maxCoeff(), 1e-12);
  MlpParams z = MlpParams::zeros(3, 2, 3);
  z.b2 << 1, 2, 3;
  const Matrix out = recovered_map_eval(z, x);
  for (Index i = 0; i < 9; ++i) EXPECT_EQ(out.row(i), z.b2.transpose());
  const MlpParams p = MlpParams::init(3, 5, 3, rng);
  EXPECT_EQ(recovered_map_eval(p, x), forward(p, x));
}

TEST(Batches, SmoothedBatchEqualsSmooth) {
  TrainConfig c = small_config(3);
  c.seed = 17;
  const DatasetSpec src = dataset(DatasetKind::StandardGaussian, 3);
  for (std::uint64_t counter : {0u, 5u, 99u}) {
    const Matrix raw = raw_source_batch(c, src, nullptr, counter);
    const Matrix expect = smooth(EmpiricalMeasure::uniform(raw), NoiseModel{c.noise, 3}, 0.3,
                                 batch_seeds(c.seed, counter).noise)
                              .points;
    EXPECT_EQ(smoothed_source_batch(c, src, nullptr, counter, 0.3), expect);
  }
}

TEST(Train, PointMassToPointMass) {
  TrainConfig c;
  c.d = 1;
  c.hidden_width = 32;
  c.batch_size = 64;
  c.iterations = 2000;
  c.k_t = 5;
  c.lr = 1e-3;
  c.log_every = 500;
  const DatasetSpec pm = dataset(DatasetKind::PointMass, 1);
  const TrainResult r = train(c, pm, dataset(DatasetKind::PointMass, 1, Side::Target));
  ASSERT_FALSE(r.fault);
  const Matrix tx = forward(r.t, sample(pm, 100, 1).points);
  EXPECT_LT(tx.cwiseAbs().mean(), 0.05);
  EXPECT_EQ(r.records.size(), 4u);
}

TEST(Train, DeterministicRecords) {
  TrainConfig c = small_config(2);
  c.schedule = RateOptimalSchedule{2, 1.0, 1.0, 0.05, 20};
  const DatasetSpec src = dataset(DatasetKind::StandardGaussian, 2);
  const DatasetSpec tgt = dataset(DatasetKind::UniformCubeEmbedded, 2, Side::Target);
  const TrainResult a = train(c, src, tgt), b = train(c, src, tgt);
  ASSERT_EQ(a.records.size(), 6u);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].iter, b.records[i].iter);
    EXPECT_EQ(a.records[i].loss, b.records[i].loss);
    EXPECT_EQ(a.records[i].d_cost, b.records[i].d_cost);
    EXPECT_EQ(a.records[i].d_target, b.records[i].d_target);
  }
  for (Index k = 0; k < a.t.parameter_count(); ++k) EXPECT_EQ(a.t.at(k), b.t.at(k));
}

TEST(Train, RecordEpsFollowsSchedule) {
  TrainConfig c = small_config(2);
  c.schedule = StepwiseLinearSchedule{0.3, 0.05, 20, 60};
  const TrainResult r = train(c, dataset(DatasetKind::StandardGaussian, 2),
                              dataset(DatasetKind::StandardGaussian, 2, Side::Target));
  std::int64_t prev = 0;
  for (const auto& rec : r.records) {
    EXPECT_GT(rec.iter, prev);
    prev = rec.iter;
    EXPECT_EQ(rec.eps, effective_eps(c.schedule, rec.iter - 1, c.batch_size));
  }
}

TEST(Train, RecoveryResidualShrinks) {
  TrainConfig c = small_config(1);
  c.hidden_width = 32;
  c.batch_size = 64;
  c.iterations = 1500;
  c.k_t = 5;
  c.audit_every = 100;
  c.log_every = 500;
  DatasetSpec src = dataset(DatasetKind::StandardGaussian, 1);
  DatasetSpec tgt = dataset(DatasetKind::UniformCubeEmbedded, 1, Side::Target);
  const TrainResult r = train(c, src, tgt);
  ASSERT_FALSE(r.fault);
  ASSERT_GE(r.audits.size(), 2u);
  EXPECT_LT(r.audits.back().recovery_residual, 10.0 * r.audits.front().recovery_residual + 1e-12);
  for (const auto& a : r.audits) EXPECT_GE(a.recovery_residual, -1e-9);
}

TEST(Train, DivergenceBecomesFault) {
  TrainConfig c = small_config(1);
  c.divergence_threshold = 1e-12;
  const TrainResult r = train(c, dataset(DatasetKind::StandardGaussian, 1),
                              dataset(DatasetKind::StandardGaussian, 1, Side::Target));
  ASSERT_TRUE(r.fault.has_value());
  EXPECT_LT(r.iterations_run, c.iterations);
}

TEST(Train, InvalidConfigThrows) {
  TrainConfig c = small_config(1);
  c.k_t = 0;
  EXPECT_THROW(train(c, dataset(DatasetKind::PointMass, 1), dataset(DatasetKind::PointMass, 1, Side::Target)),
               ConfigError);
  c = small_config(2);
  EXPECT_THROW(train(c, dataset(DatasetKind::PointMass, 1), dataset(DatasetKind::PointMass, 1, Side::Target)),
               ConfigError);
}

TEST(Tables, Headers) {
  EXPECT_EQ(records_table({}).header,
            (std::vector<std::string>{"iter", "eps", "loss", "d_cost", "d_target", "wall_ms"}));
}
