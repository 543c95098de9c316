#include "snot/trainer.hpp"

#include <chrono>
#include <cmath>

#include "snot/ctransform.hpp"
#include "snot/error.hpp"
#include "snot/metrics.hpp"

namespace snot {

void TrainConfig::validate() const {
  if (d < 1) throw ConfigError("config: d must be positive");
  if (hidden_width < 1) throw ConfigError("config: hidden_width must be positive");
  if (batch_size < 1) throw ConfigError("config: batch_size must be positive");
  if (iterations < 1) throw ConfigError("config: iterations must be positive");
  if (k_t < 1) throw ConfigError("config: K_T must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("config: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("config: Adam betas must lie in [0, 1)");
  }
  if (!(tau > 0.0)) throw ConfigError("config: tau must be positive");
  if (!(lambda_r1 >= 0.0)) throw ConfigError("config: lambda_R1 must be nonnegative");
  if (log_every < 1) throw ConfigError("config: log_every must be positive");
  if (eval_size < 1) throw ConfigError("config: eval_size must be positive");
  if (eval_noise && !(*eval_noise >= 0.0)) throw ConfigError("config: eval_noise must be nonnegative");
  if (source_pool < 0) throw ConfigError("config: source_pool must be nonnegative");
  if (audit_every < 0) throw ConfigError("config: audit_every must be nonnegative");
  if (!(divergence_threshold > 0.0)) throw ConfigError("config: divergence threshold must be positive");
  snot::validate(schedule);
}

LossResult loss_minimax(const MlpParams& v, const MlpParams& t, const Matrix& x_batch,
                        const Matrix& y_batch, double tau, double lambda_r1, LossSide side) {
  if (x_batch.rows() < 1 || y_batch.rows() < 1) throw ShapeError("loss_minimax: empty batch");
  if (x_batch.cols() != t.input_dim() || t.output_dim() != v.input_dim() || y_batch.cols() != v.input_dim()) {
    throw ShapeError("loss_minimax: dimension mismatch");
  }
  if (v.output_dim() != 1) throw ShapeError("loss_minimax: potential network must be scalar");
  const double bx = static_cast<double>(x_batch.rows());
  const double by = static_cast<double>(y_batch.rows());

  ForwardCache ct, cvt, cvy;
  const Matrix tx = forward(t, x_batch, &ct);
  const Matrix vtx = forward(v, tx, &cvt);
  const Matrix vy = forward(v, y_batch, &cvy);

  LossResult r;
  r.loss = 0.5 * tau * (x_batch - tx).rowwise().squaredNorm().sum() / bx - vtx.sum() / bx + vy.sum() / by;
  if (!std::isfinite(r.loss)) throw TrainingFault("loss_minimax: non-finite loss");

  if (side == LossSide::Map) {
    Matrix dv_dy;
    backward(v, cvt, Matrix::Ones(x_batch.rows(), 1), &dv_dy);
    const Matrix g = (tau * (tx - x_batch) - dv_dy) / bx;
    r.grad = backward(t, ct, g);
    if (lambda_r1 > 0.0) r.r1 = r1_penalty(v, y_batch);
  } else {
    r.grad = backward(v, cvt, Matrix::Constant(x_batch.rows(), 1, 1.0 / bx));
    r.grad.add_scaled(backward(v, cvy, Matrix::Constant(y_batch.rows(), 1, -1.0 / by)), 1.0);
    if (lambda_r1 > 0.0) {
      MlpParams gr;
      r.r1 = r1_penalty(v, y_batch, &gr);
      r.grad.add_scaled(gr, lambda_r1);
    }
  }
  return r;
}

Matrix recovered_map_eval(const MlpParams& t, const Matrix& x_points) { return forward(t, x_points); }

BatchSeeds batch_seeds(std::uint64_t seed, std::uint64_t counter) {
  return {derive_seed(derive_seed(seed, streams::kSource), counter),
          derive_seed(derive_seed(seed, streams::kNoise), counter)};
}

Matrix raw_source_batch(const TrainConfig& config, const DatasetSpec& source, const Matrix* pool,
                        std::uint64_t counter) {
  Rng rng = make_rng(batch_seeds(config.seed, counter).source);
  if (!pool) return sample_points(source, config.batch_size, rng);
  std::uniform_int_distribution<Index> pick(0, pool->rows() - 1);
  Matrix x(config.batch_size, pool->cols());
  for (Index i = 0; i < x.rows(); ++i) x.row(i) = pool->row(pick(rng));
  return x;
}

Matrix smoothed_source_batch(const TrainConfig& config, const DatasetSpec& source, const Matrix* pool,
                             std::uint64_t counter, double eps) {
  const EmpiricalMeasure raw = EmpiricalMeasure::uniform(raw_source_batch(config, source, pool, counter));
  return smooth(raw, NoiseModel{config.noise, config.d}, eps, batch_seeds(config.seed, counter).noise).points;
}

namespace {

Matrix target_batch(const TrainConfig& config, const DatasetSpec& target, std::uint64_t counter) {
  Rng rng = make_rng(derive_seed(derive_seed(config.seed, streams::kTarget), counter));
  return sample_points(target, config.batch_size, rng);
}

// Fixed evaluation samples; the source noise directions are frozen so that only eps varies.
struct EvalSet {
  Matrix source_raw;
  Matrix source_noise;
  EmpiricalMeasure target;
  double cached_eps = -1.0;
  double cached_w2 = 0.0;

  EmpiricalMeasure source_at(double eps) const {
    return EmpiricalMeasure::uniform(source_raw + eps * source_noise);
  }
};

AuditRecord audit(const MlpParams& v, const MlpParams& t, const EmpiricalMeasure& mu,
                  const EmpiricalMeasure& nu, double tau) {
  AuditRecord a;
  const Matrix tx = forward(t, mu.points);
  const Vector vtx = forward(v, tx).col(0);
  a.amortized = mu.weights.dot(0.5 * tau * (mu.points - tx).rowwise().squaredNorm() - vtx);
  GridPotential grid{nu.points, forward(v, nu.points).col(0), Cost{CostKind::SqEuclideanHalf, tau}};
  a.discrete = mu.weights.dot(c_transform(grid, mu.points).values);
  a.gap = a.amortized - a.discrete;
  a.recovery_residual = recovery_residual(grid, tx, mu.points, mu.weights);
  return a;
}

}  // namespace

TrainResult train(const TrainConfig& config, const DatasetSpec& source, const DatasetSpec& target,
                  const TrainHooks& hooks) {
  config.validate();
  source.validate();
  target.validate();
  if (source.ambient_dim != config.d || target.ambient_dim != config.d) {
    throw ConfigError("train: dataset dimensions differ from d");
  }
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  {
    Rng rt = make_rng(config.seed, streams::kInitT);
    Rng rv = make_rng(config.seed, streams::kInitV);
    result.t = MlpParams::init(config.d, config.hidden_width, config.d, rt);
    result.v = MlpParams::init(config.d, config.hidden_width, 1, rv);
  }
  MlpParams& t = result.t;
  MlpParams& v = result.v;
  AdamState adam_t = AdamState::for_params(t, config.lr, config.beta1, config.beta2);
  AdamState adam_v = AdamState::for_params(v, config.lr, config.beta1, config.beta2);

  Matrix pool;
  if (config.source_pool > 0) {
    Rng rp = make_rng(config.seed, streams::kSource);
    pool = sample_points(source, config.source_pool, rp);
  }
  const Matrix* pool_ptr = config.source_pool > 0 ? &pool : nullptr;

  EvalSet eval;
  {
    Rng re = make_rng(config.seed, streams::kEval);
    eval.source_raw = sample_points(source, config.eval_size, re);
    eval.source_noise = draw_noise(NoiseModel{config.noise, config.d}, config.eval_size, re);
    eval.target = EmpiricalMeasure::uniform(sample_points(target, config.eval_size, re));
  }

  std::uint64_t source_counter = 0;
  std::uint64_t target_counter = 0;
  double last_loss = 0.0;
  try {
    for (std::int64_t k = 0; k < config.iterations; ++k) {
      const double eps = effective_eps(config.schedule, k, config.batch_size);
      for (int s = 0; s < config.k_t; ++s) {
        const Matrix x = smoothed_source_batch(config, source, pool_ptr, source_counter++, eps);
        const Matrix y = target_batch(config, target, target_counter++);
        const LossResult r = loss_minimax(v, t, x, y, config.tau, 0.0, LossSide::Map);
        adam_step(t, r.grad, adam_t);
      }
      const Matrix x = smoothed_source_batch(config, source, pool_ptr, source_counter++, eps);
      const Matrix y = target_batch(config, target, target_counter++);
      const LossResult r = loss_minimax(v, t, x, y, config.tau, config.lambda_r1, LossSide::Potential);
      adam_step(v, r.grad, adam_v);
      last_loss = r.loss;
      result.iterations_run = k + 1;
      if (std::abs(last_loss) > config.divergence_threshold) {
        throw TrainingFault("train: loss magnitude exceeded the divergence threshold");
      }

      const std::int64_t done = k + 1;
      const double eval_eps = config.eval_noise.value_or(eps);
      if (done % config.log_every == 0) {
        const EmpiricalMeasure mu = eval.source_at(eval_eps);
        if (eval_eps != eval.cached_eps) {
          eval.cached_w2 = w2_squared(mu, eval.target);
          eval.cached_eps = eval_eps;
        }
        const Matrix tx = forward(t, mu.points);
        TrainRecord rec;
        rec.iter = done;
        rec.eps = eps;
        rec.loss = last_loss;
        rec.d_cost = std::abs(eval.cached_w2 - mu.weights.dot((tx - mu.points).rowwise().squaredNorm()));
        rec.d_target = d_target(tx, mu, eval.target);
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        result.records.push_back(rec);
        if (hooks.on_record) hooks.on_record(rec);
        if (hooks.on_log) hooks.on_log(done, eps, v, t);
      }
      if (config.audit_every > 0 && done % config.audit_every == 0) {
        AuditRecord a = audit(v, t, eval.source_at(eval_eps), eval.target, config.tau);
        a.iter = done;
        result.audits.push_back(a);
      }
    }
  } catch (const TrainingFault& e) {
    result.fault = e.what();
  }
  return result;
}

CsvTable records_table(const std::vector<TrainRecord>& records) {
  CsvTable t;
  t.header = {"iter", "eps", "loss", "d_cost", "d_target", "wall_ms"};
  for (const auto& r : records) {
    t.rows.push_back({static_cast<double>(r.iter), r.eps, r.loss, r.d_cost, r.d_target, r.wall_ms});
  }
  return t;
}

CsvTable audits_table(const std::vector<AuditRecord>& audits) {
  CsvTable t;
  t.header = {"iter", "amortized", "discrete", "gap", "recovery_residual"};
  for (const auto& a : audits) {
    t.rows.push_back({static_cast<double>(a.iter), a.amortized, a.discrete, a.gap, a.recovery_residual});
  }
  return t;
}

}  // namespace snot
