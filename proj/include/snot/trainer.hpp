#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "snot/discrete_ot.hpp"
#include "snot/linalg.hpp"
#include "snot/measures.hpp"
#include "snot/nn.hpp"
#include "snot/schedule.hpp"

namespace snot {

struct TrainConfig {
  int d = 2;
  int hidden_width = 256;
  std::int64_t batch_size = 128;
  std::int64_t iterations = 20000;
  int k_t = 20;
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double tau = 1.0;
  double lambda_r1 = 0.0;
  NoiseSchedule schedule = ConstantSchedule{0.0};
  NoiseKind noise = NoiseKind::GaussianIsotropic;
  std::uint64_t seed = 0;

  std::int64_t log_every = 100;
  // Rows of the fixed evaluation samples used for d_cost / d_target.
  Index eval_size = 256;
  // Noise level of the evaluation source; empty means the schedule's current level.
  std::optional<double> eval_noise;
  // Size of a fixed source sample that batches are drawn from; 0 samples afresh every batch.
  Index source_pool = 0;
  // Audit cadence in iterations; 0 disables the discrete-argmin audit.
  std::int64_t audit_every = 0;
  double divergence_threshold = 1e6;

  void validate() const;
};

struct TrainRecord {
  std::int64_t iter = 0;
  double eps = 0.0;
  double loss = 0.0;
  double d_cost = 0.0;
  double d_target = 0.0;
  double wall_ms = 0.0;
};

struct AuditRecord {
  std::int64_t iter = 0;
  double amortized = 0.0;  // mean of tau/2 |x - T(x)|^2 - V(T(x))
  double discrete = 0.0;   // mean of the batch-wise V^c(x)
  double gap = 0.0;        // amortized - discrete, >= 0 up to the candidate set
  double recovery_residual = 0.0;
};

enum class LossSide { Map, Potential };

struct LossResult {
  double loss = 0.0;  // empirical L(V, T) without the penalty
  double r1 = 0.0;    // mean |grad_y V(y)|^2 on the target batch
  // Descent direction for the requested side: grad of L for the map, and
  // grad of (lambda_r1 * R1 - L) for the potential, which ascends L.
  MlpParams grad;
};

LossResult loss_minimax(const MlpParams& v, const MlpParams& t, const Matrix& x_batch,
                        const Matrix& y_batch, double tau, double lambda_r1, LossSide side);

// T applied row-wise.
Matrix recovered_map_eval(const MlpParams& t, const Matrix& x_points);

// The counter-th source batch: raw samples (or pool rows) plus eps-scaled noise,
// each drawn from its own derived seed.
struct BatchSeeds {
  std::uint64_t source;
  std::uint64_t noise;
};
BatchSeeds batch_seeds(std::uint64_t seed, std::uint64_t counter);
Matrix raw_source_batch(const TrainConfig& config, const DatasetSpec& source, const Matrix* pool,
                        std::uint64_t counter);
Matrix smoothed_source_batch(const TrainConfig& config, const DatasetSpec& source, const Matrix* pool,
                             std::uint64_t counter, double eps);

struct TrainResult {
  MlpParams v;
  MlpParams t;
  std::vector<TrainRecord> records;
  std::vector<AuditRecord> audits;
  std::optional<std::string> fault;
  std::int64_t iterations_run = 0;
};

struct TrainHooks {
  // Called with every emitted record.
  std::function<void(const TrainRecord&)> on_record;
  // Called at every logging step with the current networks, for experiment-specific metrics.
  std::function<void(std::int64_t iter, double eps, const MlpParams& v, const MlpParams& t)> on_log;
};

TrainResult train(const TrainConfig& config, const DatasetSpec& source, const DatasetSpec& target,
                  const TrainHooks& hooks = {});

CsvTable records_table(const std::vector<TrainRecord>& records);
CsvTable audits_table(const std::vector<AuditRecord>& audits);

}  // namespace snot
