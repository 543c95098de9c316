#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "snot/csv.hpp"
#include "snot/linalg.hpp"
#include "snot/measures.hpp"
#include "snot/metrics.hpp"
#include "snot/train_config.hpp"

namespace snot {

// Runs fn(0..n_tasks-1) on up to `threads` workers; rethrows the first exception.
void parallel_for(std::size_t n_tasks, unsigned threads, const std::function<void(std::size_t)>& fn);

// ---- slope: E[W_2(mu~, mu_N^eps)] against N ----

struct SlopeParams {
  int m = 3;
  int d = 10;
  std::vector<double> eps_list{1e-3};
  std::vector<Index> n_list{250, 500, 1000, 2000, 4000, 8000};
  int replicates = 20;
  // mu~ is the grid of cell midpoints of [-1, 1]^m with this many cells per axis.
  int grid_per_axis = 16;
  NoiseKind noise = NoiseKind::GaussianIsotropic;
  std::uint64_t seed = 0;
  std::size_t max_entries = std::size_t{4096} * 4096;
};

struct SlopeRow {
  double eps = 0.0;
  Index n = 0;
  double mean = 0.0;
  double std_err = 0.0;
  int replicates = 0;
};

struct SlopeFit {
  double eps = 0.0;
  RateFit fit;
};

struct SlopeResult {
  std::vector<SlopeRow> rows;
  std::vector<SlopeFit> fits;
  std::vector<std::string> warnings;
};

Matrix cube_midpoint_grid(int m, int d, int per_axis);
SlopeParams parse_slope_params(const nlohmann::json& j);
SlopeResult run_slope(const SlopeParams& params, unsigned threads);
CsvTable slope_table(const SlopeResult& result);

// ---- conditioning: point mass -> standard Gaussian at constant eps ----

struct ConditioningParams {
  RunSpec base;
  std::vector<double> eps_list{0.5, 0.25, 0.1, 0.05};
  int seeds = 10;
  double threshold_factor = 1.5;
  std::optional<double> threshold;  // overrides the factor rule when set
  Index probes = 512;
};

struct ConditioningRun {
  double eps = 0.0;
  int seed_index = 0;
  std::vector<std::int64_t> iters;
  std::vector<double> map_error;  // mean |T(x) - x/eps|^2 on smoothed probes
  std::vector<double> d_target;
  double sup_jacobian = 0.0;
  bool faulted = false;
};

struct ConditioningSummary {
  double eps = 0.0;
  double median_iters_to_threshold = 0.0;
  int reached = 0;
  double final_error_variance = 0.0;
  double median_sup_jacobian = 0.0;
};

struct ConditioningResult {
  double threshold = 0.0;
  std::vector<ConditioningRun> runs;
  std::vector<ConditioningSummary> summary;
  // Per run: first logged iteration with map_error <= threshold, or the run length if never.
  std::vector<std::int64_t> iters_to_threshold;
  std::vector<char> reached;
};

ConditioningParams parse_conditioning_params(const nlohmann::json& j);
ConditioningResult run_conditioning(const ConditioningParams& params, unsigned threads);
CsvTable conditioning_runs_table(const ConditioningResult& result);
CsvTable conditioning_trace_table(const ConditioningResult& result);

// ---- terminal noise: map error against eps around eps_stat(N) ----

struct TerminalNoiseParams {
  RunSpec base;  // source and target must be uniform_cube_embedded with equal manifold_dim
  Index n = 2000;
  std::vector<double> eps_factors{0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
  int seeds = 5;
  double c0 = 1.0;
  Index eval_points = 2000;
};

struct TerminalNoiseRow {
  double factor = 0.0;
  double eps = 0.0;
  double mean_error = 0.0;
  double std_err = 0.0;
  std::vector<double> errors;
};

struct TerminalNoiseResult {
  double eps_stat = 0.0;
  double e_abs_y = 0.0;
  std::vector<TerminalNoiseRow> rows;
  // Smallest eps whose error exceeds the best error at eps <= eps_stat by more than 2 SE.
  std::optional<double> onset_eps;
};

// The monotone affine map between the two cubes (plus the target offset).
Matrix cube_affine_map(const DatasetSpec& source, const DatasetSpec& target, const Matrix& x);
TerminalNoiseParams parse_terminal_noise_params(const nlohmann::json& j);
TerminalNoiseResult run_terminal_noise(const TerminalNoiseParams& params, unsigned threads);
CsvTable terminal_noise_table(const TerminalNoiseResult& result);

// ---- schedule trace ----

struct ScheduleTraceParams {
  NoiseSchedule schedule;
  std::int64_t iterations = 20000;
  std::int64_t batch_size = 128;
};

ScheduleTraceParams parse_schedule_trace_params(const nlohmann::json& j);

}  // namespace snot
