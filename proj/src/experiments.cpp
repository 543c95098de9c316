#include "snot/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "snot/error.hpp"
#include "snot/rng.hpp"
#include "snot/schedule.hpp"
#include "snot/trainer.hpp"

namespace snot {
namespace {

using nlohmann::json;

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Unbiased sample variance; 0 for a single value.
double variance_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double std_err_of(const std::vector<double>& v) {
  return std::sqrt(variance_of(v) / static_cast<double>(v.size()));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

RunSpec parse_train_block(const json& j, const json& defaults) {
  json merged = defaults;
  if (j.contains("train")) merged.merge_patch(j.at("train"));
  return parse_run_spec(merged);
}

}  // namespace

void parallel_for(std::size_t n_tasks, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_tasks)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n_tasks) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next.store(n_tasks);
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---- slope ----

Matrix cube_midpoint_grid(int m, int d, int per_axis) {
  if (m < 1 || m > d || per_axis < 1) throw ConfigError("grid: need 1 <= m <= d and per_axis >= 1");
  Index count = 1;
  for (int k = 0; k < m; ++k) count *= per_axis;
  Matrix g = Matrix::Zero(count, d);
  const double h = 2.0 / per_axis;
  for (Index r = 0; r < count; ++r) {
    Index rem = r;
    for (int k = m - 1; k >= 0; --k) {
      g(r, k) = -1.0 + (static_cast<double>(rem % per_axis) + 0.5) * h;
      rem /= per_axis;
    }
  }
  return g;
}

SlopeParams parse_slope_params(const json& j) {
  check_keys(j, {"m", "d", "eps", "N", "replicates", "grid_per_axis", "noise", "seed", "max_entries"}, "slope");
  SlopeParams p;
  p.m = get_or<int>(j, "m", p.m);
  p.d = get_or<int>(j, "d", p.d);
  p.eps_list = get_or<std::vector<double>>(j, "eps", p.eps_list);
  p.n_list = get_or<std::vector<Index>>(j, "N", p.n_list);
  p.replicates = get_or<int>(j, "replicates", p.replicates);
  p.grid_per_axis = get_or<int>(j, "grid_per_axis", p.grid_per_axis);
  p.noise = noise_kind_from_string(get_or<std::string>(j, "noise", "gaussian"));
  p.seed = get_or<std::uint64_t>(j, "seed", p.seed);
  p.max_entries = get_or<std::size_t>(j, "max_entries", p.max_entries);
  if (p.m < 1 || p.m > p.d) throw ConfigError("slope: need 1 <= m <= d");
  if (p.replicates < 1) throw ConfigError("slope: replicates must be positive");
  if (p.eps_list.empty() || p.n_list.empty()) throw ConfigError("slope: eps and N lists must be nonempty");
  for (double e : p.eps_list) {
    if (!(e >= 0.0)) throw ConfigError("slope: eps values must be nonnegative");
  }
  for (Index n : p.n_list) {
    if (n < 1) throw ConfigError("slope: N values must be positive");
  }
  return p;
}

SlopeResult run_slope(const SlopeParams& p, unsigned threads) {
  const Matrix grid = cube_midpoint_grid(p.m, p.d, p.grid_per_axis);
  const EmpiricalMeasure reference = EmpiricalMeasure::uniform(grid);
  DatasetSpec spec;
  spec.kind = DatasetKind::UniformCubeEmbedded;
  spec.ambient_dim = p.d;
  spec.manifold_dim = p.m;
  const NoiseModel noise{p.noise, p.d};
  SolverOptions options;
  options.max_entries = p.max_entries;

  SlopeResult result;
  std::vector<Index> feasible;
  for (Index n : p.n_list) {
    if (static_cast<std::size_t>(n) * static_cast<std::size_t>(grid.rows()) > p.max_entries) {
      result.warnings.push_back("N=" + std::to_string(n) + " skipped: exceeds the solver cap");
    } else {
      feasible.push_back(n);
    }
  }

  const std::size_t ne = p.eps_list.size(), nn = feasible.size(), nr = static_cast<std::size_t>(p.replicates);
  std::vector<double> values(ne * nn * nr, 0.0);
  // Largest problems first so the tail of the schedule is short.
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return feasible[(a / nr) % nn] > feasible[(b / nr) % nn];
  });
  parallel_for(order.size(), threads, [&](std::size_t k) {
    const std::size_t task = order[k];
    const std::size_t r = task % nr, in = (task / nr) % nn, ie = task / (nr * nn);
    // The raw sample depends only on (N, replicate), so every eps sees the same draws.
    const std::uint64_t base = derive_seed(derive_seed(p.seed, streams::kReplicate + r), static_cast<std::uint64_t>(feasible[in]));
    const EmpiricalMeasure raw = sample(spec, feasible[in], derive_seed(base, streams::kSource));
    const EmpiricalMeasure noisy = smooth(raw, noise, p.eps_list[ie], derive_seed(base, streams::kNoise));
    values[task] = wasserstein(reference, noisy, 2, options);
  });

  for (std::size_t ie = 0; ie < ne; ++ie) {
    std::vector<RatePoint> points;
    for (std::size_t in = 0; in < nn; ++in) {
      std::vector<double> reps(values.begin() + static_cast<std::ptrdiff_t>((ie * nn + in) * nr),
                               values.begin() + static_cast<std::ptrdiff_t>((ie * nn + in + 1) * nr));
      SlopeRow row{p.eps_list[ie], feasible[in], mean_of(reps), std_err_of(reps), p.replicates};
      result.rows.push_back(row);
      points.push_back({static_cast<double>(row.n), row.mean, row.replicates, row.std_err});
    }
    if (points.size() >= 3) {
      result.fits.push_back({p.eps_list[ie], fit_rate(points)});
    } else {
      result.warnings.push_back("eps=" + format_double(p.eps_list[ie]) + ": fewer than 3 N values, no fit");
    }
  }
  return result;
}

CsvTable slope_table(const SlopeResult& result) {
  CsvTable t;
  t.header = {"eps", "N", "mean_w2", "std_err", "replicates"};
  for (const auto& r : result.rows) {
    t.rows.push_back({r.eps, static_cast<double>(r.n), r.mean, r.std_err, static_cast<double>(r.replicates)});
  }
  return t;
}

// ---- conditioning ----

namespace {

json default_conditioning_run() {
  return json{{"d", 10},
              {"hidden_width", 64},
              {"batch_size", 128},
              {"iterations", 4000},
              {"K_T", 10},
              {"lr", 1e-4},
              {"log_every", 200},
              {"source", {{"kind", "point_mass"}, {"ambient_dim", 10}}},
              {"target", {{"kind", "standard_gaussian"}, {"ambient_dim", 10}}}};
}

}  // namespace

ConditioningParams parse_conditioning_params(const json& j) {
  check_keys(j, {"eps", "seeds", "threshold_factor", "threshold", "probes", "train"}, "conditioning");
  ConditioningParams p;
  p.base = parse_train_block(j, default_conditioning_run());
  p.eps_list = get_or<std::vector<double>>(j, "eps", p.eps_list);
  p.seeds = get_or<int>(j, "seeds", p.seeds);
  p.threshold_factor = get_or<double>(j, "threshold_factor", p.threshold_factor);
  if (j.contains("threshold") && !j.at("threshold").is_null()) p.threshold = get_or<double>(j, "threshold", 0.0);
  p.probes = get_or<Index>(j, "probes", p.probes);
  if (p.base.source.kind != DatasetKind::PointMass || p.base.target.kind != DatasetKind::StandardGaussian) {
    throw ConfigError("conditioning: source must be point_mass and target standard_gaussian");
  }
  if (p.eps_list.empty()) throw ConfigError("conditioning: eps list must be nonempty");
  for (double e : p.eps_list) {
    if (!(e > 0.0)) throw ConfigError("conditioning: eps values must be positive");
  }
  if (p.seeds < 1 || p.probes < 1) throw ConfigError("conditioning: seeds and probes must be positive");
  return p;
}

ConditioningResult run_conditioning(const ConditioningParams& p, unsigned threads) {
  const int d = p.base.config.d;
  const Vector location = p.base.source.params.location.size() ? p.base.source.params.location : Vector::Zero(d);
  Matrix probe_noise;
  {
    Rng rng = make_rng(p.base.config.seed, streams::kEval);
    probe_noise = draw_noise(NoiseModel{p.base.config.noise, d}, p.probes, rng);
  }

  ConditioningResult result;
  const std::size_t ne = p.eps_list.size(), ns = static_cast<std::size_t>(p.seeds);
  result.runs.resize(ne * ns);
  parallel_for(result.runs.size(), threads, [&](std::size_t task) {
    const std::size_t ie = task / ns, is = task % ns;
    const double eps = p.eps_list[ie];
    TrainConfig config = p.base.config;
    config.schedule = ConstantSchedule{eps};
    config.seed = derive_seed(p.base.config.seed, streams::kReplicate + is);
    // Probes are the smoothed source; the exact map sends them to probe_noise.
    Matrix probes = probe_noise * eps;
    probes.rowwise() += location.transpose();

    ConditioningRun& run = result.runs[task];
    run.eps = eps;
    run.seed_index = static_cast<int>(is);
    TrainHooks hooks;
    hooks.on_record = [&](const TrainRecord& r) { run.d_target.push_back(r.d_target); };
    hooks.on_log = [&](std::int64_t iter, double, const MlpParams&, const MlpParams& t) {
      run.iters.push_back(iter);
      run.map_error.push_back((forward(t, probes) - probe_noise).rowwise().squaredNorm().mean());
    };
    const TrainResult tr = train(config, p.base.source, p.base.target, hooks);
    run.faulted = tr.fault.has_value();
    run.sup_jacobian = sup_jacobian_norm(tr.t, probes);
  });

  // Threshold from the largest eps: factor x median over seeds of each run's best error.
  const std::size_t largest = static_cast<std::size_t>(
      std::max_element(p.eps_list.begin(), p.eps_list.end()) - p.eps_list.begin());
  if (p.threshold) {
    result.threshold = *p.threshold;
  } else {
    std::vector<double> best;
    for (std::size_t is = 0; is < ns; ++is) {
      const auto& e = result.runs[largest * ns + is].map_error;
      best.push_back(e.empty() ? std::numeric_limits<double>::infinity() : *std::min_element(e.begin(), e.end()));
    }
    result.threshold = p.threshold_factor * median_of(best);
  }

  for (const auto& run : result.runs) {
    std::int64_t hit = p.base.config.iterations;
    bool reached = false;
    for (std::size_t k = 0; k < run.iters.size(); ++k) {
      if (run.map_error[k] <= result.threshold) {
        hit = run.iters[k];
        reached = true;
        break;
      }
    }
    result.iters_to_threshold.push_back(hit);
    result.reached.push_back(reached ? 1 : 0);
  }

  for (std::size_t ie = 0; ie < ne; ++ie) {
    ConditioningSummary s;
    s.eps = p.eps_list[ie];
    std::vector<double> iters, finals, jac;
    for (std::size_t is = 0; is < ns; ++is) {
      const std::size_t k = ie * ns + is;
      const auto& run = result.runs[k];
      iters.push_back(static_cast<double>(result.iters_to_threshold[k]));
      s.reached += result.reached[k];
      // A faulted run keeps its last logged error; with none logged it counts as non-finite.
      finals.push_back(run.map_error.empty() ? std::numeric_limits<double>::infinity() : run.map_error.back());
      jac.push_back(run.sup_jacobian);
    }
    s.median_iters_to_threshold = median_of(iters);
    s.final_error_variance = variance_of(finals);
    s.median_sup_jacobian = median_of(jac);
    result.summary.push_back(s);
  }
  return result;
}

CsvTable conditioning_runs_table(const ConditioningResult& result) {
  CsvTable t;
  t.header = {"eps", "seed_index", "iters_to_threshold", "reached", "final_error", "min_error", "sup_jacobian", "faulted"};
  for (std::size_t k = 0; k < result.runs.size(); ++k) {
    const auto& r = result.runs[k];
    const double final_error = r.map_error.empty() ? std::nan("") : r.map_error.back();
    const double min_error = r.map_error.empty() ? std::nan("") : *std::min_element(r.map_error.begin(), r.map_error.end());
    t.rows.push_back({r.eps, static_cast<double>(r.seed_index), static_cast<double>(result.iters_to_threshold[k]),
                      static_cast<double>(result.reached[k]), final_error, min_error, r.sup_jacobian,
                      r.faulted ? 1.0 : 0.0});
  }
  return t;
}

CsvTable conditioning_trace_table(const ConditioningResult& result) {
  CsvTable t;
  t.header = {"eps", "seed_index", "iter", "map_error", "d_target"};
  for (const auto& r : result.runs) {
    for (std::size_t k = 0; k < r.iters.size(); ++k) {
      t.rows.push_back({r.eps, static_cast<double>(r.seed_index), static_cast<double>(r.iters[k]), r.map_error[k],
                        k < r.d_target.size() ? r.d_target[k] : std::nan("")});
    }
  }
  return t;
}

// ---- terminal noise ----

namespace {

json default_terminal_noise_run() {
  return json{{"d", 5},
              {"hidden_width", 64},
              {"batch_size", 128},
              {"iterations", 2000},
              {"K_T", 10},
              {"lr", 1e-3},
              {"log_every", 250},
              {"source", {{"kind", "uniform_cube_embedded"}, {"ambient_dim", 5}, {"manifold_dim", 3}, {"low", 0.0}, {"high", 1.0}}},
              {"target",
               {{"kind", "uniform_cube_embedded"},
                {"ambient_dim", 5},
                {"manifold_dim", 3},
                {"low", 0.0},
                {"high", 2.0},
                {"offset", {0.0, 0.0, 0.0, 0.5, 0.5}}}}};
}

}  // namespace

Matrix cube_affine_map(const DatasetSpec& source, const DatasetSpec& target, const Matrix& x) {
  const double scale = (target.params.high - target.params.low) / (source.params.high - source.params.low);
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  const Vector src_shift = source.params.offset.size() ? source.params.offset : Vector::Zero(x.cols());
  for (Index k = 0; k < source.manifold_dim; ++k) {
    out.col(k) = (target.params.low + scale * ((x.col(k).array() - src_shift[k]) - source.params.low)).matrix();
  }
  if (target.params.offset.size()) out.rowwise() += target.params.offset.transpose();
  return out;
}

TerminalNoiseParams parse_terminal_noise_params(const json& j) {
  check_keys(j, {"N", "eps_factors", "seeds", "c0", "eval_points", "train"}, "terminal-noise");
  TerminalNoiseParams p;
  p.base = parse_train_block(j, default_terminal_noise_run());
  p.n = get_or<Index>(j, "N", p.n);
  p.eps_factors = get_or<std::vector<double>>(j, "eps_factors", p.eps_factors);
  p.seeds = get_or<int>(j, "seeds", p.seeds);
  p.c0 = get_or<double>(j, "c0", p.c0);
  p.eval_points = get_or<Index>(j, "eval_points", p.eval_points);
  const auto& s = p.base.source;
  const auto& t = p.base.target;
  if (s.kind != DatasetKind::UniformCubeEmbedded || t.kind != DatasetKind::UniformCubeEmbedded ||
      s.manifold_dim != t.manifold_dim) {
    throw ConfigError("terminal-noise: source and target must be uniform_cube_embedded with equal manifold_dim");
  }
  if (!(s.params.high > s.params.low) || !(t.params.high > t.params.low)) {
    throw ConfigError("terminal-noise: cubes must have positive side length");
  }
  if (p.n < 2 || p.seeds < 1 || p.eval_points < 1 || !(p.c0 > 0.0)) {
    throw ConfigError("terminal-noise: N >= 2, seeds, eval_points and c0 must be positive");
  }
  if (p.eps_factors.empty()) throw ConfigError("terminal-noise: eps_factors must be nonempty");
  std::sort(p.eps_factors.begin(), p.eps_factors.end());
  for (double f : p.eps_factors) {
    if (!(f >= 0.0)) throw ConfigError("terminal-noise: eps factors must be nonnegative");
  }
  return p;
}

TerminalNoiseResult run_terminal_noise(const TerminalNoiseParams& p, unsigned threads) {
  TerminalNoiseResult result;
  const TrainConfig& base = p.base.config;
  result.e_abs_y = cached_mean_noise_norm(NoiseModel{base.noise, base.d});
  result.eps_stat = epsilon_stat(static_cast<std::uint64_t>(p.n), p.base.source.manifold_dim, result.e_abs_y, p.c0);

  const Matrix eval_x = sample(p.base.source, p.eval_points, derive_seed(base.seed, streams::kEval)).points;
  const Matrix eval_ref = cube_affine_map(p.base.source, p.base.target, eval_x);

  const std::size_t nf = p.eps_factors.size(), ns = static_cast<std::size_t>(p.seeds);
  std::vector<double> errors(nf * ns, 0.0);
  parallel_for(errors.size(), threads, [&](std::size_t task) {
    const std::size_t i_f = task / ns, is = task % ns;
    TrainConfig config = base;
    config.schedule = ConstantSchedule{p.eps_factors[i_f] * result.eps_stat};
    config.source_pool = p.n;
    config.seed = derive_seed(base.seed, streams::kReplicate + is);
    const TrainResult tr = train(config, p.base.source, p.base.target);
    errors[task] = tr.fault ? std::numeric_limits<double>::infinity()
                            : (forward(tr.t, eval_x) - eval_ref).rowwise().squaredNorm().mean();
  });

  for (std::size_t i_f = 0; i_f < nf; ++i_f) {
    TerminalNoiseRow row;
    row.factor = p.eps_factors[i_f];
    row.eps = row.factor * result.eps_stat;
    row.errors.assign(errors.begin() + static_cast<std::ptrdiff_t>(i_f * ns),
                      errors.begin() + static_cast<std::ptrdiff_t>((i_f + 1) * ns));
    row.mean_error = mean_of(row.errors);
    row.std_err = std_err_of(row.errors);
    result.rows.push_back(std::move(row));
  }

  const TerminalNoiseRow* best = nullptr;
  for (const auto& r : result.rows) {
    if (r.factor <= 1.0 && (!best || r.mean_error < best->mean_error)) best = &r;
  }
  if (best) {
    for (const auto& r : result.rows) {
      if (r.eps <= best->eps) continue;
      if (r.mean_error - best->mean_error > 2.0 * std::hypot(r.std_err, best->std_err)) {
        result.onset_eps = r.eps;
        break;
      }
    }
  }
  return result;
}

CsvTable terminal_noise_table(const TerminalNoiseResult& result) {
  CsvTable t;
  t.header = {"factor", "eps", "eps_stat", "mean_error", "std_err", "seeds"};
  for (const auto& r : result.rows) {
    t.rows.push_back({r.factor, r.eps, result.eps_stat, r.mean_error, r.std_err, static_cast<double>(r.errors.size())});
  }
  return t;
}

// ---- schedule trace ----

ScheduleTraceParams parse_schedule_trace_params(const json& j) {
  check_keys(j, {"schedule", "iterations", "batch_size", "d", "noise"}, "schedule-trace");
  ScheduleTraceParams p;
  TrainConfig c;
  c.d = get_or<int>(j, "d", 1);
  c.noise = noise_kind_from_string(get_or<std::string>(j, "noise", "gaussian"));
  p.iterations = get_or<std::int64_t>(j, "iterations", p.iterations);
  p.batch_size = get_or<std::int64_t>(j, "batch_size", p.batch_size);
  c.iterations = p.iterations;
  if (!j.contains("schedule")) throw ConfigError("schedule-trace: missing 'schedule'");
  p.schedule = parse_schedule(j.at("schedule"), c);
  if (p.iterations < 1 || p.batch_size < 1) throw ConfigError("schedule-trace: iterations and batch_size must be positive");
  return p;
}

}  // namespace snot
