#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "snot/csv.hpp"
#include "snot/error.hpp"
#include "snot/experiments.hpp"
#include "snot/metrics.hpp"
#include "snot/selftest.hpp"
#include "snot/train_config.hpp"
#include "snot/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace snot;

namespace {

constexpr int kExitFault = 1;
constexpr int kExitConfig = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "snot-out";
  unsigned threads = 1;
};

std::string timestamp_comment() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return std::string("generated ") + buf;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
  os << j.dump(2) << '\n';
}

fs::path prepare_out(const Common& c) {
  fs::create_directories(c.out);
  return fs::path(c.out);
}

json load_config(const Common& c) {
  json j = read_json_file(c.config);
  if (c.seed) j["seed"] = *c.seed;
  return j;
}

json fit_json(double eps, const RateFit& f) {
  return {{"eps", eps}, {"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r_squared}, {"n_points", f.n_points}};
}

int cmd_train(const Common& c) {
  const RunSpec run = parse_run_spec(load_config(c));
  const fs::path out = prepare_out(c);
  const TrainResult r = train(run.config, run.source, run.target);
  const std::string stamp = timestamp_comment();
  write_csv(out / "train.csv", records_table(r.records), stamp);
  if (!r.audits.empty()) write_csv(out / "audit.csv", audits_table(r.audits), stamp);
  save_checkpoint(out / "T.ckpt", r.t);
  save_checkpoint(out / "V.ckpt", r.v);

  json summary{{"config", to_json(run)}, {"iterations_run", r.iterations_run}};
  if (r.fault) {
    summary["fault"] = *r.fault;
    if (!r.records.empty()) {
      const auto& last = r.records.back();
      summary["last_record"] = {{"iter", last.iter}, {"eps", last.eps}, {"loss", last.loss}};
    }
    write_json(out / "summary.json", summary);
    std::cerr << "training fault: " << *r.fault << '\n';
    return kExitFault;
  }

  // Final metrics on fresh samples at the terminal noise level.
  const double eps = effective_eps(run.config.schedule, run.config.iterations - 1, run.config.batch_size);
  constexpr Index kEvalN = 2000;
  const std::uint64_t eval_seed = derive_seed(run.config.seed, streams::kEval + 100);
  const EmpiricalMeasure clean = sample(run.source, kEvalN, derive_seed(eval_seed, 1));
  const EmpiricalMeasure smoothed = smooth(clean, NoiseModel{run.config.noise, run.config.d}, eps, derive_seed(eval_seed, 2));
  const EmpiricalMeasure target = sample(run.target, kEvalN, derive_seed(eval_seed, 3));
  json metrics{{"eps_final", eps},
               {"d_cost", d_cost(r.t, smoothed, target)},
               {"d_target", d_target(r.t, smoothed, target)}};
  if (run.source.kind == DatasetKind::Perpendicular && run.target.kind == DatasetKind::Perpendicular &&
      run.target.manifold_dim == 1) {
    metrics["tangential_error"] = tangential_error(r.t, clean, run.source.manifold_dim);
    metrics["normal_error"] = normal_error(r.t, smoothed, run.target);
    metrics["normal_error_clean"] = normal_error(r.t, clean, run.target);
  }
  summary["metrics"] = metrics;
  write_json(out / "summary.json", summary);
  std::cout << metrics.dump(2) << '\n';
  return 0;
}

int cmd_slope(const Common& c) {
  const SlopeParams p = parse_slope_params(load_config(c));
  const fs::path out = prepare_out(c);
  const SlopeResult r = run_slope(p, c.threads);
  write_csv(out / "slope.csv", slope_table(r), timestamp_comment());
  json fits = json::array();
  for (const auto& f : r.fits) fits.push_back(fit_json(f.eps, f.fit));
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  const json summary{{"fits", fits}, {"warnings", r.warnings}};
  write_json(out / "summary.json", summary);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_conditioning(const Common& c) {
  json j = read_json_file(c.config);
  if (c.seed) j["train"]["seed"] = *c.seed;
  const ConditioningParams p = parse_conditioning_params(j);
  const fs::path out = prepare_out(c);
  const ConditioningResult r = run_conditioning(p, c.threads);
  const std::string stamp = timestamp_comment();
  write_csv(out / "conditioning_runs.csv", conditioning_runs_table(r), stamp);
  write_csv(out / "conditioning_trace.csv", conditioning_trace_table(r), stamp);
  json per_eps = json::array();
  for (const auto& s : r.summary) {
    per_eps.push_back({{"eps", s.eps},
                       {"median_iters_to_threshold", s.median_iters_to_threshold},
                       {"reached", s.reached},
                       {"final_error_variance", s.final_error_variance},
                       {"median_sup_jacobian", s.median_sup_jacobian}});
  }
  const json summary{{"threshold", r.threshold}, {"per_eps", per_eps}};
  write_json(out / "summary.json", summary);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_terminal_noise(const Common& c) {
  json j = read_json_file(c.config);
  if (c.seed) j["train"]["seed"] = *c.seed;
  const TerminalNoiseParams p = parse_terminal_noise_params(j);
  const fs::path out = prepare_out(c);
  const TerminalNoiseResult r = run_terminal_noise(p, c.threads);
  write_csv(out / "terminal_noise.csv", terminal_noise_table(r), timestamp_comment());
  json summary{{"eps_stat", r.eps_stat}, {"E_absY", r.e_abs_y}, {"N", p.n}};
  summary["onset_eps"] = r.onset_eps ? json(*r.onset_eps) : json(nullptr);
  write_json(out / "summary.json", summary);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_schedule_trace(const Common& c, bool out_given) {
  const ScheduleTraceParams p = parse_schedule_trace_params(read_json_file(c.config));
  const CsvTable t = schedule_trace(p.schedule, p.iterations, p.batch_size);
  write_csv(std::cout, t);
  if (out_given) write_csv(prepare_out(c) / "schedule_trace.csv", t);
  return 0;
}

int cmd_selftest(const Common& c, const std::string& fault) {
  SelftestOptions o;
  o.seed = c.seed.value_or(0);
  if (!fault.empty()) {
    if (fault != "backward-sign") throw ConfigError("unknown fault '" + fault + "'");
    o.inject_backward_sign = true;
  }
  const auto suites = run_selftest(o);
  std::cout << format_selftest(suites);
  bool ok = true;
  for (const auto& s : suites) ok = ok && s.passed();
  std::cout << (ok ? "selftest passed\n" : "selftest FAILED\n");
  return ok ? 0 : kExitFault;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"snot-lab: semi-dual neural optimal transport experiments"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed = 0;
  std::string fault;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", common.config, "JSON configuration file");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Base seed (overrides the config)");
    sub->add_option("--out", common.out, "Output directory")->capture_default_str();
    sub->add_option("--threads", common.threads, "Worker threads for sweeps")->capture_default_str()->check(CLI::PositiveNumber);
  };
  auto* train_cmd = app.add_subcommand("train", "Train one SNOT run");
  auto* slope_cmd = app.add_subcommand("slope", "Estimate E[W2(mu, mu_N^eps)] rates");
  auto* cond_cmd = app.add_subcommand("conditioning", "Constant-eps convergence sweep, point mass to Gaussian");
  auto* term_cmd = app.add_subcommand("terminal-noise", "Map error against eps around eps_stat(N)");
  auto* trace_cmd = app.add_subcommand("schedule-trace", "Print the eps schedule as CSV");
  auto* self_cmd = app.add_subcommand("selftest", "Run the invariant suite");
  for (auto* s : {train_cmd, slope_cmd, cond_cmd, term_cmd, trace_cmd}) add_common(s, true);
  add_common(self_cmd, false);
  self_cmd->add_option("--inject-fault", fault, "Mutation test; 'backward-sign' negates backward's gradients");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  auto* active = app.get_subcommands().front();
  if (active->count("--seed")) common.seed = seed;
  const bool out_given = active->count("--out") > 0;

  try {
    if (active == train_cmd) return cmd_train(common);
    if (active == slope_cmd) return cmd_slope(common);
    if (active == cond_cmd) return cmd_conditioning(common);
    if (active == term_cmd) return cmd_terminal_noise(common);
    if (active == trace_cmd) return cmd_schedule_trace(common, out_given);
    return cmd_selftest(common, fault);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFault;
  }
}
