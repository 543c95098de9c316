#include "snot/train_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "snot/error.hpp"

namespace snot {
namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

template <class T>
T require(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return get_or<T>(j, key, T{});
}

Vector get_vector(const json& j, const std::string& key) {
  if (!j.contains(key)) return {};
  const auto v = get_or<std::vector<double>>(j, key, {});
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

DatasetSpec parse_dataset(const json& j, Side default_side, int default_dim) {
  check_keys(j, {"kind", "side", "ambient_dim", "manifold_dim", "low", "high", "location", "offset"}, "dataset");
  DatasetSpec s;
  s.kind = dataset_kind_from_string(require<std::string>(j, "kind", "dataset"));
  const std::string side = get_or<std::string>(j, "side", default_side == Side::Source ? "source" : "target");
  if (side == "source") {
    s.side = Side::Source;
  } else if (side == "target") {
    s.side = Side::Target;
  } else {
    throw ConfigError("dataset: side must be 'source' or 'target'");
  }
  if (j.contains("ambient_dim") || default_dim < 1) {
    s.ambient_dim = require<int>(j, "ambient_dim", "dataset");
  } else {
    s.ambient_dim = default_dim;
  }
  s.manifold_dim = get_or<int>(j, "manifold_dim", s.ambient_dim);
  s.params.low = get_or<double>(j, "low", -1.0);
  s.params.high = get_or<double>(j, "high", 1.0);
  s.params.location = get_vector(j, "location");
  s.params.offset = get_vector(j, "offset");
  s.validate();
  return s;
}

NoiseSchedule parse_schedule(const json& j, const TrainConfig& config) {
  if (!j.is_object()) throw ConfigError("schedule: expected an object");
  const std::string kind = require<std::string>(j, "kind", "schedule");
  NoiseSchedule out;
  if (kind == "constant") {
    check_keys(j, {"kind", "eps"}, "schedule");
    out = ConstantSchedule{get_or<double>(j, "eps", 0.0)};
  } else if (kind == "stepwise_linear") {
    check_keys(j, {"kind", "sigma_max", "sigma_min", "period", "total"}, "schedule");
    StepwiseLinearSchedule s;
    s.sigma_max = get_or<double>(j, "sigma_max", s.sigma_max);
    s.sigma_min = get_or<double>(j, "sigma_min", s.sigma_min);
    s.period = get_or<std::int64_t>(j, "period", s.period);
    s.total = get_or<std::int64_t>(j, "total", config.iterations);
    out = s;
  } else if (kind == "rate_optimal") {
    check_keys(j, {"kind", "m", "E_absY", "c0", "eps_min", "period"}, "schedule");
    RateOptimalSchedule s;
    s.m = require<int>(j, "m", "schedule");
    // "auto" (or absent) uses the cached Monte Carlo estimate for the configured noise.
    if (j.contains("E_absY") && !j.at("E_absY").is_string()) {
      s.e_abs_y = get_or<double>(j, "E_absY", 1.0);
    } else {
      if (j.contains("E_absY") && j.at("E_absY").get<std::string>() != "auto") {
        throw ConfigError("schedule: E_absY must be a number or \"auto\"");
      }
      s.e_abs_y = cached_mean_noise_norm(NoiseModel{config.noise, config.d});
    }
    s.c0 = get_or<double>(j, "c0", s.c0);
    s.eps_min = get_or<double>(j, "eps_min", s.eps_min);
    s.period = get_or<std::int64_t>(j, "period", s.period);
    out = s;
  } else {
    throw ConfigError("schedule: unknown kind '" + kind + "'");
  }
  validate(out);
  return out;
}

RunSpec parse_run_spec(const json& j) {
  check_keys(j,
             {"d", "hidden_width", "batch_size", "iterations", "K_T", "lr", "beta1", "beta2", "tau",
              "lambda_R1", "schedule", "noise", "seed", "log_every", "eval_size", "eval_noise",
              "source_pool", "audit_every", "divergence_threshold", "source", "target"},
             "config");
  RunSpec run;
  TrainConfig& c = run.config;
  c.d = require<int>(j, "d", "config");
  // Width defaults to 256 below d = 16 and 1024 from there on.
  c.hidden_width = get_or<int>(j, "hidden_width", c.d < 16 ? 256 : 1024);
  c.batch_size = get_or<std::int64_t>(j, "batch_size", c.batch_size);
  c.iterations = get_or<std::int64_t>(j, "iterations", c.iterations);
  c.k_t = get_or<int>(j, "K_T", c.k_t);
  c.lr = get_or<double>(j, "lr", c.lr);
  c.beta1 = get_or<double>(j, "beta1", c.beta1);
  c.beta2 = get_or<double>(j, "beta2", c.beta2);
  c.tau = get_or<double>(j, "tau", c.tau);
  c.lambda_r1 = get_or<double>(j, "lambda_R1", c.lambda_r1);
  c.noise = noise_kind_from_string(get_or<std::string>(j, "noise", "gaussian"));
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.log_every = get_or<std::int64_t>(j, "log_every", c.log_every);
  c.eval_size = get_or<Index>(j, "eval_size", c.eval_size);
  if (j.contains("eval_noise")) {
    const json& e = j.at("eval_noise");
    if (e.is_string()) {
      if (e.get<std::string>() != "current") throw ConfigError("config: eval_noise must be a number or \"current\"");
    } else {
      c.eval_noise = get_or<double>(j, "eval_noise", 0.0);
    }
  }
  c.source_pool = get_or<Index>(j, "source_pool", c.source_pool);
  c.audit_every = get_or<std::int64_t>(j, "audit_every", c.audit_every);
  c.divergence_threshold = get_or<double>(j, "divergence_threshold", c.divergence_threshold);
  c.schedule = j.contains("schedule") ? parse_schedule(j.at("schedule"), c) : NoiseSchedule{ConstantSchedule{0.0}};
  if (!j.contains("source") || !j.contains("target")) throw ConfigError("config: source and target are required");
  run.source = parse_dataset(j.at("source"), Side::Source, c.d);
  run.target = parse_dataset(j.at("target"), Side::Target, c.d);
  c.validate();
  if (run.source.ambient_dim != c.d || run.target.ambient_dim != c.d) {
    throw ConfigError("config: dataset ambient_dim must equal d");
  }
  return run;
}

json to_json(const DatasetSpec& spec) {
  json j{{"kind", to_string(spec.kind)},
         {"side", spec.side == Side::Source ? "source" : "target"},
         {"ambient_dim", spec.ambient_dim},
         {"manifold_dim", spec.manifold_dim},
         {"low", spec.params.low},
         {"high", spec.params.high}};
  if (spec.params.location.size()) {
    j["location"] = std::vector<double>(spec.params.location.begin(), spec.params.location.end());
  }
  if (spec.params.offset.size()) {
    j["offset"] = std::vector<double>(spec.params.offset.begin(), spec.params.offset.end());
  }
  return j;
}

json to_json(const NoiseSchedule& schedule) {
  if (const auto* c = std::get_if<ConstantSchedule>(&schedule)) return {{"kind", "constant"}, {"eps", c->eps}};
  if (const auto* s = std::get_if<StepwiseLinearSchedule>(&schedule)) {
    return {{"kind", "stepwise_linear"}, {"sigma_max", s->sigma_max}, {"sigma_min", s->sigma_min},
            {"period", s->period}, {"total", s->total}};
  }
  const auto& r = std::get<RateOptimalSchedule>(schedule);
  return {{"kind", "rate_optimal"}, {"m", r.m}, {"E_absY", r.e_abs_y}, {"c0", r.c0},
          {"eps_min", r.eps_min}, {"period", r.period}};
}

json to_json(const RunSpec& run) {
  const TrainConfig& c = run.config;
  json j{{"d", c.d},
         {"hidden_width", c.hidden_width},
         {"batch_size", c.batch_size},
         {"iterations", c.iterations},
         {"K_T", c.k_t},
         {"lr", c.lr},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"tau", c.tau},
         {"lambda_R1", c.lambda_r1},
         {"schedule", to_json(c.schedule)},
         {"noise", to_string(c.noise)},
         {"seed", c.seed},
         {"log_every", c.log_every},
         {"eval_size", c.eval_size},
         {"source_pool", c.source_pool},
         {"audit_every", c.audit_every},
         {"divergence_threshold", c.divergence_threshold},
         {"source", to_json(run.source)},
         {"target", to_json(run.target)}};
  j["eval_noise"] = c.eval_noise ? json(*c.eval_noise) : json("current");
  return j;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    std::ostringstream msg;
    msg << path.string() << ": JSON parse error at byte " << e.byte << ": " << e.what();
    throw ConfigError(msg.str());
  }
}

}  // namespace snot
