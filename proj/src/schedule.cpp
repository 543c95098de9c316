#include "snot/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "snot/error.hpp"

namespace snot {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

void validate(const NoiseSchedule& schedule) {
  std::visit(Overloaded{
                 [](const ConstantSchedule& s) {
                   if (!(s.eps >= 0.0)) throw ConfigError("schedule: eps must be nonnegative");
                 },
                 [](const StepwiseLinearSchedule& s) {
                   if (!(s.sigma_min >= 0.0)) throw ConfigError("schedule: sigma_min must be nonnegative");
                   if (!(s.sigma_max >= s.sigma_min)) throw ConfigError("schedule: sigma_max < sigma_min");
                   if (s.period < 1) throw ConfigError("schedule: period must be at least 1");
                   if (s.total < 1) throw ConfigError("schedule: total must be at least 1");
                 },
                 [](const RateOptimalSchedule& s) {
                   if (s.m < 1) throw ConfigError("schedule: m must be at least 1");
                   if (!(s.e_abs_y > 0.0)) throw ConfigError("schedule: E|Y| must be positive");
                   if (!(s.c0 > 0.0)) throw ConfigError("schedule: c0 must be positive");
                   if (!(s.eps_min >= 0.0)) throw ConfigError("schedule: eps_min must be nonnegative");
                   if (s.period < 1) throw ConfigError("schedule: period must be at least 1");
                 },
             },
             schedule);
}

std::string schedule_name(const NoiseSchedule& schedule) {
  return std::visit(Overloaded{
                        [](const ConstantSchedule&) { return std::string("constant"); },
                        [](const StepwiseLinearSchedule&) { return std::string("stepwise_linear"); },
                        [](const RateOptimalSchedule&) { return std::string("rate_optimal"); },
                    },
                    schedule);
}

double epsilon_stat(std::uint64_t n, int m, double e_abs_y, double c0) {
  if (m < 1) throw DomainError("epsilon_stat: m must be at least 1");
  if (!(e_abs_y > 0.0) || !(c0 > 0.0)) throw DomainError("epsilon_stat: E|Y| and c0 must be positive");
  if (n < 1 || (m == 2 && n < 2)) throw DomainError("epsilon_stat: N too small");
  const double scale = c0 / e_abs_y;
  const double nd = static_cast<double>(n);
  switch (m) {
    case 1: return scale / std::sqrt(nd);
    case 2: return scale * std::sqrt(std::log(nd) / nd);
    // cbrt and sqrt are correctly rounded on exact powers, pow is not.
    case 3: return scale / std::cbrt(nd);
    case 4: return scale / std::sqrt(std::sqrt(nd));
    default: return scale / std::pow(nd, 1.0 / m);
  }
}

std::int64_t period_sample_count(std::int64_t iteration, std::int64_t period, std::int64_t batch_size) {
  return ((iteration / period) * period + 1) * batch_size;
}

double effective_eps(const NoiseSchedule& schedule, std::int64_t iteration, std::int64_t batch_size) {
  if (iteration < 0) throw DomainError("effective_eps: negative iteration");
  if (batch_size < 1) throw DomainError("effective_eps: batch size must be positive");
  return std::visit(
      Overloaded{
          [](const ConstantSchedule& s) { return s.eps; },
          [&](const StepwiseLinearSchedule& s) {
            const double t = std::clamp(
                static_cast<double>((iteration / s.period) * s.period + 1) / static_cast<double>(s.total),
                0.0, 1.0);
            return (1.0 - t) * s.sigma_max + t * s.sigma_min;
          },
          [&](const RateOptimalSchedule& s) {
            // eps_stat(2) < eps_stat(3) for m = 2, so the count starts at 3 there.
            const std::int64_t floor_n = s.m == 2 ? 3 : 2;
            const std::int64_t n = std::max(floor_n, period_sample_count(iteration, s.period, batch_size));
            return std::max(epsilon_stat(static_cast<std::uint64_t>(n), s.m, s.e_abs_y, s.c0), s.eps_min);
          },
      },
      schedule);
}

std::uint64_t crossover_n(int m, double e_abs_y, double c0, double eps) {
  if (!(eps > 0.0)) throw DomainError("crossover_n: eps must be positive");
  auto ok = [&](std::uint64_t n) { return epsilon_stat(n, m, e_abs_y, c0) <= eps; };
  std::uint64_t lo = 1;
  if (m == 2) {
    if (ok(2)) return 2;
    lo = 3;
  }
  if (ok(lo)) return lo;
  // ok(lo) is false; grow hi until ok(hi), then bisect on the monotone range.
  std::uint64_t hi = lo;
  while (!ok(hi)) {
    if (hi > (std::uint64_t{1} << 62)) throw DomainError("crossover_n: eps too small");
    lo = hi;
    hi *= 2;
  }
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (ok(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

CsvTable schedule_trace(const NoiseSchedule& schedule, std::int64_t iterations,
                        std::int64_t batch_size) {
  validate(schedule);
  CsvTable t;
  t.header = {"iter", "n", "eps"};
  t.rows.reserve(static_cast<std::size_t>(std::max<std::int64_t>(iterations, 0)));
  for (std::int64_t k = 0; k < iterations; ++k) {
    t.rows.push_back({static_cast<double>(k), static_cast<double>((k + 1) * batch_size),
                      effective_eps(schedule, k, batch_size)});
  }
  return t;
}

}  // namespace snot
