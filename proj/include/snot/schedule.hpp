#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "snot/csv.hpp"

namespace snot {

struct ConstantSchedule {
  double eps = 0.0;
};

// sigma_k = (1 - t) sigma_max + t sigma_min, t = (floor(k/P) P + 1) / K.
struct StepwiseLinearSchedule {
  double sigma_max = 0.2;
  double sigma_min = 0.05;
  std::int64_t period = 2000;
  std::int64_t total = 20000;
};

// max(eps_stat(n), eps_min) with n frozen at the start of each period.
struct RateOptimalSchedule {
  int m = 1;
  double e_abs_y = 1.0;
  double c0 = 1.0;
  double eps_min = 0.0;
  std::int64_t period = 2000;
};

using NoiseSchedule = std::variant<ConstantSchedule, StepwiseLinearSchedule, RateOptimalSchedule>;

void validate(const NoiseSchedule& schedule);
std::string schedule_name(const NoiseSchedule& schedule);

// c0 / E|Y| * { N^-1/2 (m=1), sqrt(ln N / N) (m=2), N^-1/m (m>=3) }.
double epsilon_stat(std::uint64_t n, int m, double e_abs_y, double c0);

// Number of samples seen by the first iteration of the period containing iteration k.
std::int64_t period_sample_count(std::int64_t iteration, std::int64_t period, std::int64_t batch_size);

// Noise level used at iteration k (0-based) of a run with the given batch size.
double effective_eps(const NoiseSchedule& schedule, std::int64_t iteration, std::int64_t batch_size);

// Smallest N with epsilon_stat(N) <= eps.
std::uint64_t crossover_n(int m, double e_abs_y, double c0, double eps);

// Columns iter, n, eps with n = (iter + 1) * batch_size.
CsvTable schedule_trace(const NoiseSchedule& schedule, std::int64_t iterations,
                        std::int64_t batch_size);

}  // namespace snot
