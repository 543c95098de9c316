#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace snot {

struct PropertyResult {
  std::string name;
  int instances = 0;
  int failures = 0;
  double worst = 0.0;  // largest violation or error observed
};

struct SuiteResult {
  std::string name;
  std::vector<PropertyResult> properties;
  bool passed() const;
};

struct SelftestOptions {
  std::uint64_t seed = 0;
  // Mutation test: flips the sign of every gradient returned by backward.
  bool inject_backward_sign = false;
};

std::vector<SuiteResult> run_selftest(const SelftestOptions& options);
std::string format_selftest(const std::vector<SuiteResult>& suites);

}  // namespace snot
