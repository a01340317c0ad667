#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kdetect {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<CheckResult> checks;
  int failures() const;
};

// Monte Carlo and self-consistency checks of the slot models and distributions.
// `samples` sets the slot count of each Monte Carlo check.
ValidationReport run_validation_suite(std::uint64_t seed, long samples = 20000);

}  // namespace kdetect
